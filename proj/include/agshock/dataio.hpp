#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace agshock {

using Date = std::chrono::year_month_day;

Date parse_date(std::string_view text, std::string_view format = "%Y-%m-%d");
std::string format_date(const Date& d);
Date month_start(const Date& d);
Date add_months(const Date& d, int months);
bool is_month_start(const Date& d);
bool is_weekday(const Date& d);

// Dated sequence of finite observations, dates strictly increasing.
struct TimeSeries {
  std::string name;
  std::vector<Date> dates;
  std::vector<double> values;
  // Alignment rule that produced the series ("native" when loaded as-is).
  std::string provenance = "native";

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  // Throws DuplicateDate / NonFiniteValue / FormatError on a broken invariant.
  void validate() const;
};

struct CsvSchema {
  std::string date_column = "date";
  std::string value_column = "value";
  std::string date_format = "%Y-%m-%d";
};

struct LoadStats {
  std::size_t rows = 0;
  std::size_t dropped_empty = 0;
};

// Reads a two-column (date, value) snapshot. Rows with an empty value are
// dropped and counted; output is sorted ascending by date.
TimeSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema = {},
                    LoadStats* stats = nullptr);
TimeSeries parse_csv(std::string_view text, const CsvSchema& schema = {},
                     std::string name = "series", LoadStats* stats = nullptr);
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);

// One value per month start: the observation on the 1st if present, otherwise
// the most recent prior observation no more than `lookback_days` earlier.
// The span is every month start in [first date, last date].
TimeSeries align_to_month_start(const TimeSeries& daily, int lookback_days = 7);

struct PanelColumn {
  std::string name;
  std::vector<double> values;
  std::string provenance;
};

struct MonthlyPanel {
  std::vector<Date> months;
  std::vector<PanelColumn> columns;

  std::size_t rows() const { return months.size(); }
  bool has_column(std::string_view name) const;
  const PanelColumn& column(std::string_view name) const;
  std::vector<std::string> column_names() const;
  void validate() const;
};

// Inner join on month over the intersection of the series' month ranges.
// Column order follows the input order.
MonthlyPanel merge_panel(const std::vector<TimeSeries>& series);

// Panel CSV: `month` first, one column per series, 12 significant digits.
std::string format_panel_csv(const MonthlyPanel& panel);
void write_panel_csv(const std::filesystem::path& path, const MonthlyPanel& panel);
MonthlyPanel parse_panel_csv(std::string_view text);
MonthlyPanel read_panel_csv(const std::filesystem::path& path);

struct SyntheticSpec {
  std::string name = "synthetic";
  int n_months = 240;
  Date start = Date{std::chrono::year{2000}, std::chrono::January, std::chrono::day{1}};
  double level = 0.0;
  double trend = 0.0;  // per month
  double seasonal_amplitude = 0.0;
  int seasonal_period = 12;
  double noise_std = 0.0;
  std::vector<int> shock_months;  // 0-based month offsets
  double shock_magnitude = 0.0;
  std::uint64_t seed = 0;
};

// level + trend·t + A·sin(2πt/period) + N(0, noise_std²) + shocks.
TimeSeries generate_synthetic(const SyntheticSpec& spec);

// Synthetic multi-series snapshot where every commodity is driven by one
// index: the commodity level moves with the index and each index shock is
// followed by a sustained production shock.
struct SyntheticPanelSpec {
  int n_months = 240;
  Date start = Date{std::chrono::year{2000}, std::chrono::January, std::chrono::day{1}};
  std::vector<std::string> index_names = {"Gold", "Oil", "DOW", "SP500", "VIX"};
  std::vector<std::string> commodity_names = {
      "Beef",  "Butter", "Cheese",        "Chickens", "Ducks",
      "Eggs",  "IceCream", "LambMutton",  "Milk",     "OtherPoultry",
      "Pork",  "Sherbet",  "Turkeys",     "Veal",     "WaterIces"};
  double index_noise_std = 1.0;
  double shock_sigmas = 8.0;
  int shocks_per_index = 10;
  int response_lag = 1;       // months between index shock and production response
  int response_duration = 4;  // months the production response persists
  double response_magnitude = 6.0;  // in units of production noise std
  double commodity_noise_std = 1.0;
  double index_loading = 0.5;
  std::uint64_t seed = 0;
};

struct SyntheticSnapshot {
  std::vector<TimeSeries> indices;      // monthly, first-of-month dates
  std::vector<TimeSeries> commodities;  // monthly, first-of-month dates
  std::vector<std::string> drivers;     // driving index per commodity
  std::vector<std::vector<int>> index_shocks;
};

SyntheticSnapshot generate_synthetic_panel(const SyntheticPanelSpec& spec);

// Expands a monthly series to weekday observations by linear interpolation
// between month-start anchors, with a few dropped weekdays standing in for
// market holidays. Aligning the result recovers the anchors approximately.
TimeSeries expand_to_weekdays(const TimeSeries& monthly, double noise_std,
                              std::uint64_t seed, double holiday_rate = 0.02);

}  // namespace agshock
