#include "agshock/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"
#include "agshock/rng.hpp"

namespace agshock {

using namespace std::chrono;

Date parse_date(std::string_view text, std::string_view format) {
  std::string buf(text);
  std::string fmt(format);
  std::tm tm{};
  const char* end = strptime(buf.c_str(), fmt.c_str(), &tm);
  if (end == nullptr || *end != '\0') {
    throw Error(ErrorCode::kUnparseableDate, "cannot parse '" + buf + "' with '" + fmt + "'");
  }
  Date d{year{tm.tm_year + 1900}, month{static_cast<unsigned>(tm.tm_mon + 1)},
         day{static_cast<unsigned>(tm.tm_mday)}};
  if (!d.ok()) throw Error(ErrorCode::kUnparseableDate, "invalid calendar date '" + buf + "'");
  return d;
}

std::string format_date(const Date& d) {
  char out[16];
  std::snprintf(out, sizeof(out), "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return out;
}

Date month_start(const Date& d) { return Date{d.year(), d.month(), day{1}}; }

Date add_months(const Date& d, int n) {
  auto ym = year_month{d.year(), d.month()} + months{n};
  return Date{ym.year(), ym.month(), d.day()};
}

bool is_month_start(const Date& d) { return d.day() == day{1}; }

bool is_weekday(const Date& d) {
  const weekday wd{sys_days{d}};
  return wd != Saturday && wd != Sunday;
}

void TimeSeries::validate() const {
  if (dates.size() != values.size()) {
    throw Error(ErrorCode::kFormatError, name + ": dates/values length mismatch");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFiniteValue, name + ": row " + std::to_string(i));
    }
    if (i > 0 && !(dates[i - 1] < dates[i])) {
      throw Error(ErrorCode::kDuplicateDate, name + ": " + format_date(dates[i]));
    }
  }
}

TimeSeries parse_csv(std::string_view text, const CsvSchema& schema, std::string name,
                     LoadStats* stats) {
  const CsvTable table = parse_csv_table(text);
  const auto date_col = table.column_index(schema.date_column);
  const auto value_col = table.column_index(schema.value_column);
  if (!date_col) throw Error(ErrorCode::kMissingColumn, name + ": " + schema.date_column);
  if (!value_col) throw Error(ErrorCode::kMissingColumn, name + ": " + schema.value_column);

  LoadStats local;
  std::vector<std::pair<Date, double>> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ++local.rows;
    const std::string_view raw_value =
        *value_col < row.size() ? std::string_view(row[*value_col]) : std::string_view{};
    if (trim(raw_value).empty()) {
      ++local.dropped_empty;
      continue;
    }
    const std::string_view raw_date =
        *date_col < row.size() ? std::string_view(row[*date_col]) : std::string_view{};
    Date d;
    try {
      d = parse_date(trim(raw_date), schema.date_format);
    } catch (const Error&) {
      throw Error(ErrorCode::kUnparseableDate,
                  name + ": row " + std::to_string(r + 1) + " '" + std::string(raw_date) + "'");
    }
    const auto v = parse_double(trim(raw_value));
    if (!v || !std::isfinite(*v)) {
      throw Error(ErrorCode::kNonFiniteValue,
                  name + ": row " + std::to_string(r + 1) + " '" + std::string(raw_value) + "'");
    }
    rows.emplace_back(d, *v);
  }
  if (rows.empty()) throw Error(ErrorCode::kEmptyAfterCleaning, name);

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  TimeSeries ts;
  ts.name = std::move(name);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].first == rows[i - 1].first) {
      throw Error(ErrorCode::kDuplicateDate, ts.name + ": " + format_date(rows[i].first));
    }
    ts.dates.push_back(rows[i].first);
    ts.values.push_back(rows[i].second);
  }
  if (stats) *stats = local;
  return ts;
}

TimeSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema,
                    LoadStats* stats) {
  return parse_csv(read_text_file(path), schema, path.stem().string(), stats);
}

void write_series_csv(const std::filesystem::path& path, const TimeSeries& series) {
  std::ostringstream out;
  out << "date,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_date(series.dates[i]) << ',' << format_number(series.values[i]) << '\n';
  }
  write_text_file(path, out.str());
}

TimeSeries align_to_month_start(const TimeSeries& daily, int lookback_days) {
  daily.validate();
  if (daily.empty()) throw Error(ErrorCode::kEmptyAfterCleaning, daily.name);
  if (lookback_days < 0) throw Error(ErrorCode::kInvalidConfig, "negative lookback");

  TimeSeries out;
  out.name = daily.name;
  out.provenance = "month-start(lookback=" + std::to_string(lookback_days) + "d)";

  Date m = month_start(daily.dates.front());
  if (m < daily.dates.front()) m = add_months(m, 1);
  const Date last = daily.dates.back();
  for (; !(last < m); m = add_months(m, 1)) {
    // Latest observation on or before the 1st.
    auto it = std::upper_bound(daily.dates.begin(), daily.dates.end(), m);
    if (it == daily.dates.begin()) {
      throw Error(ErrorCode::kEmptyMonth, daily.name + ": " + format_date(m));
    }
    --it;
    const auto gap = (sys_days{m} - sys_days{*it}).count();
    if (gap > lookback_days) {
      throw Error(ErrorCode::kEmptyMonth, daily.name + ": " + format_date(m));
    }
    out.dates.push_back(m);
    out.values.push_back(daily.values[static_cast<std::size_t>(it - daily.dates.begin())]);
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyMonth, daily.name + ": span has no month start");
  return out;
}

bool MonthlyPanel::has_column(std::string_view name) const {
  return std::any_of(columns.begin(), columns.end(),
                     [&](const PanelColumn& c) { return c.name == name; });
}

const PanelColumn& MonthlyPanel::column(std::string_view name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::kMissingColumn, std::string(name));
}

std::vector<std::string> MonthlyPanel::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns.size());
  for (const auto& c : columns) names.push_back(c.name);
  return names;
}

void MonthlyPanel::validate() const {
  for (std::size_t i = 1; i < months.size(); ++i) {
    if (!(months[i - 1] < months[i])) {
      throw Error(ErrorCode::kDuplicateDate, "panel month " + format_date(months[i]));
    }
  }
  for (const auto& c : columns) {
    if (c.values.size() != months.size()) {
      throw Error(ErrorCode::kFormatError, "panel column " + c.name + " has wrong length");
    }
  }
}

MonthlyPanel merge_panel(const std::vector<TimeSeries>& series) {
  if (series.empty()) throw Error(ErrorCode::kNoOverlap, "no series to merge");
  Date lo = series.front().dates.empty() ? Date{} : series.front().dates.front();
  Date hi = series.front().dates.empty() ? Date{} : series.front().dates.back();
  for (const auto& s : series) {
    s.validate();
    if (s.empty()) throw Error(ErrorCode::kNoOverlap, s.name + " is empty");
    for (const auto& d : s.dates) {
      if (!is_month_start(d)) {
        throw Error(ErrorCode::kNotMonthly, s.name + ": " + format_date(d));
      }
    }
    lo = std::max(lo, s.dates.front());
    hi = std::min(hi, s.dates.back());
  }
  if (hi < lo) throw Error(ErrorCode::kNoOverlap, "month ranges do not intersect");

  // Months inside [lo, hi] present in every series.
  std::vector<Date> months;
  for (const auto& d : series.front().dates) {
    if (d < lo || hi < d) continue;
    const bool everywhere = std::all_of(series.begin() + 1, series.end(), [&](const TimeSeries& s) {
      return std::binary_search(s.dates.begin(), s.dates.end(), d);
    });
    if (everywhere) months.push_back(d);
  }
  if (months.empty()) throw Error(ErrorCode::kNoOverlap, "no common months");

  MonthlyPanel panel;
  panel.months = months;
  for (const auto& s : series) {
    PanelColumn col{s.name, {}, s.provenance};
    col.values.reserve(months.size());
    for (const auto& d : months) {
      const auto it = std::lower_bound(s.dates.begin(), s.dates.end(), d);
      col.values.push_back(s.values[static_cast<std::size_t>(it - s.dates.begin())]);
    }
    panel.columns.push_back(std::move(col));
  }
  return panel;
}

std::string format_panel_csv(const MonthlyPanel& panel) {
  panel.validate();
  std::ostringstream out;
  out << "month";
  for (const auto& c : panel.columns) out << ',' << c.name;
  out << '\n';
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    out << format_date(panel.months[r]);
    for (const auto& c : panel.columns) out << ',' << format_number(c.values[r]);
    out << '\n';
  }
  return out.str();
}

void write_panel_csv(const std::filesystem::path& path, const MonthlyPanel& panel) {
  write_text_file(path, format_panel_csv(panel));
}

MonthlyPanel parse_panel_csv(std::string_view text) {
  const CsvTable table = parse_csv_table(text);
  if (table.header.empty() || table.header.front() != "month") {
    throw Error(ErrorCode::kMissingColumn, "panel CSV must start with 'month'");
  }
  MonthlyPanel panel;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    panel.columns.push_back(PanelColumn{table.header[c], {}, "native"});
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw Error(ErrorCode::kFormatError, "panel row " + std::to_string(r + 1) + " has wrong width");
    }
    panel.months.push_back(parse_date(row[0]));
    for (std::size_t c = 1; c < row.size(); ++c) {
      const auto v = parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::kNonFiniteValue, "panel row " + std::to_string(r + 1));
      }
      panel.columns[c - 1].values.push_back(*v);
    }
  }
  panel.validate();
  return panel;
}

MonthlyPanel read_panel_csv(const std::filesystem::path& path) {
  return parse_panel_csv(read_text_file(path));
}

TimeSeries generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_months < 24) throw Error(ErrorCode::kInvalidSpec, "n_months must be >= 24");
  if (!(spec.noise_std >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "noise_std must be >= 0");
  if (spec.seasonal_period < 1) throw Error(ErrorCode::kInvalidSpec, "seasonal_period must be >= 1");
  if (!spec.start.ok()) throw Error(ErrorCode::kInvalidSpec, "invalid start date");
  for (int s : spec.shock_months) {
    if (s < 0 || s >= spec.n_months) {
      throw Error(ErrorCode::kInvalidSpec, "shock month " + std::to_string(s) + " out of range");
    }
  }

  Rng rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  TimeSeries ts;
  ts.name = spec.name;
  const Date first = month_start(spec.start);
  for (int t = 0; t < spec.n_months; ++t) {
    double v = spec.level + spec.trend * t;
    if (spec.seasonal_amplitude != 0.0) {
      v += spec.seasonal_amplitude *
           std::sin(2.0 * std::numbers::pi * t / spec.seasonal_period);
    }
    // Always draw so shocks and noise streams stay in lockstep across specs.
    const double z = noise(rng);
    if (spec.noise_std > 0.0) v += spec.noise_std * z;
    ts.dates.push_back(add_months(first, t));
    ts.values.push_back(v);
  }
  for (int s : spec.shock_months) ts.values[static_cast<std::size_t>(s)] += spec.shock_magnitude;
  return ts;
}

namespace {

std::vector<int> draw_shock_months(Rng& rng, int n_months, int count, int margin, int spacing) {
  std::vector<int> shocks;
  std::uniform_int_distribution<int> pick(margin, n_months - 1 - margin);
  int attempts = 0;
  while (static_cast<int>(shocks.size()) < count && attempts++ < 10000) {
    const int m = pick(rng);
    const bool clear = std::none_of(shocks.begin(), shocks.end(),
                                    [&](int s) { return std::abs(s - m) < spacing; });
    if (clear) shocks.push_back(m);
  }
  std::sort(shocks.begin(), shocks.end());
  return shocks;
}

}  // namespace

SyntheticSnapshot generate_synthetic_panel(const SyntheticPanelSpec& spec) {
  if (spec.n_months < 24) throw Error(ErrorCode::kInvalidSpec, "n_months must be >= 24");
  if (spec.index_names.empty() || spec.commodity_names.empty()) {
    throw Error(ErrorCode::kInvalidSpec, "need at least one index and one commodity");
  }
  if (spec.response_lag < 0 || spec.response_duration < 1) {
    throw Error(ErrorCode::kInvalidSpec, "invalid shock response shape");
  }
  Rng rng(derive_seed(spec.seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SyntheticSnapshot snap;

  for (std::size_t k = 0; k < spec.index_names.size(); ++k) {
    SyntheticSpec s;
    s.name = spec.index_names[k];
    s.n_months = spec.n_months;
    s.start = spec.start;
    s.level = 50.0 + 100.0 * unit(rng);
    s.trend = 0.4 * (unit(rng) - 0.3);
    s.seasonal_amplitude = 0.5 * unit(rng);
    s.noise_std = spec.index_noise_std;
    s.shock_magnitude = spec.shock_sigmas * spec.index_noise_std * (unit(rng) < 0.5 ? -1.0 : 1.0);
    s.shock_months = draw_shock_months(rng, spec.n_months, spec.shocks_per_index, 2,
                                       spec.response_lag + spec.response_duration + 2);
    s.seed = derive_seed(spec.seed, 100 + k);
    snap.index_shocks.push_back(s.shock_months);
    snap.indices.push_back(generate_synthetic(s));
  }

  std::uniform_int_distribution<std::size_t> pick_index(0, spec.index_names.size() - 1);
  for (std::size_t c = 0; c < spec.commodity_names.size(); ++c) {
    const std::size_t driver = pick_index(rng);
    SyntheticSpec s;
    s.name = spec.commodity_names[c];
    s.n_months = spec.n_months;
    s.start = spec.start;
    s.level = 200.0 + 800.0 * unit(rng);
    s.trend = 0.5 * unit(rng);
    s.seasonal_amplitude = 2.0 * unit(rng);
    s.noise_std = spec.commodity_noise_std;
    s.seed = derive_seed(spec.seed, 1000 + c);
    TimeSeries series = generate_synthetic(s);

    const auto& index = snap.indices[driver].values;
    const double index_mean = std::accumulate(index.begin(), index.end(), 0.0) / index.size();
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
      series.values[t] += sign * spec.index_loading * (index[t] - index_mean);
    }
    const double response = (unit(rng) < 0.5 ? -1.0 : 1.0) * spec.response_magnitude *
                            spec.commodity_noise_std;
    for (int shock : snap.index_shocks[driver]) {
      for (int d = 0; d < spec.response_duration; ++d) {
        const int t = shock + spec.response_lag + d;
        if (t < spec.n_months) series.values[static_cast<std::size_t>(t)] += response;
      }
    }
    snap.commodities.push_back(std::move(series));
    snap.drivers.push_back(spec.index_names[driver]);
  }
  return snap;
}

TimeSeries expand_to_weekdays(const TimeSeries& monthly, double noise_std, std::uint64_t seed,
                              double holiday_rate) {
  monthly.validate();
  if (monthly.size() < 2) throw Error(ErrorCode::kSeriesTooShort, monthly.name);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TimeSeries daily;
  daily.name = monthly.name;
  const sys_days first{monthly.dates.front()};
  const sys_days last{monthly.dates.back()};
  std::size_t seg = 0;
  for (sys_days d = first - days{7}; d <= last + days{7}; d += days{1}) {
    const Date date{d};
    const double z = noise(rng);
    const double u = unit(rng);
    if (!is_weekday(date)) continue;
    // Never drop an anchor day itself so every month start has a close nearby.
    if (u < holiday_rate && !is_month_start(date)) continue;
    while (seg + 1 < monthly.size() && sys_days{monthly.dates[seg + 1]} <= d) ++seg;
    double v;
    if (d < first) {
      v = monthly.values.front();
    } else if (seg + 1 >= monthly.size()) {
      v = monthly.values.back();
    } else {
      const double span = (sys_days{monthly.dates[seg + 1]} - sys_days{monthly.dates[seg]}).count();
      const double frac = (d - sys_days{monthly.dates[seg]}).count() / span;
      v = monthly.values[seg] + frac * (monthly.values[seg + 1] - monthly.values[seg]);
    }
    daily.dates.push_back(date);
    daily.values.push_back(v + noise_std * z);
  }
  return daily;
}

}  // namespace agshock
