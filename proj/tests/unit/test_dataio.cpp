#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>

#include <gtest/gtest.h>

#include "agshock/csv.hpp"
#include "agshock/dataio.hpp"
#include "agshock/error.hpp"

using namespace agshock;
using namespace std::chrono;

namespace {

Date ymd(int y, unsigned m, unsigned d) { return Date{year{y}, month{m}, day{d}}; }

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no agshock::Error thrown";
  return ErrorCode::kFormatError;
}

TimeSeries monthly(const std::string& name, Date first, int n, double start = 0.0) {
  TimeSeries s;
  s.name = name;
  for (int i = 0; i < n; ++i) {
    s.dates.push_back(add_months(first, i));
    s.values.push_back(start + i);
  }
  return s;
}

}  // namespace

TEST(Dates, ParseFormatRoundTrip) {
  EXPECT_EQ(format_date(parse_date("2000-01-03")), "2000-01-03");
  EXPECT_EQ(parse_date("03/01/2000", "%d/%m/%Y"), ymd(2000, 1, 3));
  EXPECT_EQ(code_of([] { parse_date("2000-13-01"); }), ErrorCode::kUnparseableDate);
  EXPECT_EQ(code_of([] { parse_date("2001-02-29"); }), ErrorCode::kUnparseableDate);
  EXPECT_EQ(code_of([] { parse_date("2000-01-01x"); }), ErrorCode::kUnparseableDate);
}

TEST(Dates, CalendarHelpers) {
  EXPECT_EQ(add_months(ymd(2000, 11, 1), 3), ymd(2001, 2, 1));
  EXPECT_EQ(month_start(ymd(2019, 7, 19)), ymd(2019, 7, 1));
  EXPECT_TRUE(is_weekday(ymd(2020, 1, 1)));    // Wednesday
  EXPECT_FALSE(is_weekday(ymd(2000, 1, 1)));   // Saturday
  EXPECT_FALSE(is_weekday(ymd(2000, 1, 2)));   // Sunday
}

TEST(LoadCsv, ThreeRows) {
  const TimeSeries s = parse_csv("date,value\n2000-01-03,10\n2000-01-04,11\n2000-01-05,12\n");
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s.dates.front(), ymd(2000, 1, 3));
  EXPECT_EQ(s.values, (std::vector<double>{10, 11, 12}));
}

TEST(LoadCsv, SortsOutOfOrderRows) {
  const TimeSeries s = parse_csv("date,value\n2000-01-05,12\n2000-01-03,10\n2000-01-04,11\n");
  EXPECT_TRUE(std::is_sorted(s.dates.begin(), s.dates.end()));
  EXPECT_EQ(s.values, (std::vector<double>{10, 11, 12}));
}

TEST(LoadCsv, DuplicateDateRejected) {
  EXPECT_EQ(code_of([] { parse_csv("date,value\n2000-01-03,10\n2000-01-03,11\n"); }),
            ErrorCode::kDuplicateDate);
}

TEST(LoadCsv, EmptyValuesDroppedAndCounted) {
  LoadStats stats;
  const TimeSeries s = parse_csv("date,value\n2000-01-03,10\n2000-01-04,\n2000-01-05,12\n", {}, "x", &stats);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(stats.rows, 3u);
  EXPECT_EQ(stats.dropped_empty, 1u);
}

TEST(LoadCsv, Errors) {
  EXPECT_EQ(code_of([] { parse_csv("day,value\n2000-01-03,1\n"); }), ErrorCode::kMissingColumn);
  EXPECT_EQ(code_of([] { parse_csv("date,price\n2000-01-03,1\n"); }), ErrorCode::kMissingColumn);
  EXPECT_EQ(code_of([] { parse_csv("date,value\nyesterday,1\n"); }), ErrorCode::kUnparseableDate);
  EXPECT_EQ(code_of([] { parse_csv("date,value\n2000-01-03,abc\n"); }), ErrorCode::kNonFiniteValue);
  EXPECT_EQ(code_of([] { parse_csv("date,value\n2000-01-03,inf\n"); }), ErrorCode::kNonFiniteValue);
  EXPECT_EQ(code_of([] { parse_csv("date,value\n2000-01-03,\n"); }), ErrorCode::kEmptyAfterCleaning);
}

TEST(LoadCsv, CustomSchema) {
  CsvSchema schema{"Date", "Close", "%m/%d/%Y"};
  const TimeSeries s = parse_csv("Date,Open,Close\n01/03/2000,1,2\n", schema);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.dates[0], ymd(2000, 1, 3));
  EXPECT_EQ(s.values[0], 2.0);
}

TEST(LoadCsv, FileNameBecomesSeriesName) {
  const auto dir = std::filesystem::temp_directory_path() / "agshock_dataio_test";
  TimeSeries s = monthly("ignored", ymd(2000, 1, 1), 3);
  write_series_csv(dir / "VIX.csv", s);
  const TimeSeries back = load_csv(dir / "VIX.csv");
  EXPECT_EQ(back.name, "VIX");
  EXPECT_EQ(back.values, s.values);
  std::filesystem::remove_all(dir);
}

TEST(Align, SaturdayFirstUsesFridayClose) {
  // 2000-01-01 is a Saturday; Friday 1999-12-31 carries the value.
  TimeSeries d;
  d.name = "idx";
  d.dates = {ymd(1999, 12, 30), ymd(1999, 12, 31), ymd(2000, 1, 3), ymd(2000, 2, 1)};
  d.values = {1.0, 2.0, 3.0, 4.0};
  const TimeSeries m = align_to_month_start(d);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.dates[0], ymd(2000, 1, 1));
  EXPECT_EQ(m.values[0], 2.0);
  EXPECT_EQ(m.dates[1], ymd(2000, 2, 1));
  EXPECT_EQ(m.values[1], 4.0);
}

TEST(Align, WeekdayFirstWithCloseUnchanged) {
  // 2020-01-01 is a Wednesday.
  TimeSeries d;
  d.name = "idx";
  d.dates = {ymd(2019, 12, 31), ymd(2020, 1, 1), ymd(2020, 1, 2)};
  d.values = {5.0, 7.5, 9.0};
  const TimeSeries m = align_to_month_start(d);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.values[0], 7.5);
  EXPECT_NE(m.provenance, "native");
}

TEST(Align, GapLongerThanLookbackIsEmptyMonth) {
  TimeSeries d;
  d.name = "idx";
  d.dates = {ymd(2000, 1, 3), ymd(2000, 1, 20), ymd(2000, 2, 15)};
  d.values = {1, 2, 3};
  EXPECT_EQ(code_of([&] { align_to_month_start(d); }), ErrorCode::kEmptyMonth);
  // Twelve days back is fine with a longer lookback.
  EXPECT_NO_THROW(align_to_month_start(d, 12));
}

TEST(Align, OneValuePerMonthOfSpan) {
  TimeSeries d;
  d.name = "idx";
  for (sys_days t{ymd(2001, 1, 1)}; t <= sys_days{ymd(2002, 12, 31)}; t += days{1}) {
    if (!is_weekday(Date{t})) continue;
    d.dates.push_back(Date{t});
    d.values.push_back(static_cast<double>(d.values.size()));
  }
  const TimeSeries m = align_to_month_start(d);
  EXPECT_EQ(m.size(), 24u);
  for (const auto& date : m.dates) EXPECT_TRUE(is_month_start(date));
}

TEST(Merge, FullTwentyYearsGives240Months) {
  const auto a = monthly("a", ymd(2000, 1, 1), 240);
  const auto b = monthly("b", ymd(2000, 1, 1), 240, 100.0);
  const MonthlyPanel p = merge_panel({a, b});
  EXPECT_EQ(p.rows(), 240u);
  EXPECT_EQ(p.months.back(), ymd(2019, 12, 1));
}

TEST(Merge, IntersectionOfRanges) {
  const auto a = monthly("A", ymd(2000, 1, 1), 132);  // 2000-01 .. 2010-12
  const auto b = monthly("B", ymd(2005, 1, 1), 180);  // 2005-01 .. 2019-12
  const MonthlyPanel p = merge_panel({a, b});
  EXPECT_EQ(p.months.front(), ymd(2005, 1, 1));
  EXPECT_EQ(p.months.back(), ymd(2010, 12, 1));
  EXPECT_EQ(p.rows(), 72u);
  EXPECT_EQ(p.column_names(), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(p.column("A").values.front(), 60.0);
  EXPECT_EQ(p.column("B").values.front(), 0.0);
}

TEST(Merge, DisjointRangesNoOverlap) {
  const auto a = monthly("A", ymd(2000, 1, 1), 24);
  const auto b = monthly("B", ymd(2005, 1, 1), 24);
  EXPECT_EQ(code_of([&] { merge_panel({a, b}); }), ErrorCode::kNoOverlap);
}

TEST(Merge, RejectsNonMonthlyDates) {
  TimeSeries a = monthly("A", ymd(2000, 1, 1), 3);
  a.dates[1] = ymd(2000, 2, 2);
  EXPECT_EQ(code_of([&] { merge_panel({a}); }), ErrorCode::kNotMonthly);
}

TEST(Merge, PermutationOnlyChangesColumnOrder) {
  const auto a = monthly("A", ymd(2000, 1, 1), 30, 1.0);
  const auto b = monthly("B", ymd(2000, 6, 1), 30, 50.0);
  const auto c = monthly("C", ymd(2000, 3, 1), 40, -5.0);
  const MonthlyPanel p1 = merge_panel({a, b, c});
  const MonthlyPanel p2 = merge_panel({c, a, b});
  EXPECT_EQ(p1.months, p2.months);
  for (const auto& name : {"A", "B", "C"}) EXPECT_EQ(p1.column(name).values, p2.column(name).values);
  EXPECT_EQ(p2.column_names(), (std::vector<std::string>{"C", "A", "B"}));
}

TEST(PanelCsv, RoundTripAtTwelveDigits) {
  auto a = monthly("A", ymd(2000, 1, 1), 12);
  auto b = monthly("B", ymd(2000, 1, 1), 12);
  for (auto& v : b.values) v = v / 7.0 + 1e6;
  const MonthlyPanel p = merge_panel({a, b});
  const MonthlyPanel back = parse_panel_csv(format_panel_csv(p));
  EXPECT_EQ(back.months, p.months);
  ASSERT_EQ(back.columns.size(), 2u);
  for (std::size_t i = 0; i < p.rows(); ++i) {
    EXPECT_NEAR(back.column("B").values[i], p.column("B").values[i], 1e-11 * 1e6);
  }
  EXPECT_EQ(format_panel_csv(back), format_panel_csv(p));
}

TEST(Synthetic, NoiseFreeLinearTrend) {
  SyntheticSpec spec;
  spec.n_months = 30;
  spec.trend = 1.0;
  const TimeSeries s = generate_synthetic(spec);
  ASSERT_EQ(s.size(), 30u);
  for (int t = 0; t < 30; ++t) EXPECT_EQ(s.values[static_cast<std::size_t>(t)], t);
  EXPECT_EQ(s.dates[0], ymd(2000, 1, 1));
  EXPECT_EQ(s.dates[29], ymd(2002, 6, 1));
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec spec;
  spec.noise_std = 2.0;
  spec.seasonal_amplitude = 3.0;
  spec.seed = 42;
  EXPECT_EQ(generate_synthetic(spec).values, generate_synthetic(spec).values);
  SyntheticSpec other = spec;
  other.seed = 43;
  EXPECT_NE(generate_synthetic(spec).values, generate_synthetic(other).values);
}

TEST(Synthetic, ShockIsExactlyAdditive) {
  SyntheticSpec base;
  base.noise_std = 1.0;
  base.trend = 0.3;
  base.seed = 9;
  SyntheticSpec shocked = base;
  shocked.shock_months = {50};
  shocked.shock_magnitude = 10.0 * base.noise_std;
  const auto a = generate_synthetic(base).values;
  const auto b = generate_synthetic(shocked).values;
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_NEAR(b[t] - a[t], t == 50 ? 10.0 : 0.0, 1e-12 * std::abs(b[t])) << t;
  }
}

TEST(Synthetic, InvalidSpecs) {
  SyntheticSpec s;
  s.n_months = 23;
  EXPECT_EQ(code_of([&] { generate_synthetic(s); }), ErrorCode::kInvalidSpec);
  s.n_months = 24;
  s.shock_months = {24};
  EXPECT_EQ(code_of([&] { generate_synthetic(s); }), ErrorCode::kInvalidSpec);
  s.shock_months = {};
  s.noise_std = -1.0;
  EXPECT_EQ(code_of([&] { generate_synthetic(s); }), ErrorCode::kInvalidSpec);
}

TEST(SyntheticPanel, ShapesAndDrivers) {
  SyntheticPanelSpec spec;
  spec.seed = 5;
  const SyntheticSnapshot snap = generate_synthetic_panel(spec);
  EXPECT_EQ(snap.indices.size(), 5u);
  EXPECT_EQ(snap.commodities.size(), 15u);
  EXPECT_EQ(snap.drivers.size(), 15u);
  for (const auto& d : snap.drivers) {
    EXPECT_NE(std::find(spec.index_names.begin(), spec.index_names.end(), d), spec.index_names.end());
  }
  for (const auto& shocks : snap.index_shocks) EXPECT_EQ(shocks.size(), 10u);
  const MonthlyPanel p = merge_panel(snap.indices);
  EXPECT_EQ(p.rows(), 240u);
}

TEST(SyntheticPanel, WeekdayExpansionRealignsToAnchors) {
  SyntheticPanelSpec spec;
  spec.seed = 11;
  const SyntheticSnapshot snap = generate_synthetic_panel(spec);
  const TimeSeries& m = snap.indices[0];
  const TimeSeries daily = expand_to_weekdays(m, 0.0, 3, 0.0);
  for (const auto& d : daily.dates) EXPECT_TRUE(is_weekday(d));
  const TimeSeries back = align_to_month_start(daily);
  ASSERT_EQ(back.size(), m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    // Weekend anchors take the interpolated value of the preceding Friday.
    if (is_weekday(m.dates[i])) {
      EXPECT_DOUBLE_EQ(back.values[i], m.values[i]) << format_date(m.dates[i]);
    }
  }
}
