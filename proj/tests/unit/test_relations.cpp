#include <cmath>
#include <filesystem>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"
#include "agshock/relations.hpp"
#include "agshock/rng.hpp"

using namespace agshock;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no agshock::Error thrown";
  return ErrorCode::kFormatError;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

RelationMatrix table_rows() {
  RelationMatrix m;
  m.commodities = {"Milk", "Veal"};
  m.indices = {"Gold", "DOW", "S&P 500", "Oil", "VIX"};
  m.correlation.resize(2, 5);
  m.correlation << -0.261, 0.803, 0.781, 0.744, 0.427, 0.319, -0.791, -0.808, -0.772, -0.414;
  m.causation.resize(2, 5);
  m.causation << 1.0, 2.0, 9.0, 3.0, 0.5, 4.0, 1.0, 8.0, 2.0, 0.1;
  m.causation_p = Eigen::MatrixXd::Constant(2, 5, 0.5);
  return m;
}

}  // namespace

TEST(Pearson, Identities) {
  const auto x = noise(50, 1);
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);
  EXPECT_NEAR(pearson(x, neg), -1.0, 1e-12);
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{2, 4, 6, 9};
  EXPECT_NEAR(pearson(a, b), 11.5 / std::sqrt(5.0 * 26.75), 1e-14);
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  const auto x = noise(80, 2);
  const auto y = noise(80, 3);
  EXPECT_NEAR(pearson(x, y), pearson(y, x), 1e-12);
  std::vector<double> up, down;
  for (double v : y) {
    up.push_back(3.0 * v + 11.0);
    down.push_back(-0.5 * v + 2.0);
  }
  EXPECT_NEAR(pearson(x, up), pearson(x, y), 1e-12);
  EXPECT_NEAR(pearson(x, down), -pearson(x, y), 1e-12);
}

TEST(Pearson, Errors) {
  const std::vector<double> flat{1, 1, 1, 1};
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_EQ(code_of([&] { pearson(flat, x); }), ErrorCode::kConstantInput);
  EXPECT_EQ(code_of([&] { pearson(x, std::vector<double>{1, 2, 3}); }), ErrorCode::kLengthMismatch);
}

TEST(Causation, ConstructedCausalSystem) {
  const auto cause = noise(300, 5);
  const auto eps = noise(300, 6);
  std::vector<double> effect(300, 0.0);
  for (std::size_t t = 1; t < 300; ++t) effect[t] = 0.8 * cause[t - 1] + 0.1 * eps[t];
  const auto s = causation_score(cause, effect, 3);
  EXPECT_LT(s.p_value, 0.001);
  EXPECT_GT(s.f_stat, 100.0);
  EXPECT_EQ(s.df_num, 3u);
  EXPECT_EQ(s.df_den, 300u - 3u - 7u);
  // The reverse direction carries no information.
  EXPECT_GT(causation_score(effect, cause, 3).p_value, 0.001);
}

TEST(Causation, NullRejectionRate) {
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> cause(500), effect(500);
    for (auto& v : cause) v = z(rng);
    for (auto& v : effect) v = z(rng);
    const auto s = causation_score(cause, effect, 3);
    EXPECT_GE(s.f_stat, 0.0);
    rejections += s.p_value < 0.05;
  }
  EXPECT_NEAR(rejections / 200.0, 0.05, 0.03);
}

TEST(Causation, FDistributionTail) {
  EXPECT_EQ(f_distribution_sf(0.0, 3, 100), 1.0);
  // F(2, d2) has survival (1 + 2f/d2)^(-d2/2).
  EXPECT_NEAR(f_distribution_sf(3.0, 2, 10), std::pow(1.0 + 0.6, -5.0), 1e-12);
}

TEST(Causation, IdenticalSeriesDegenerate) {
  const auto x = noise(100, 9);
  EXPECT_EQ(code_of([&] { causation_score(x, x, 3); }), ErrorCode::kSingularRegression);
}

TEST(Causation, Errors) {
  const auto x = noise(14, 1);
  const auto y = noise(14, 2);
  EXPECT_EQ(code_of([&] { causation_score(x, y, 3); }), ErrorCode::kTooShort);
  auto bad = noise(40, 3);
  bad[5] = std::nan("");
  EXPECT_EQ(code_of([&] { causation_score(bad, noise(40, 4), 3); }), ErrorCode::kNonFiniteValue);
}

TEST(Pairing, TableRowsPickAbsoluteArgmax) {
  const auto m = table_rows();
  const auto milk = pair_features(m, "Milk");
  EXPECT_EQ(milk.corr_index, "DOW");
  EXPECT_DOUBLE_EQ(milk.corr_value, 0.803);
  EXPECT_EQ(milk.caus_index, "S&P 500");
  EXPECT_FALSE(milk.merged);
  EXPECT_EQ(milk.feature_indices(), (std::vector<std::string>{"S&P 500", "DOW"}));

  const auto veal = pair_features(m, "Veal");
  EXPECT_EQ(veal.corr_index, "S&P 500");
  EXPECT_DOUBLE_EQ(veal.corr_value, -0.808);
  EXPECT_EQ(veal.caus_index, "S&P 500");
  EXPECT_TRUE(veal.merged);
  EXPECT_EQ(veal.feature_indices(), (std::vector<std::string>{"S&P 500"}));

  EXPECT_EQ(code_of([&] { pair_features(m, "Wheat"); }), ErrorCode::kUnknownCommodity);
}

TEST(Pairing, TiesBrokenByCausationThenOrder) {
  RelationMatrix m;
  m.commodities = {"c"};
  m.indices = {"a", "b", "d"};
  m.correlation.resize(1, 3);
  m.correlation << 0.5, -0.5, 0.5;
  m.causation.resize(1, 3);
  m.causation << 1.0, 2.0, 2.0;
  m.causation_p = Eigen::MatrixXd::Ones(1, 3);
  const auto p = pair_features(m, "c");
  EXPECT_EQ(p.corr_index, "b");
  EXPECT_EQ(p.caus_index, "b");
  EXPECT_TRUE(p.merged);
}

TEST(Pairing, InvariantUnderMonotoneCausationRescale) {
  auto m = table_rows();
  const auto before = pair_features(m, "Milk");
  m.causation = (m.causation.array() * 7.0 + 1.0).log();
  const auto after = pair_features(m, "Milk");
  EXPECT_EQ(before.caus_index, after.caus_index);
  EXPECT_EQ(before.corr_index, after.corr_index);
}

TEST(RelationMatrix, ShapesRangesAndCsv) {
  MonthlyPanel panel;
  for (int i = 0; i < 60; ++i) panel.months.push_back(add_months(parse_date("2000-01-01"), i));
  for (const char* name : {"i1", "i2", "i3"}) panel.columns.push_back({name, noise(60, panel.columns.size() + 1), "native"});
  const auto base = panel.column("i2").values;
  const auto eps = noise(60, 41);
  std::vector<double> c1(60, 0.0);
  for (std::size_t t = 1; t < 60; ++t) c1[t] = 2.0 * base[t - 1] + 0.05 * static_cast<double>(t) + 0.3 * eps[t];
  panel.columns.push_back({"c1", c1, "native"});
  panel.columns.push_back({"c2", noise(60, 40), "native"});

  const auto m = build_relation_matrix(panel, {"c1", "c2"}, {"i1", "i2", "i3"});
  ASSERT_EQ(m.correlation.rows(), 2);
  ASSERT_EQ(m.correlation.cols(), 3);
  ASSERT_EQ(m.causation.rows(), 2);
  ASSERT_EQ(m.causation.cols(), 3);
  EXPECT_TRUE((m.correlation.array().abs() <= 1.0).all());
  EXPECT_TRUE((m.causation.array() >= 0.0).all());
  EXPECT_EQ(pair_features(m, "c1").caus_index, "i2");

  const auto diff = build_relation_matrix(panel, {"c1"}, {"i1", "i2", "i3"}, {3, true});
  EXPECT_EQ(pair_features(diff, "c1").caus_index, "i2");

  const auto dir = std::filesystem::temp_directory_path() / "agshock_relations";
  std::filesystem::remove_all(dir);
  write_relation_csvs(dir, m);
  const auto corr = parse_csv_table(read_text_file(dir / "correlation.csv"));
  EXPECT_EQ(corr.header, (std::vector<std::string>{"commodity", "i1", "i2", "i3"}));
  EXPECT_EQ(corr.rows.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "causation.csv"));

  std::vector<PairingResult> pairs{pair_features(m, "c1"), pair_features(m, "c2")};
  write_pairing_csv(dir / "pairing.csv", pairs);
  const auto back = read_pairing_csv(dir / "pairing.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(back[k].commodity, pairs[k].commodity);
    EXPECT_EQ(back[k].corr_index, pairs[k].corr_index);
    EXPECT_EQ(back[k].caus_index, pairs[k].caus_index);
    EXPECT_EQ(back[k].merged, pairs[k].merged);
    EXPECT_NEAR(back[k].corr_value, pairs[k].corr_value, 1e-11);
  }
  std::filesystem::remove_all(dir);
}
