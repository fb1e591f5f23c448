#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "agshock/error.hpp"
#include "agshock/lstm.hpp"

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

WindowedDataset random_windows(std::size_t n, std::size_t L, std::size_t F, std::size_t H, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  WindowedDataset d;
  d.lookback = L;
  d.horizon = H;
  for (std::size_t f = 0; f < F; ++f) d.feature_names.push_back("f" + std::to_string(f));
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(F));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    Eigen::VectorXd y(static_cast<Eigen::Index>(H));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = u(rng);
    d.inputs.push_back(x);
    d.targets.push_back(y);
    d.start_rows.push_back(k);
  }
  return d;
}

WindowedDataset sine_windows(std::size_t L, std::size_t H) {
  Eigen::MatrixXd f(120, 1);
  std::vector<double> target(120);
  for (int t = 0; t < 120; ++t) {
    f(t, 0) = 0.5 + 0.4 * std::sin(2.0 * M_PI * t / 12.0);
    target[static_cast<std::size_t>(t)] = f(t, 0);
  }
  return make_windows(f, target, L, H, {"s"});
}

}  // namespace

TEST(Cell, ZeroParametersFromZeroState) {
  const auto p = LstmCellParams::zeros(3, 2);
  const auto step = cell_forward(p, Eigen::VectorXd::Constant(2, 0.7), LstmState::zeros(3));
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_EQ(step.gates.input(j), 0.5);
    EXPECT_EQ(step.gates.forget(j), 0.5);
    EXPECT_EQ(step.gates.output(j), 0.5);
    EXPECT_EQ(step.gates.candidate(j), 0.0);
    EXPECT_EQ(step.state.c(j), 0.0);
    EXPECT_EQ(step.state.h(j), 0.0);
  }
}

TEST(Cell, ZeroParametersCarryHalfTheCell) {
  const auto p = LstmCellParams::zeros(2, 1);
  LstmState prev = LstmState::zeros(2);
  prev.c << 1.2, -3.0;
  const auto step = cell_forward(p, Eigen::VectorXd::Zero(1), prev);
  for (Eigen::Index j = 0; j < 2; ++j) {
    EXPECT_DOUBLE_EQ(step.state.c(j), 0.5 * prev.c(j));
    EXPECT_DOUBLE_EQ(step.state.h(j), 0.5 * std::tanh(0.5 * prev.c(j)));
  }
}

TEST(Cell, MatchesScalarOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t hidden = trial < 50 ? 1 : 1 + static_cast<std::size_t>(trial % 4);
    const std::size_t inputs = trial < 50 ? 1 : 1 + static_cast<std::size_t>(trial % 3);
    auto p = LstmCellParams::zeros(hidden, inputs);
    for (Eigen::Index i = 0; i < p.w.size(); ++i) p.w.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < p.b.size(); ++i) p.b(i) = u(rng);
    LstmState prev = LstmState::zeros(hidden);
    for (Eigen::Index j = 0; j < prev.h.size(); ++j) {
      prev.h(j) = std::tanh(u(rng));
      prev.c(j) = u(rng);
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(inputs));
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = u(rng);
    const auto fast = cell_forward(p, x, prev).state;
    const auto slow = oracle::scalar_cell(p, x, prev);
    EXPECT_LT((fast.h - slow.h).cwiseAbs().maxCoeff(), 1e-12) << trial;
    EXPECT_LT((fast.c - slow.c).cwiseAbs().maxCoeff(), 1e-12) << trial;
  }
}

TEST(Cell, DimensionMismatch) {
  const auto p = LstmCellParams::zeros(2, 3);
  EXPECT_EQ(code_of([&] { cell_forward(p, Eigen::VectorXd::Zero(2), LstmState::zeros(2)); }),
            ErrorCode::kDimensionMismatch);
}

TEST(Model, InitializationRanges) {
  const auto m = LstmModel::initialize(3, 8, 5, 4, 42);
  const double bound = 1.0 / std::sqrt(8.0 + 3.0);
  EXPECT_LE(m.cell.w.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(m.cell.gate_b(LstmCellParams::kForget), Eigen::VectorXd::Ones(8));
  EXPECT_EQ(m.cell.gate_b(LstmCellParams::kInput), Eigen::VectorXd::Zero(8));
  EXPECT_EQ(m.head_w.rows(), 4);
  EXPECT_EQ(m.head_w.cols(), 8);
  EXPECT_EQ(LstmModel::initialize(3, 8, 5, 4, 42).to_json(), m.to_json());
}

TEST(Model, SingleStepUnrollIsCellPlusHead) {
  const auto m = LstmModel::initialize(2, 4, 1, 3, 7);
  Eigen::MatrixXd window(1, 2);
  window << 0.3, -0.8;
  const auto out = forward_sequence(m, window);
  const auto step = cell_forward(m.cell, window.row(0).transpose(), LstmState::zeros(4));
  const Eigen::VectorXd expected = m.head_w * step.state.h + m.head_b;
  EXPECT_LT((out.prediction.col(0) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Model, ForwardIsBoundedAndDeterministic) {
  const auto m = LstmModel::initialize(2, 6, 10, 3, 9);
  const auto data = random_windows(5, 10, 2, 3, 1);
  const auto batch = make_batch(data);
  const auto a = forward_batch(m, batch);
  const auto b = forward_batch(m, batch);
  EXPECT_EQ(a.prediction, b.prediction);
  for (const auto& h : a.cache.h) EXPECT_LT(h.cwiseAbs().maxCoeff(), 1.0);
  for (const auto& g : a.cache.gates) {
    const auto sig = g.topRows(3 * 6);
    EXPECT_GT(sig.minCoeff(), 0.0);
    EXPECT_LT(sig.maxCoeff(), 1.0);
    EXPECT_LT(g.bottomRows(6).cwiseAbs().maxCoeff(), 1.0);
  }
  const auto single = forward_sequence(m, data.inputs[2]);
  EXPECT_LT((single.prediction.col(0) - a.prediction.col(2)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gradients, MatchCentralDifferences) {
  const auto start = std::chrono::steady_clock::now();
  const auto m = LstmModel::initialize(2, 2, 3, 2, 5);
  const auto batch = make_batch(random_windows(4, 3, 2, 2, 6));
  const auto check = oracle::finite_difference_check(m, batch, 1e-5);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(check.parameters, 4u * 2u * 4u + 8u + 2u * 2u + 2u);
  EXPECT_LT(check.max_relative_error, 1e-4);
  EXPECT_LT(seconds, 5.0);
}

TEST(Gradients, MatchOnLargerModel) {
  auto m = LstmModel::initialize(3, 5, 6, 4, 11);
  const auto batch = make_batch(random_windows(7, 6, 3, 4, 12));
  EXPECT_LT(oracle::finite_difference_check(m, batch, 1e-5).max_relative_error, 1e-4);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto data = sine_windows(12, 3);
  const auto m = LstmModel::initialize(1, 4, 12, 3, 1);
  LstmTrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 0.0;
  const auto result = train(m, data, cfg);
  EXPECT_EQ(result.model.cell.w, m.cell.w);
  EXPECT_EQ(result.model.head_w, m.head_w);
  for (double l : result.loss_trace) EXPECT_EQ(l, result.loss_trace.front());
}

TEST(Train, SineLossDropsTenfold) {
  const auto data = sine_windows(12, 3);
  LstmTrainConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 0.01;
  cfg.seed = 3;
  const auto result = train(LstmModel::initialize(1, 8, 12, 3, 3), data, cfg);
  ASSERT_EQ(result.loss_trace.size(), 200u);
  EXPECT_LT(result.loss_trace.back(), 0.1 * result.loss_trace.front());
}

TEST(Train, BitReproducible) {
  const auto data = sine_windows(6, 2);
  LstmTrainConfig cfg;
  cfg.epochs = 15;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 16;
  cfg.seed = 99;
  const auto a = train(LstmModel::initialize(1, 5, 6, 2, 4), data, cfg);
  const auto b = train(LstmModel::initialize(1, 5, 6, 2, 4), data, cfg);
  EXPECT_EQ(a.model.to_json().dump(), b.model.to_json().dump());
  EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Train, Errors) {
  WindowedDataset empty;
  empty.lookback = 3;
  empty.horizon = 2;
  empty.feature_names = {"a"};
  EXPECT_EQ(code_of([&] { train(LstmModel::initialize(1, 2, 3, 2, 0), empty, {}); }), ErrorCode::kEmptyDataset);
  const auto data = random_windows(4, 3, 1, 2, 0);
  EXPECT_EQ(code_of([&] { train(LstmModel::initialize(2, 2, 3, 2, 0), data, {}); }), ErrorCode::kDimensionMismatch);
  LstmTrainConfig wild;
  wild.epochs = 50;
  wild.learning_rate = 1e300;
  wild.gradient_clip = 1e300;
  auto big = data;
  for (auto& y : big.targets) y.array() += 1e200;
  EXPECT_EQ(code_of([&] { train(LstmModel::initialize(1, 2, 3, 2, 0), big, wild); }), ErrorCode::kNonFiniteLoss);
}

TEST(Model, JsonRoundTrip) {
  auto m = LstmModel::initialize(2, 3, 4, 2, 8);
  m.feature_names = {"corn", "flag"};
  m.feature_scalers = {{1.0, 5.0}, {0.0, 1.0}};
  m.target_scaler = {1.0, 5.0};
  const auto back = LstmModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.cell.w, m.cell.w);
  EXPECT_EQ(code_of([] { LstmModel::from_json(nlohmann::json{{"format", "x"}}); }), ErrorCode::kFormatError);
}

TEST(Experiment, VariantsShapesAndBookkeeping) {
  const std::size_t rows = 100;
  Eigen::MatrixXd features(rows, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(rows); ++t) {
    features(t, 0) = 50.0 + 0.2 * static_cast<double>(t) + z(rng);
    features(t, 1) = 10.0 + z(rng);
    features(t, 2) = t % 17 == 0 ? 1.0 : 0.0;
  }
  ForecastInput input{features, {"target", "idx", "outlier_idx"}, 0, {2}};
  ExperimentConfig cfg;
  cfg.lookback = 8;
  cfg.horizon = 4;
  cfg.hidden = 4;
  cfg.train.epochs = 5;
  cfg.train.learning_rate = 0.01;
  for (Variant v : {Variant::kWithOutliers, Variant::kWithoutOutliers}) {
    const auto exp = run_lstm_experiment(input, v, cfg);
    EXPECT_EQ(exp.model.n_features(), v == Variant::kWithOutliers ? 3u : 2u);
    EXPECT_EQ(exp.result.forecast.size(), 4u);
    for (double f : exp.result.forecast) EXPECT_TRUE(std::isfinite(f));
    EXPECT_GE(exp.result.rmse_scaled, 0.0);
    EXPECT_EQ(exp.result.history_fit.size(), rows);
    EXPECT_TRUE(is_missing(exp.result.history_fit[7]));
    EXPECT_FALSE(is_missing(exp.result.history_fit[8]));
    EXPECT_EQ(exp.result.loss_trace.size(), 5u);
    const auto again = forecast(exp.model, v == Variant::kWithOutliers ? features : features.leftCols(2), v);
    EXPECT_EQ(again.forecast, exp.result.forecast);
  }
  EXPECT_EQ(parse_variant("with"), Variant::kWithOutliers);
  EXPECT_EQ(parse_variant("without_outliers"), Variant::kWithoutOutliers);
  EXPECT_EQ(code_of([] { parse_variant("maybe"); }), ErrorCode::kConfigError);
  const auto exp = run_lstm_experiment(input, Variant::kWithOutliers, cfg);
  EXPECT_EQ(code_of([&] { forecast(exp.model, features.topRows(7), Variant::kWithOutliers); }),
            ErrorCode::kInsufficientHistory);
  cfg.lookback = 70;
  cfg.horizon = 11;
  EXPECT_EQ(code_of([&] { run_lstm_experiment(input, Variant::kWithOutliers, cfg); }),
            ErrorCode::kInsufficientHistory);
}

TEST(Experiment, ContinuesNoiselessTrend) {
  const Eigen::Index rows = 120;
  Eigen::MatrixXd features(rows, 1);
  for (Eigen::Index t = 0; t < rows; ++t) features(t, 0) = 100.0 + static_cast<double>(t);
  ForecastInput input{features, {"target"}, 0, {}};
  ExperimentConfig cfg;
  cfg.lookback = 12;
  cfg.horizon = 6;
  cfg.hidden = 8;
  cfg.split_fraction = 0.9;
  cfg.train.epochs = 800;
  cfg.train.learning_rate = 0.01;
  cfg.train.seed = 2;
  const auto exp = run_lstm_experiment(input, Variant::kWithoutOutliers, cfg);
  for (std::size_t k = 0; k < 6; ++k) {
    const double truth = 100.0 + static_cast<double>(rows) + static_cast<double>(k);
    EXPECT_NEAR(exp.result.forecast[k] / truth, 1.0, 0.05) << k;
  }
}
