#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "agshock/preprocess.hpp"

namespace agshock {

// Gate weights act on the concatenation [h_{t-1}, x_t]. The four gates are
// stored stacked in row blocks: input, forget, output, candidate.
struct LstmCellParams {
  Eigen::MatrixXd w;  // 4·hidden × (hidden + inputs)
  Eigen::VectorXd b;  // 4·hidden

  enum Gate : int { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };

  static LstmCellParams zeros(std::size_t hidden, std::size_t inputs);

  std::size_t hidden() const { return static_cast<std::size_t>(b.size() / 4); }
  std::size_t inputs() const { return static_cast<std::size_t>(w.cols()) - hidden(); }

  auto gate_w(Gate g) { return w.middleRows(g * hidden_rows(), hidden_rows()); }
  auto gate_w(Gate g) const { return w.middleRows(g * hidden_rows(), hidden_rows()); }
  auto gate_b(Gate g) { return b.segment(g * hidden_rows(), hidden_rows()); }
  auto gate_b(Gate g) const { return b.segment(g * hidden_rows(), hidden_rows()); }

 private:
  Eigen::Index hidden_rows() const { return b.size() / 4; }
};

struct LstmState {
  Eigen::VectorXd h;
  Eigen::VectorXd c;

  static LstmState zeros(std::size_t hidden);
};

struct GateActivations {
  Eigen::VectorXd input;
  Eigen::VectorXd forget;
  Eigen::VectorXd output;
  Eigen::VectorXd candidate;
};

struct CellStep {
  LstmState state;
  GateActivations gates;
};

// i, f, o = σ(W·[h, x] + b); c̃ = tanh(W_c·[h, x] + b_c);
// c = f∘c_prev + i∘c̃; h = o∘tanh(c).
CellStep cell_forward(const LstmCellParams& params, const Eigen::VectorXd& x, const LstmState& prev);

struct LstmTrainConfig {
  std::size_t epochs = 150;
  double learning_rate = 1e-3;
  std::size_t batch_size = 0;  // 0 = full dataset
  std::uint64_t seed = 0;
  double gradient_clip = 5.0;  // max L2 norm per parameter tensor
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct LstmModel {
  LstmCellParams cell;
  Eigen::MatrixXd head_w;  // horizon × hidden
  Eigen::VectorXd head_b;  // horizon
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::vector<std::string> feature_names;
  std::vector<ScalerParams> feature_scalers;
  std::size_t target_feature = 0;
  ScalerParams target_scaler;
  LstmTrainConfig train_config;

  // Uniform(±1/sqrt(fan_in)) weights, forget-gate bias 1, other biases 0.
  static LstmModel initialize(std::size_t n_features, std::size_t hidden, std::size_t lookback,
                              std::size_t horizon, std::uint64_t seed);

  std::size_t hidden() const { return cell.hidden(); }
  std::size_t n_features() const { return cell.inputs(); }

  nlohmann::json to_json() const;
  static LstmModel from_json(const nlohmann::json& j);
};

// Per-time-step matrices (features × batch) plus targets (horizon × batch).
struct SequenceBatch {
  std::vector<Eigen::MatrixXd> steps;
  Eigen::MatrixXd targets;

  Eigen::Index size() const { return steps.empty() ? 0 : steps.front().cols(); }
};

SequenceBatch make_batch(const WindowedDataset& data, const std::vector<std::size_t>& which);
SequenceBatch make_batch(const WindowedDataset& data);

// Intermediate values of a batched forward pass, one entry per step.
struct SequenceCache {
  std::vector<Eigen::MatrixXd> z;       // [h_{t-1}; x_t]
  std::vector<Eigen::MatrixXd> gates;   // stacked activations i, f, o, c̃
  std::vector<Eigen::MatrixXd> c;       // c_t; c[0] is the zero initial state
  std::vector<Eigen::MatrixXd> tanh_c;  // tanh(c_t)
  std::vector<Eigen::MatrixXd> h;       // h_t; h[0] is the zero initial state
};

struct SequenceOutput {
  Eigen::MatrixXd prediction;  // horizon × batch
  SequenceCache cache;
};

// Unrolls the cell from a zero state over every step and applies the linear
// head to the final hidden state.
SequenceOutput forward_batch(const LstmModel& model, const SequenceBatch& batch);
// Single (scaled) lookback × features window.
SequenceOutput forward_sequence(const LstmModel& model, const Eigen::MatrixXd& window);

struct LstmGradients {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
  Eigen::MatrixXd head_w;
  Eigen::VectorXd head_b;
};

struct LossAndGradients {
  double loss = 0.0;  // mean squared error over batch × horizon
  LstmGradients gradients;
};

// Full backpropagation through time over all lookback steps.
LossAndGradients loss_and_gradients(const LstmModel& model, const SequenceBatch& batch);
double batch_loss(const LstmModel& model, const SequenceBatch& batch);

struct TrainResult {
  LstmModel model;
  std::vector<double> loss_trace;  // mean batch loss per epoch, before the epoch's updates
};

// Adam on the scaled-target MSE with per-tensor gradient clipping.
TrainResult train(LstmModel model, const WindowedDataset& data, const LstmTrainConfig& config);

// ----------------------------------------------------------------------
// Forecasting experiment

enum class Variant { kWithOutliers, kWithoutOutliers };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);

// Raw monthly feature matrix for one commodity.
struct ForecastInput {
  Eigen::MatrixXd features;  // rows × features, production units
  std::vector<std::string> feature_names;
  std::size_t target_column = 0;
  std::vector<std::size_t> outlier_columns;  // dropped for kWithoutOutliers
};

struct ExperimentConfig {
  std::size_t lookback = 60;
  std::size_t horizon = 30;
  std::size_t hidden = 64;
  double split_fraction = 0.8;
  LstmTrainConfig train;
};

struct ForecastResult {
  Variant variant = Variant::kWithOutliers;
  std::vector<double> history_fit;  // one-step-ahead fit per input row, NaN before lookback
  std::vector<double> forecast;     // horizon values after the last row, production units
  double rmse_scaled = kMissing;    // held-out test windows, scaled target space
  double rmse_units = kMissing;
  double r2 = kMissing;             // test windows, every horizon step; NaN if targets are constant
  std::vector<double> loss_trace;
};

struct LstmExperiment {
  LstmModel model;
  ForecastResult result;
};

// Fits scalers on the training rows, trains on windows whose targets end
// inside the training split, scores windows whose targets start after it,
// and forecasts `horizon` months past the last row.
LstmExperiment run_lstm_experiment(const ForecastInput& input, Variant variant,
                                   const ExperimentConfig& config);

// Direct multi-output forecast from the last `lookback` raw rows (columns in
// the model's feature order).
ForecastResult forecast(const LstmModel& model, const Eigen::MatrixXd& tail, Variant variant);

}  // namespace agshock
