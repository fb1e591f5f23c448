#include "agshock/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agshock/error.hpp"
#include "agshock/rng.hpp"

namespace agshock {

namespace {

constexpr int kModelVersion = 1;
constexpr const char* kModelFormat = "agshock.lstm";

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  return 1.0 / (1.0 + (-a).exp());
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorCode::kNonFiniteValue, what);
}

}  // namespace

LstmCellParams LstmCellParams::zeros(std::size_t hidden, std::size_t inputs) {
  LstmCellParams p;
  p.w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(4 * hidden),
                              static_cast<Eigen::Index>(hidden + inputs));
  p.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(4 * hidden));
  return p;
}

LstmState LstmState::zeros(std::size_t hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  return {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(h)};
}

CellStep cell_forward(const LstmCellParams& params, const Eigen::VectorXd& x, const LstmState& prev) {
  const auto hidden = static_cast<Eigen::Index>(params.hidden());
  if (x.size() != static_cast<Eigen::Index>(params.inputs()) || prev.h.size() != hidden ||
      prev.c.size() != hidden) {
    throw Error(ErrorCode::kDimensionMismatch, "cell_forward input/state shape");
  }
  Eigen::VectorXd z(params.w.cols());
  z << prev.h, x;
  const Eigen::VectorXd a = params.w * z + params.b;

  CellStep step;
  step.gates.input = sigmoid(a.segment(0, hidden).array()).matrix();
  step.gates.forget = sigmoid(a.segment(hidden, hidden).array()).matrix();
  step.gates.output = sigmoid(a.segment(2 * hidden, hidden).array()).matrix();
  step.gates.candidate = a.segment(3 * hidden, hidden).array().tanh().matrix();
  step.state.c = step.gates.forget.cwiseProduct(prev.c) +
                 step.gates.input.cwiseProduct(step.gates.candidate);
  step.state.h = step.gates.output.cwiseProduct(step.state.c.array().tanh().matrix());
  return step;
}

LstmModel LstmModel::initialize(std::size_t n_features, std::size_t hidden, std::size_t lookback,
                                std::size_t horizon, std::uint64_t seed) {
  if (n_features < 1 || hidden < 1 || lookback < 1 || horizon < 1) {
    throw Error(ErrorCode::kInvalidConfig, "LSTM sizes must be >= 1");
  }
  LstmModel model;
  model.lookback = lookback;
  model.horizon = horizon;
  model.cell = LstmCellParams::zeros(hidden, n_features);
  const auto h = static_cast<Eigen::Index>(hidden);
  model.head_w.resize(static_cast<Eigen::Index>(horizon), h);
  model.head_b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(horizon));

  Rng rng(seed);
  const double gate_bound = 1.0 / std::sqrt(static_cast<double>(hidden + n_features));
  std::uniform_real_distribution<double> gate_init(-gate_bound, gate_bound);
  for (Eigen::Index c = 0; c < model.cell.w.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.cell.w.rows(); ++r) model.cell.w(r, c) = gate_init(rng);
  }
  model.cell.gate_b(LstmCellParams::kForget).setOnes();

  const double head_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> head_init(-head_bound, head_bound);
  for (Eigen::Index c = 0; c < model.head_w.cols(); ++c) {
    for (Eigen::Index r = 0; r < model.head_w.rows(); ++r) model.head_w(r, c) = head_init(rng);
  }
  model.feature_names.resize(n_features);
  model.feature_scalers.resize(n_features);
  return model;
}

SequenceBatch make_batch(const WindowedDataset& data, const std::vector<std::size_t>& which) {
  SequenceBatch batch;
  const auto b = static_cast<Eigen::Index>(which.size());
  const auto f = static_cast<Eigen::Index>(data.feature_count());
  batch.steps.assign(data.lookback, Eigen::MatrixXd(f, b));
  batch.targets.resize(static_cast<Eigen::Index>(data.horizon), b);
  for (Eigen::Index k = 0; k < b; ++k) {
    const std::size_t w = which[static_cast<std::size_t>(k)];
    const auto& in = data.inputs.at(w);
    for (std::size_t t = 0; t < data.lookback; ++t) {
      batch.steps[t].col(k) = in.row(static_cast<Eigen::Index>(t)).transpose();
    }
    batch.targets.col(k) = data.targets.at(w);
  }
  return batch;
}

SequenceBatch make_batch(const WindowedDataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return make_batch(data, all);
}

SequenceOutput forward_batch(const LstmModel& model, const SequenceBatch& batch) {
  const auto hidden = static_cast<Eigen::Index>(model.hidden());
  const auto features = static_cast<Eigen::Index>(model.n_features());
  const Eigen::Index b = batch.size();
  if (batch.steps.size() != model.lookback) {
    throw Error(ErrorCode::kDimensionMismatch, "batch has " + std::to_string(batch.steps.size()) +
                                                   " steps, model lookback is " +
                                                   std::to_string(model.lookback));
  }
  SequenceOutput out;
  SequenceCache& cache = out.cache;
  const std::size_t steps = batch.steps.size();
  cache.z.reserve(steps);
  cache.gates.reserve(steps);
  cache.c.reserve(steps + 1);
  cache.tanh_c.reserve(steps);
  cache.h.reserve(steps + 1);
  cache.c.push_back(Eigen::MatrixXd::Zero(hidden, b));
  cache.h.push_back(Eigen::MatrixXd::Zero(hidden, b));

  for (std::size_t t = 0; t < steps; ++t) {
    const Eigen::MatrixXd& x = batch.steps[t];
    if (x.rows() != features || x.cols() != b) {
      throw Error(ErrorCode::kDimensionMismatch, "batch step shape");
    }
    Eigen::MatrixXd z(hidden + features, b);
    z.topRows(hidden) = cache.h.back();
    z.bottomRows(features) = x;
    Eigen::MatrixXd a = model.cell.w * z;
    a.colwise() += model.cell.b;
    a.topRows(3 * hidden) = sigmoid(a.topRows(3 * hidden).array()).matrix();
    a.bottomRows(hidden) = a.bottomRows(hidden).array().tanh().matrix();

    Eigen::MatrixXd c = a.middleRows(hidden, hidden).cwiseProduct(cache.c.back()) +
                        a.topRows(hidden).cwiseProduct(a.bottomRows(hidden));
    Eigen::MatrixXd tc = c.array().tanh().matrix();
    Eigen::MatrixXd h = a.middleRows(2 * hidden, hidden).cwiseProduct(tc);

    cache.z.push_back(std::move(z));
    cache.gates.push_back(std::move(a));
    cache.c.push_back(std::move(c));
    cache.tanh_c.push_back(std::move(tc));
    cache.h.push_back(std::move(h));
  }
  out.prediction = model.head_w * cache.h.back();
  out.prediction.colwise() += model.head_b;
  return out;
}

SequenceOutput forward_sequence(const LstmModel& model, const Eigen::MatrixXd& window) {
  if (window.rows() != static_cast<Eigen::Index>(model.lookback) ||
      window.cols() != static_cast<Eigen::Index>(model.n_features())) {
    throw Error(ErrorCode::kDimensionMismatch,
                "window must be " + std::to_string(model.lookback) + "x" +
                    std::to_string(model.n_features()));
  }
  SequenceBatch batch;
  for (Eigen::Index t = 0; t < window.rows(); ++t) batch.steps.emplace_back(window.row(t).transpose());
  return forward_batch(model, batch);
}

LossAndGradients loss_and_gradients(const LstmModel& model, const SequenceBatch& batch) {
  const auto hidden = static_cast<Eigen::Index>(model.hidden());
  if (batch.size() == 0) throw Error(ErrorCode::kEmptyDataset, "empty batch");
  if (batch.targets.rows() != static_cast<Eigen::Index>(model.horizon)) {
    throw Error(ErrorCode::kDimensionMismatch, "target horizon differs from model horizon");
  }
  const SequenceOutput fwd = forward_batch(model, batch);
  const SequenceCache& cache = fwd.cache;
  const Eigen::MatrixXd err = fwd.prediction - batch.targets;
  const double count = static_cast<double>(err.size());

  LossAndGradients out;
  out.loss = err.squaredNorm() / count;
  LstmGradients& g = out.gradients;
  const Eigen::MatrixXd d_pred = (2.0 / count) * err;
  g.head_w = d_pred * cache.h.back().transpose();
  g.head_b = d_pred.rowwise().sum();
  g.w = Eigen::MatrixXd::Zero(model.cell.w.rows(), model.cell.w.cols());
  g.b = Eigen::VectorXd::Zero(model.cell.b.size());

  Eigen::MatrixXd d_h = model.head_w.transpose() * d_pred;
  Eigen::MatrixXd d_c = Eigen::MatrixXd::Zero(hidden, batch.size());
  Eigen::MatrixXd d_a(4 * hidden, batch.size());
  for (std::size_t t = cache.gates.size(); t-- > 0;) {
    const Eigen::MatrixXd& a = cache.gates[t];
    const auto i = a.topRows(hidden).array();
    const auto f = a.middleRows(hidden, hidden).array();
    const auto o = a.middleRows(2 * hidden, hidden).array();
    const auto cand = a.bottomRows(hidden).array();
    const auto tc = cache.tanh_c[t].array();

    d_c.array() += d_h.array() * o * (1.0 - tc.square());
    d_a.topRows(hidden) = (d_c.array() * cand * i * (1.0 - i)).matrix();
    d_a.middleRows(hidden, hidden) = (d_c.array() * cache.c[t].array() * f * (1.0 - f)).matrix();
    d_a.middleRows(2 * hidden, hidden) = (d_h.array() * tc * o * (1.0 - o)).matrix();
    d_a.bottomRows(hidden) = (d_c.array() * i * (1.0 - cand.square())).matrix();

    g.w.noalias() += d_a * cache.z[t].transpose();
    g.b += d_a.rowwise().sum();
    d_h.noalias() = model.cell.w.leftCols(hidden).transpose() * d_a;
    d_c.array() *= f;
  }
  return out;
}

double batch_loss(const LstmModel& model, const SequenceBatch& batch) {
  const SequenceOutput fwd = forward_batch(model, batch);
  return (fwd.prediction - batch.targets).squaredNorm() / static_cast<double>(batch.targets.size());
}

namespace {

// Adam moments for one parameter tensor.
struct AdamSlot {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

template <typename Param, typename Grad>
void adam_step(Param&& param, Grad&& grad, AdamSlot& slot, const LstmTrainConfig& cfg, double bc1,
               double bc2) {
  if (cfg.gradient_clip > 0.0) {
    const double norm = grad.norm();
    if (norm > cfg.gradient_clip) grad *= cfg.gradient_clip / norm;
  }
  slot.m = cfg.beta1 * slot.m + (1.0 - cfg.beta1) * grad;
  slot.v = cfg.beta2 * slot.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  param.array() -= cfg.learning_rate * (slot.m.array() / bc1) /
                   ((slot.v.array() / bc2).sqrt() + cfg.epsilon);
}

}  // namespace

TrainResult train(LstmModel model, const WindowedDataset& data, const LstmTrainConfig& config) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "no training windows");
  if (data.lookback != model.lookback || data.horizon != model.horizon ||
      data.feature_count() != model.n_features()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset shape differs from model");
  }
  if (!(config.learning_rate >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "negative learning rate");
  model.train_config = config;

  const std::size_t n = data.size();
  const std::size_t batch_size = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  const auto hidden = static_cast<Eigen::Index>(model.hidden());

  // Slots: one per gate weight block, one per gate bias block, head weight, head bias.
  std::vector<AdamSlot> slots;
  for (int gate = 0; gate < 4; ++gate) {
    slots.push_back({Eigen::MatrixXd::Zero(hidden, model.cell.w.cols()),
                     Eigen::MatrixXd::Zero(hidden, model.cell.w.cols())});
  }
  for (int gate = 0; gate < 4; ++gate) {
    slots.push_back({Eigen::MatrixXd::Zero(hidden, 1), Eigen::MatrixXd::Zero(hidden, 1)});
  }
  slots.push_back({Eigen::MatrixXd::Zero(model.head_w.rows(), model.head_w.cols()),
                   Eigen::MatrixXd::Zero(model.head_w.rows(), model.head_w.cols())});
  slots.push_back({Eigen::MatrixXd::Zero(model.head_b.size(), 1),
                   Eigen::MatrixXd::Zero(model.head_b.size(), 1)});

  std::vector<SequenceBatch> full;
  if (batch_size == n) full.push_back(make_batch(data));

  TrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch_size < n) {
      Rng rng(derive_seed(config.seed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const SequenceBatch* batch = nullptr;
      SequenceBatch mini;
      if (batch_size == n) {
        batch = &full.front();
      } else {
        const std::size_t end = std::min(start + batch_size, n);
        mini = make_batch(data, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                         order.begin() + static_cast<std::ptrdiff_t>(end)));
        batch = &mini;
      }
      LossAndGradients lg = loss_and_gradients(model, *batch);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::kNonFiniteLoss, "loss diverged at epoch " + std::to_string(epoch));
      }
      epoch_loss += lg.loss;
      ++batches;

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      LstmGradients& g = lg.gradients;
      for (int gate = 0; gate < 4; ++gate) {
        const auto g_id = static_cast<LstmCellParams::Gate>(gate);
        Eigen::MatrixXd gw = g.w.middleRows(gate * hidden, hidden);
        adam_step(model.cell.gate_w(g_id), gw, slots[static_cast<std::size_t>(gate)], config, bc1, bc2);
        Eigen::MatrixXd gb = g.b.segment(gate * hidden, hidden);
        adam_step(model.cell.gate_b(g_id), gb, slots[4 + static_cast<std::size_t>(gate)], config, bc1, bc2);
      }
      adam_step(model.head_w, g.head_w, slots[8], config, bc1, bc2);
      Eigen::MatrixXd ghb = g.head_b;
      adam_step(model.head_b, ghb, slots[9], config, bc1, bc2);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
  }
  result.model = std::move(model);
  return result;
}

// ----------------------------------------------------------------------

std::string_view to_string(Variant v) {
  return v == Variant::kWithOutliers ? "with_outliers" : "without_outliers";
}

Variant parse_variant(std::string_view text) {
  if (text == "with" || text == "with_outliers") return Variant::kWithOutliers;
  if (text == "without" || text == "without_outliers") return Variant::kWithoutOutliers;
  throw Error(ErrorCode::kConfigError, "unknown variant '" + std::string(text) + "'");
}

namespace {

// Flag columns can be all-zero over the training rows; they pass through
// unscaled instead of failing the fit.
ScalerParams fit_feature_scaler(std::span<const double> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*hi > *lo) return ScalerParams{*lo, *hi};
  return ScalerParams{*lo, *lo + 1.0};
}

struct VariantColumns {
  std::vector<std::size_t> keep;
  std::size_t target = 0;
};

VariantColumns select_columns(const ForecastInput& input, Variant variant) {
  VariantColumns out;
  bool found = false;
  for (std::size_t c = 0; c < static_cast<std::size_t>(input.features.cols()); ++c) {
    const bool is_flag = std::find(input.outlier_columns.begin(), input.outlier_columns.end(), c) !=
                         input.outlier_columns.end();
    if (is_flag && variant == Variant::kWithoutOutliers) continue;
    if (c == input.target_column) {
      out.target = out.keep.size();
      found = true;
    }
    out.keep.push_back(c);
  }
  if (!found) throw Error(ErrorCode::kInvalidConfig, "target column is excluded or out of range");
  return out;
}

Eigen::MatrixXd scale_rows(const LstmModel& model, const Eigen::MatrixXd& raw) {
  Eigen::MatrixXd scaled(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const auto& s = model.feature_scalers[static_cast<std::size_t>(c)];
    scaled.col(c) = ((raw.col(c).array() - s.x_min) / (s.x_max - s.x_min)).matrix();
  }
  return scaled;
}

}  // namespace

ForecastResult forecast(const LstmModel& model, const Eigen::MatrixXd& tail, Variant variant) {
  if (tail.rows() < static_cast<Eigen::Index>(model.lookback)) {
    throw Error(ErrorCode::kInsufficientHistory,
                std::to_string(tail.rows()) + " rows < lookback " + std::to_string(model.lookback));
  }
  if (tail.cols() != static_cast<Eigen::Index>(model.n_features())) {
    throw Error(ErrorCode::kDimensionMismatch, "tail feature count differs from model");
  }
  const Eigen::MatrixXd window =
      scale_rows(model, tail.bottomRows(static_cast<Eigen::Index>(model.lookback)));
  const SequenceOutput out = forward_sequence(model, window);
  ForecastResult result;
  result.variant = variant;
  result.forecast.resize(model.horizon);
  for (std::size_t k = 0; k < model.horizon; ++k) {
    result.forecast[k] = model.target_scaler.inverse(out.prediction(static_cast<Eigen::Index>(k), 0));
  }
  return result;
}

LstmExperiment run_lstm_experiment(const ForecastInput& input, Variant variant,
                                   const ExperimentConfig& config) {
  const auto rows = static_cast<std::size_t>(input.features.rows());
  if (input.feature_names.size() != static_cast<std::size_t>(input.features.cols())) {
    throw Error(ErrorCode::kDimensionMismatch, "feature names differ from columns");
  }
  require_finite(input.features, "LSTM input features");
  const std::size_t L = config.lookback;
  const std::size_t H = config.horizon;
  const std::size_t split = split_point(rows, config.split_fraction);
  if (split < L + H) {
    throw Error(ErrorCode::kInsufficientHistory,
                "training split of " + std::to_string(split) + " rows < lookback + horizon");
  }
  if (rows - split < H) {
    throw Error(ErrorCode::kInsufficientHistory, "test split shorter than the horizon");
  }

  const VariantColumns cols = select_columns(input, variant);
  Eigen::MatrixXd raw(input.features.rows(), static_cast<Eigen::Index>(cols.keep.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < cols.keep.size(); ++k) {
    raw.col(static_cast<Eigen::Index>(k)) = input.features.col(static_cast<Eigen::Index>(cols.keep[k]));
    names.push_back(input.feature_names[cols.keep[k]]);
  }

  LstmModel model = LstmModel::initialize(cols.keep.size(), config.hidden, L, H, config.train.seed);
  model.feature_names = names;
  model.target_feature = cols.target;
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const Eigen::VectorXd train_part = raw.col(c).head(static_cast<Eigen::Index>(split));
    model.feature_scalers[static_cast<std::size_t>(c)] =
        fit_feature_scaler({train_part.data(), static_cast<std::size_t>(train_part.size())});
  }
  model.target_scaler = model.feature_scalers[cols.target];

  const Eigen::MatrixXd scaled = scale_rows(model, raw);
  const Eigen::VectorXd target = scaled.col(static_cast<Eigen::Index>(cols.target));
  const WindowedDataset all = make_windows(
      scaled, std::span<const double>(target.data(), static_cast<std::size_t>(target.size())), L, H, names);

  WindowedDataset train_set;
  train_set.lookback = L;
  train_set.horizon = H;
  train_set.feature_names = names;
  std::vector<std::size_t> test_windows;
  for (std::size_t w = 0; w < all.size(); ++w) {
    const std::size_t t = all.start_rows[w];
    if (t + L + H <= split) {
      train_set.inputs.push_back(all.inputs[w]);
      train_set.targets.push_back(all.targets[w]);
      train_set.start_rows.push_back(t);
    } else if (t + L >= split) {
      test_windows.push_back(w);
    }
  }

  TrainResult trained = train(std::move(model), train_set, config.train);
  LstmExperiment exp;
  exp.model = std::move(trained.model);
  const LstmModel& fitted = exp.model;

  ForecastResult& result = exp.result;
  result.variant = variant;
  result.loss_trace = std::move(trained.loss_trace);

  const SequenceBatch test_batch = make_batch(all, test_windows);
  const Eigen::MatrixXd test_pred = forward_batch(fitted, test_batch).prediction;
  result.rmse_scaled = std::sqrt((test_pred - test_batch.targets).squaredNorm() /
                                 static_cast<double>(test_pred.size()));
  result.rmse_units = result.rmse_scaled * (fitted.target_scaler.x_max - fitted.target_scaler.x_min);
  const double ss_tot = (test_batch.targets.array() - test_batch.targets.mean()).square().sum();
  if (ss_tot > 0.0) result.r2 = 1.0 - (test_pred - test_batch.targets).squaredNorm() / ss_tot;

  // One-step-ahead fit for every row that has a full lookback behind it.
  result.history_fit.assign(rows, kMissing);
  SequenceBatch history;
  const std::size_t n_hist = rows - L;
  history.steps.assign(L, Eigen::MatrixXd(scaled.cols(), static_cast<Eigen::Index>(n_hist)));
  history.targets = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(H), static_cast<Eigen::Index>(n_hist));
  for (std::size_t t = 0; t < n_hist; ++t) {
    for (std::size_t s = 0; s < L; ++s) {
      history.steps[s].col(static_cast<Eigen::Index>(t)) =
          scaled.row(static_cast<Eigen::Index>(t + s)).transpose();
    }
  }
  const Eigen::MatrixXd hist_pred = forward_batch(fitted, history).prediction;
  for (std::size_t t = 0; t < n_hist; ++t) {
    result.history_fit[t + L] = fitted.target_scaler.inverse(hist_pred(0, static_cast<Eigen::Index>(t)));
  }

  result.forecast = forecast(fitted, raw, variant).forecast;
  return exp;
}

// ----------------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw Error(ErrorCode::kFormatError, "matrix data length mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

nlohmann::json scaler_to_json(const ScalerParams& s) { return {{"x_min", s.x_min}, {"x_max", s.x_max}}; }
ScalerParams scaler_from_json(const nlohmann::json& j) {
  return {j.at("x_min").get<double>(), j.at("x_max").get<double>()};
}

}  // namespace

nlohmann::json LstmModel::to_json() const {
  nlohmann::json scalers = nlohmann::json::array();
  for (const auto& s : feature_scalers) scalers.push_back(scaler_to_json(s));
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"hidden", hidden()},
          {"n_features", n_features()},
          {"lookback", lookback},
          {"horizon", horizon},
          {"feature_names", feature_names},
          {"target_feature", target_feature},
          {"gate_order", {"input", "forget", "output", "candidate"}},
          {"w", matrix_to_json(cell.w)},
          {"b", matrix_to_json(cell.b)},
          {"head_w", matrix_to_json(head_w)},
          {"head_b", matrix_to_json(head_b)},
          {"feature_scalers", scalers},
          {"target_scaler", scaler_to_json(target_scaler)},
          {"train_config",
           {{"epochs", train_config.epochs},
            {"learning_rate", train_config.learning_rate},
            {"batch_size", train_config.batch_size},
            {"seed", train_config.seed},
            {"gradient_clip", train_config.gradient_clip},
            {"beta1", train_config.beta1},
            {"beta2", train_config.beta2},
            {"epsilon", train_config.epsilon}}}};
}

LstmModel LstmModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat || j.at("version").get<int>() != kModelVersion) {
      throw Error(ErrorCode::kFormatError, "not an LSTM model v1");
    }
    LstmModel m;
    m.lookback = j.at("lookback").get<std::size_t>();
    m.horizon = j.at("horizon").get<std::size_t>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.target_feature = j.at("target_feature").get<std::size_t>();
    m.cell.w = matrix_from_json(j.at("w"));
    m.cell.b = matrix_from_json(j.at("b"));
    m.head_w = matrix_from_json(j.at("head_w"));
    m.head_b = matrix_from_json(j.at("head_b"));
    for (const auto& s : j.at("feature_scalers")) m.feature_scalers.push_back(scaler_from_json(s));
    m.target_scaler = scaler_from_json(j.at("target_scaler"));
    const auto& tc = j.at("train_config");
    m.train_config.epochs = tc.at("epochs").get<std::size_t>();
    m.train_config.learning_rate = tc.at("learning_rate").get<double>();
    m.train_config.batch_size = tc.at("batch_size").get<std::size_t>();
    m.train_config.seed = tc.at("seed").get<std::uint64_t>();
    m.train_config.gradient_clip = tc.at("gradient_clip").get<double>();
    m.train_config.beta1 = tc.at("beta1").get<double>();
    m.train_config.beta2 = tc.at("beta2").get<double>();
    m.train_config.epsilon = tc.at("epsilon").get<double>();
    const auto hidden = j.at("hidden").get<Eigen::Index>();
    const auto n_features = j.at("n_features").get<Eigen::Index>();
    if (m.cell.w.rows() != 4 * hidden || m.cell.w.cols() != hidden + n_features ||
        m.cell.b.size() != 4 * hidden || m.head_w.rows() != static_cast<Eigen::Index>(m.horizon) ||
        m.head_w.cols() != hidden || m.head_b.size() != static_cast<Eigen::Index>(m.horizon) ||
        m.feature_scalers.size() != static_cast<std::size_t>(n_features)) {
      throw Error(ErrorCode::kFormatError, "LSTM model shapes are inconsistent");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

}  // namespace agshock
