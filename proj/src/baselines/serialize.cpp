#include "agshock/baselines.hpp"
#include "agshock/error.hpp"

namespace agshock {

namespace {

constexpr int kModelVersion = 1;

nlohmann::json envelope(const char* kind, nlohmann::json body) {
  body["format"] = std::string("agshock.baseline.") + kind;
  body["version"] = kModelVersion;
  return body;
}

}  // namespace

nlohmann::json RegressionTree::to_json() const {
  std::vector<int> feature, left, right;
  std::vector<double> threshold, value;
  std::vector<std::size_t> samples;
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    samples.push_back(n.samples);
  }
  return {{"n_features", n_features_}, {"feature", feature}, {"threshold", threshold},
          {"left", left},             {"right", right},     {"value", value},
          {"samples", samples}};
}

RegressionTree RegressionTree::from_json(const nlohmann::json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  const auto samples = j.at("samples").get<std::vector<std::size_t>>();
  std::vector<Node> nodes(feature.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i] = Node{feature.at(i), threshold.at(i), left.at(i), right.at(i), value.at(i), samples.at(i)};
  }
  if (nodes.empty()) throw Error(ErrorCode::kFormatError, "tree has no nodes");
  return RegressionTree(std::move(nodes), j.at("n_features").get<std::size_t>());
}

std::size_t input_dimension(const BaselineModel& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return m.n_inputs;
        } else if constexpr (std::is_same_v<T, RegressionTree>) {
          return m.n_features();
        } else {
          return m.trees.empty() ? 0 : m.trees.front().n_features();
        }
      },
      model);
}

Eigen::VectorXd predict(const BaselineModel& model, const Eigen::MatrixXd& X) {
  const std::size_t d = input_dimension(model);
  if (d != 0 && static_cast<std::size_t>(X.cols()) != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model expects " + std::to_string(d) + " features, got " + std::to_string(X.cols()));
  }
  Eigen::VectorXd out = std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(X); }, model);
  if (!out.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "non-finite prediction");
  return out;
}

nlohmann::json to_json(const BaselineModel& model) {
  return std::visit(
      [](const auto& m) -> nlohmann::json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return envelope("linear", {{"degree", m.degree},
                                        {"n_inputs", m.n_inputs},
                                        {"coefficients", std::vector<double>(m.coefficients.begin(), m.coefficients.end())},
                                        {"intercept", m.intercept},
                                        {"rank_deficient", m.rank_deficient}});
        } else if constexpr (std::is_same_v<T, RegressionTree>) {
          return envelope("tree", {{"tree", m.to_json()}});
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : m.trees) trees.push_back(t.to_json());
          return envelope("forest", {{"feature_subsample", m.feature_subsample},
                                        {"bootstrap", m.bootstrap},
                                        {"tree_seeds", m.tree_seeds},
                                        {"trees", std::move(trees)}});
        } else {
          nlohmann::json trees = nlohmann::json::array();
          for (const auto& t : m.trees) trees.push_back(t.to_json());
          return envelope("gbt", {{"initial_prediction", m.initial_prediction},
                                     {"learning_rate", m.learning_rate},
                                     {"seed", m.seed},
                                     {"loss_trace", m.loss_trace},
                                     {"trees", std::move(trees)}});
        }
      },
      model);
}

BaselineModel baseline_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion) {
      throw Error(ErrorCode::kFormatError, "unsupported baseline model version");
    }
    const auto format = j.at("format").get<std::string>();
    if (format == "agshock.baseline.linear") {
      LinearModel m;
      m.degree = j.at("degree").get<int>();
      m.n_inputs = j.at("n_inputs").get<std::size_t>();
      const auto c = j.at("coefficients").get<std::vector<double>>();
      m.coefficients = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
      m.intercept = j.at("intercept").get<double>();
      m.rank_deficient = j.at("rank_deficient").get<bool>();
      return m;
    }
    if (format == "agshock.baseline.tree") return RegressionTree::from_json(j.at("tree"));
    if (format == "agshock.baseline.forest") {
      ForestModel m;
      m.feature_subsample = j.at("feature_subsample").get<std::size_t>();
      m.bootstrap = j.at("bootstrap").get<bool>();
      m.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
      for (const auto& t : j.at("trees")) m.trees.push_back(RegressionTree::from_json(t));
      return m;
    }
    if (format == "agshock.baseline.gbt") {
      GbtModel m;
      m.initial_prediction = j.at("initial_prediction").get<double>();
      m.learning_rate = j.at("learning_rate").get<double>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.loss_trace = j.at("loss_trace").get<std::vector<double>>();
      for (const auto& t : j.at("trees")) m.trees.push_back(RegressionTree::from_json(t));
      return m;
    }
    throw Error(ErrorCode::kFormatError, "unknown baseline format '" + format + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

RegressionDataset build_regression_dataset(const MonthlyPanel& panel, const std::string& commodity,
                                           const std::vector<std::string>& indices,
                                           std::size_t lags) {
  const auto& target = panel.column(commodity).values;
  if (panel.rows() <= lags + 1) {
    throw Error(ErrorCode::kInsufficientSamples, "panel shorter than production lags");
  }
  RegressionDataset data;
  for (const auto& name : indices) data.feature_names.push_back(name);
  for (std::size_t k = 1; k <= lags; ++k) {
    data.feature_names.push_back(commodity + "_lag" + std::to_string(k));
  }
  const auto n = static_cast<Eigen::Index>(panel.rows() - lags);
  data.X.resize(n, static_cast<Eigen::Index>(data.feature_names.size()));
  data.y.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t t = static_cast<std::size_t>(r) + lags;
    Eigen::Index c = 0;
    for (const auto& name : indices) data.X(r, c++) = panel.column(name).values[t];
    for (std::size_t k = 1; k <= lags; ++k) data.X(r, c++) = target[t - k];
    data.y(r) = target[t];
    data.rows.push_back(t);
  }
  return data;
}

}  // namespace agshock
