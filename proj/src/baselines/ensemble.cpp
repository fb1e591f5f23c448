#include <algorithm>
#include <cmath>
#include <numeric>

#include "agshock/baselines.hpp"
#include "agshock/error.hpp"

namespace agshock {

Eigen::VectorXd ForestModel::predict(const Eigen::MatrixXd& X) const {
  if (trees.empty()) throw Error(ErrorCode::kInvalidConfig, "empty forest");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.rows());
  for (const auto& tree : trees) sum += tree.predict(X);
  return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestConfig& config) {
  if (config.n_trees < 1) throw Error(ErrorCode::kInvalidConfig, "n_trees must be >= 1");
  const auto n = static_cast<std::size_t>(X.rows());
  const auto d = static_cast<std::size_t>(X.cols());
  if (d == 0) throw Error(ErrorCode::kInvalidConfig, "no features");
  const std::size_t mtry = config.feature_subsample.value_or((d + 2) / 3);
  if (mtry < 1 || mtry > d) throw Error(ErrorCode::kInvalidConfig, "feature_subsample out of range");
  if (n < 2 * std::max<std::size_t>(1, config.tree.min_leaf)) {
    throw Error(ErrorCode::kInsufficientSamples, std::to_string(n) + " samples");
  }

  ForestModel forest;
  forest.feature_subsample = mtry;
  forest.bootstrap = config.bootstrap;
  TreeConfig tree_config = config.tree;
  tree_config.max_features = mtry;
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    const std::uint64_t seed = derive_seed(config.seed, t);
    Rng rng(seed);
    std::vector<std::size_t> rows(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
      std::sort(rows.begin(), rows.end());
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees.push_back(fit_tree_on_rows(X, y, std::move(rows), tree_config, &rng));
    forest.tree_seeds.push_back(seed);
  }
  return forest;
}

Eigen::VectorXd GbtModel::predict(const Eigen::MatrixXd& X, std::optional<std::size_t> rounds) const {
  const std::size_t used = std::min(rounds.value_or(trees.size()), trees.size());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), initial_prediction);
  for (std::size_t r = 0; r < used; ++r) out += learning_rate * trees[r].predict(X);
  return out;
}

GbtModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbtConfig& config) {
  if (X.rows() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "X rows != y length");
  if (X.rows() < 1) throw Error(ErrorCode::kInsufficientSamples, "empty training set");
  if (!(config.learning_rate > 0.0 && config.learning_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be in (0, 1]");
  }
  if (config.max_depth < 1) throw Error(ErrorCode::kInvalidConfig, "max_depth must be >= 1");

  GbtModel model;
  model.learning_rate = config.learning_rate;
  model.seed = config.seed;
  model.initial_prediction = y.mean();
  Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), model.initial_prediction);
  model.loss_trace.push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));

  TreeConfig tree_config;
  tree_config.max_depth = config.max_depth;
  tree_config.min_leaf = config.min_leaf;
  for (std::size_t round = 0; round < config.rounds; ++round) {
    const Eigen::VectorXd residual = y - fitted;
    RegressionTree tree = fit_tree(X, residual, tree_config);
    fitted += config.learning_rate * tree.predict(X);
    model.trees.push_back(std::move(tree));
    model.loss_trace.push_back((y - fitted).squaredNorm() / static_cast<double>(y.size()));
  }
  return model;
}

}  // namespace agshock
