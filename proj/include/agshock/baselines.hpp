#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "agshock/dataio.hpp"
#include "agshock/rng.hpp"

namespace agshock {

struct RegressionDataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> rows;  // panel row of each sample
};

// Features at month t: each paired index value at t, then production at
// t-1 .. t-lags. Target: production at t.
RegressionDataset build_regression_dataset(const MonthlyPanel& panel, const std::string& commodity,
                                           const std::vector<std::string>& indices,
                                           std::size_t lags = 3);

// ---------------------------------------------------------------- linear

// Degree 1 returns X; degree 2 appends every square and pairwise product
// (x_i·x_j for i <= j).
Eigen::MatrixXd polynomial_features(const Eigen::MatrixXd& X, int degree);

struct LinearModel {
  int degree = 1;
  std::size_t n_inputs = 0;
  Eigen::VectorXd coefficients;  // over the expanded features
  double intercept = 0.0;
  bool rank_deficient = false;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

// Least squares; a rank-deficient design falls back to normal equations with a
// ridge of `ridge` on every non-intercept term.
LinearModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int degree = 1,
                       double ridge = 1e-8);

// ---------------------------------------------------------------- CART

inline constexpr std::size_t kUnlimitedDepth = std::numeric_limits<std::size_t>::max();

struct TreeConfig {
  std::size_t max_depth = kUnlimitedDepth;
  std::size_t min_leaf = 5;
  // Features examined per node; 0 means all. Subsets are drawn per node.
  std::size_t max_features = 0;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target of the node's samples
    std::size_t samples = 0;
  };

  RegressionTree() = default;
  RegressionTree(std::vector<Node> nodes, std::size_t n_features)
      : nodes_(std::move(nodes)), n_features_(n_features) {}

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t leaf_count() const;

  nlohmann::json to_json() const;
  static RegressionTree from_json(const nlohmann::json& j);

 private:
  std::vector<Node> nodes_;
  std::size_t n_features_ = 0;
};

// Greedy CART on squared error. Candidate thresholds are midpoints between
// consecutive distinct sorted values; among equal gains the lowest feature,
// then the lowest threshold, wins.
RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const TreeConfig& config = {});
// Same, restricted to `rows` (duplicates allowed, as in a bootstrap sample).
// `rng` is required when config.max_features selects a strict subset.
RegressionTree fit_tree_on_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                std::vector<std::size_t> rows, const TreeConfig& config,
                                Rng* rng = nullptr);

// ---------------------------------------------------------------- forest

struct ForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> feature_subsample;  // default ceil(d/3)
  bool bootstrap = true;
  TreeConfig tree;
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::size_t feature_subsample = 0;
  bool bootstrap = true;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

ForestModel fit_forest(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const ForestConfig& config = {});

// ---------------------------------------------------------------- boosting

struct GbtConfig {
  std::size_t rounds = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 3;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
};

struct GbtModel {
  double initial_prediction = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  std::vector<double> loss_trace;  // training MSE after 0..rounds trees
  std::uint64_t seed = 0;

  // Uses the first `rounds` trees (all by default).
  Eigen::VectorXd predict(const Eigen::MatrixXd& X,
                          std::optional<std::size_t> rounds = std::nullopt) const;
};

GbtModel fit_gbt(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbtConfig& config = {});

// ---------------------------------------------------------------- common

using BaselineModel = std::variant<LinearModel, RegressionTree, ForestModel, GbtModel>;

std::size_t input_dimension(const BaselineModel& model);
Eigen::VectorXd predict(const BaselineModel& model, const Eigen::MatrixXd& X);

nlohmann::json to_json(const BaselineModel& model);
BaselineModel baseline_from_json(const nlohmann::json& j);

// The five baseline families, in reporting order.
inline const std::vector<std::string>& baseline_names() {
  static const std::vector<std::string> names = {"linear", "poly2", "tree", "forest", "gbt"};
  return names;
}

}  // namespace agshock
