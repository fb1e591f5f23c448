#include <algorithm>
#include <cmath>
#include <numeric>

#include "agshock/baselines.hpp"
#include "agshock/error.hpp"

namespace agshock {

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  std::size_t idx = 0;
  while (nodes_[idx].feature >= 0) {
    const Node& n = nodes_[idx];
    idx = static_cast<std::size_t>(x(n.feature) <= n.threshold ? n.left : n.right);
  }
  return nodes_[idx].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_features_) {
    throw Error(ErrorCode::kDimensionMismatch, "tree expects " + std::to_string(n_features_) +
                                                   " features, got " + std::to_string(X.cols()));
  }
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X.row(r));
  return out;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class CartBuilder {
 public:
  CartBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeConfig& config, Rng* rng)
      : X_(X), y_(y), config_(config), rng_(rng) {}

  std::vector<RegressionTree::Node> build(std::vector<std::size_t> rows) {
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  std::vector<int> candidate_features() {
    const auto d = static_cast<std::size_t>(X_.cols());
    std::vector<int> all(d);
    std::iota(all.begin(), all.end(), 0);
    if (config_.max_features == 0 || config_.max_features >= d) return all;
    for (std::size_t i = 0; i < config_.max_features; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(all[i], all[pick(*rng_)]);
    }
    all.resize(config_.max_features);
    std::sort(all.begin(), all.end());
    return all;
  }

  Split best_split(const std::vector<std::size_t>& rows, double mean) {
    const std::size_t n = rows.size();
    const std::size_t min_leaf = std::max<std::size_t>(1, config_.min_leaf);
    double sst = 0.0;
    for (auto r : rows) sst += (y_(static_cast<Eigen::Index>(r)) - mean) * (y_(static_cast<Eigen::Index>(r)) - mean);
    Split best;
    if (n < 2 * min_leaf || !(sst > 0.0)) return best;
    const double tol = 1e-12 * sst;

    std::vector<std::size_t> order(rows);
    for (int f : candidate_features()) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return X_(static_cast<Eigen::Index>(a), f) < X_(static_cast<Eigen::Index>(b), f);
      });
      // Sums of centred targets keep the gain free of cancellation.
      double total = 0.0;
      for (auto r : order) total += y_(static_cast<Eigen::Index>(r)) - mean;
      double left = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left += y_(static_cast<Eigen::Index>(order[i - 1])) - mean;
        if (i < min_leaf || n - i < min_leaf) continue;
        const double lo = X_(static_cast<Eigen::Index>(order[i - 1]), f);
        const double hi = X_(static_cast<Eigen::Index>(order[i]), f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i);
        const double nr = static_cast<double>(n - i);
        const double right = total - left;
        const double gain = left * left / nl + right * right / nr - total * total / static_cast<double>(n);
        if (gain > best.gain + tol) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;
          best = Split{f, threshold, gain};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t>& rows, std::size_t depth) {
    double sum = 0.0;
    for (auto r : rows) sum += y_(static_cast<Eigen::Index>(r));
    const double mean = sum / static_cast<double>(rows.size());
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(RegressionTree::Node{-1, 0.0, -1, -1, mean, rows.size()});
    if (depth >= config_.max_depth) return id;

    const Split split = best_split(rows, mean);
    if (split.feature < 0) return id;

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : rows) {
      (X_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[static_cast<std::size_t>(id)].feature = split.feature;
    nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
    const int left = grow(left_rows, depth + 1);
    const int right = grow(right_rows, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  TreeConfig config_;
  Rng* rng_;
  std::vector<RegressionTree::Node> nodes_;
};

}  // namespace

RegressionTree fit_tree_on_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                std::vector<std::size_t> rows, const TreeConfig& config, Rng* rng) {
  if (X.rows() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "X rows != y length");
  if (X.cols() < 1) throw Error(ErrorCode::kInvalidConfig, "no features");
  const std::size_t min_leaf = std::max<std::size_t>(1, config.min_leaf);
  if (rows.size() < 2 * min_leaf) {
    throw Error(ErrorCode::kInsufficientSamples,
                std::to_string(rows.size()) + " samples < 2·min_leaf = " + std::to_string(2 * min_leaf));
  }
  if (config.max_features != 0 && config.max_features < static_cast<std::size_t>(X.cols()) &&
      rng == nullptr) {
    throw Error(ErrorCode::kInvalidConfig, "feature subsampling needs an rng");
  }
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "tree fit input");
  CartBuilder builder(X, y, config, rng);
  return RegressionTree(builder.build(std::move(rows)), static_cast<std::size_t>(X.cols()));
}

RegressionTree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeConfig& config) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  TreeConfig all_features = config;
  all_features.max_features = 0;
  return fit_tree_on_rows(X, y, std::move(rows), all_features, nullptr);
}

}  // namespace agshock
