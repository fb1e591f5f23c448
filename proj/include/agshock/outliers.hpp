#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "agshock/dataio.hpp"

namespace agshock {

struct QuartileSummary {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
};

// Linear interpolation at rank (n-1)·p over the sorted values.
double percentile(std::span<const double> sorted, double p);
QuartileSummary quartiles(std::span<const double> series);

inline constexpr double kMinContamination = 0.001;
inline constexpr double kMaxContamination = 0.5;

// Fraction of non-missing points outside [q1 - k·iqr, q3 + k·iqr], clamped to
// [0.001, 0.5]. Missing (NaN) entries are ignored.
double contamination_from_iqr(std::span<const double> change_signal, double fence_k = 1.5);

// Expected unsuccessful-search path length in a random BST built from m-1
// keys, i.e. the mean external path length of a tree with m leaves.
double average_path_length(std::size_t m);
double harmonic_number(std::size_t k);

class IsolationTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::size_t size = 0;
  };

  IsolationTree() = default;
  explicit IsolationTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  // Edges from the root to the terminal node plus c(size) for the leaf.
  double path_length(std::span<const double> x) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;

 private:
  std::vector<Node> nodes_;
};

struct IsolationForestConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> subsample;  // default min(256, n)
  double contamination = 0.1;
  std::uint64_t seed = 0;
};

class IsolationForestModel {
 public:
  static IsolationForestModel fit(const Eigen::MatrixXd& data, const IsolationForestConfig& config);

  double score(std::span<const double> x) const;
  std::vector<double> score_rows(const Eigen::MatrixXd& data) const;
  double mean_path_length(std::span<const double> x) const;

  // Anomalous iff score > threshold; ties at the threshold are not flagged.
  bool is_outlier(double score) const { return score > threshold_; }

  const std::vector<IsolationTree>& trees() const { return trees_; }
  std::size_t subsample_size() const { return subsample_; }
  std::size_t n_features() const { return n_features_; }
  std::size_t height_limit() const { return height_limit_; }
  double contamination() const { return contamination_; }
  double threshold() const { return threshold_; }
  std::uint64_t seed() const { return seed_; }

  nlohmann::json to_json() const;
  static IsolationForestModel from_json(const nlohmann::json& j);

 private:
  std::vector<IsolationTree> trees_;
  std::size_t subsample_ = 0;
  std::size_t n_features_ = 0;
  std::size_t height_limit_ = 0;
  double contamination_ = 0.1;
  double threshold_ = 1.0;
  std::uint64_t seed_ = 0;
};

// s = 2^(-E(h)/c(m)).
double anomaly_score_from_path(double mean_path, std::size_t subsample);
double anomaly_score(const IsolationForestModel& model, std::span<const double> x);

// Score cutoff that flags the ceil(contamination·n) highest scores, except
// that a run of ties straddling the cutoff is left unflagged.
double threshold_for_contamination(std::span<const double> scores, double contamination);

struct OutlierFlags {
  std::vector<double> scores;  // NaN where the signal is missing
  std::vector<int> flags;
  std::vector<Date> dates;

  std::size_t flag_count() const;
};

// Scores a 1-D change signal. Missing entries get flag 0 and a missing score.
OutlierFlags flag_series(const IsolationForestModel& model, std::span<const double> change_signal,
                         std::vector<Date> dates = {});

// Columns month,score,flag.
void write_flags_csv(const std::filesystem::path& path, const OutlierFlags& flags);
OutlierFlags read_flags_csv(const std::filesystem::path& path);

}  // namespace agshock
