#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agshock/dataio.hpp"

namespace agshock {

// Missing positions in derived signals are quiet NaNs.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

struct ScalerParams {
  double x_min = 0.0;
  double x_max = 1.0;

  double transform(double x) const { return (x - x_min) / (x_max - x_min); }
  double inverse(double y) const { return x_min + y * (x_max - x_min); }
};

ScalerParams fit_minmax(std::span<const double> series);
std::vector<double> transform_minmax(std::span<const double> x, const ScalerParams& p);
std::vector<double> inverse_minmax(std::span<const double> y, const ScalerParams& p);

// output[t] = mean(series[t, t+w)) - mean(series[t-w, t)) for w <= t <= T-w;
// other positions are missing.
std::vector<double> double_rolling_aggregate(std::span<const double> series, std::size_t window);

// Number of training rows in a chronological split: floor(T·fraction).
std::size_t split_point(std::size_t rows, double fraction);

struct WindowedDataset {
  std::vector<Eigen::MatrixXd> inputs;   // each lookback × features
  std::vector<Eigen::VectorXd> targets;  // each horizon
  std::vector<std::size_t> start_rows;   // first input row of each window
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::vector<std::string> feature_names;

  std::size_t size() const { return inputs.size(); }
  std::size_t feature_count() const { return feature_names.size(); }
};

inline std::size_t window_count(std::size_t rows, std::size_t lookback, std::size_t horizon) {
  return rows + 1 < lookback + horizon + 1 ? 0 : rows - lookback - horizon + 1;
}

// Stride-1 windows: inputs rows [t, t+L), target rows [t+L, t+L+H).
WindowedDataset make_windows(const Eigen::MatrixXd& features, std::span<const double> target,
                             std::size_t lookback, std::size_t horizon,
                             std::vector<std::string> feature_names);
WindowedDataset make_windows(const MonthlyPanel& panel, const std::vector<std::string>& features,
                             const std::string& target, std::size_t lookback, std::size_t horizon);

// Debug export with columns window_id,row,feature,value.
void write_windows_csv(const std::filesystem::path& path, const WindowedDataset& data);

}  // namespace agshock
