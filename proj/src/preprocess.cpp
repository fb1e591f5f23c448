#include "agshock/preprocess.hpp"

#include <algorithm>
#include <sstream>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"

namespace agshock {

ScalerParams fit_minmax(std::span<const double> series) {
  if (series.size() < 2) throw Error(ErrorCode::kTooFewPoints, "fit_minmax needs >= 2 values");
  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (!(*hi > *lo)) throw Error(ErrorCode::kConstantSeries, "max == min");
  return ScalerParams{*lo, *hi};
}

std::vector<double> transform_minmax(std::span<const double> x, const ScalerParams& p) {
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), [&](double v) { return p.transform(v); });
  return out;
}

std::vector<double> inverse_minmax(std::span<const double> y, const ScalerParams& p) {
  std::vector<double> out(y.size());
  std::transform(y.begin(), y.end(), out.begin(), [&](double v) { return p.inverse(v); });
  return out;
}

std::vector<double> double_rolling_aggregate(std::span<const double> series, std::size_t window) {
  if (window == 0) throw Error(ErrorCode::kInvalidConfig, "window must be >= 1");
  if (series.size() < 2 * window) {
    throw Error(ErrorCode::kSeriesTooShort,
                "need >= " + std::to_string(2 * window) + " points, got " +
                    std::to_string(series.size()));
  }
  const std::size_t n = series.size();
  std::vector<double> out(n, kMissing);
  const double w = static_cast<double>(window);
  // Window sums are recomputed per position; prefix sums drift on long
  // series with large levels.
  for (std::size_t t = window; t + window <= n; ++t) {
    double left = 0.0;
    double right = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
      left += series[t - window + k];
      right += series[t + k];
    }
    out[t] = right / w - left / w;
  }
  return out;
}

std::size_t split_point(std::size_t rows, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "split fraction must be in (0, 1]");
  }
  return static_cast<std::size_t>(std::floor(static_cast<double>(rows) * fraction));
}

WindowedDataset make_windows(const Eigen::MatrixXd& features, std::span<const double> target,
                             std::size_t lookback, std::size_t horizon,
                             std::vector<std::string> feature_names) {
  if (lookback == 0 || horizon == 0) {
    throw Error(ErrorCode::kInvalidConfig, "lookback and horizon must be >= 1");
  }
  const auto rows = static_cast<std::size_t>(features.rows());
  if (target.size() != rows) {
    throw Error(ErrorCode::kDimensionMismatch, "target length differs from feature rows");
  }
  if (feature_names.size() != static_cast<std::size_t>(features.cols())) {
    throw Error(ErrorCode::kDimensionMismatch, "feature name count differs from columns");
  }
  if (rows < lookback + horizon) {
    throw Error(ErrorCode::kInsufficientLength,
                std::to_string(rows) + " rows < lookback + horizon = " +
                    std::to_string(lookback + horizon));
  }
  WindowedDataset data;
  data.lookback = lookback;
  data.horizon = horizon;
  data.feature_names = std::move(feature_names);
  const std::size_t count = window_count(rows, lookback, horizon);
  data.inputs.reserve(count);
  data.targets.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    data.inputs.emplace_back(features.middleRows(static_cast<Eigen::Index>(t),
                                                 static_cast<Eigen::Index>(lookback)));
    Eigen::VectorXd y(static_cast<Eigen::Index>(horizon));
    for (std::size_t h = 0; h < horizon; ++h) y(static_cast<Eigen::Index>(h)) = target[t + lookback + h];
    data.targets.push_back(std::move(y));
    data.start_rows.push_back(t);
  }
  return data;
}

WindowedDataset make_windows(const MonthlyPanel& panel, const std::vector<std::string>& features,
                             const std::string& target, std::size_t lookback, std::size_t horizon) {
  if (!panel.has_column(target)) throw Error(ErrorCode::kMissingColumn, target);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(panel.rows()),
                    static_cast<Eigen::Index>(features.size()));
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& col = panel.column(features[f]).values;
    for (std::size_t r = 0; r < panel.rows(); ++r) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = col[r];
    }
  }
  return make_windows(x, panel.column(target).values, lookback, horizon, features);
}

void write_windows_csv(const std::filesystem::path& path, const WindowedDataset& data) {
  std::ostringstream out;
  out << "window_id,row,feature,value\n";
  for (std::size_t w = 0; w < data.size(); ++w) {
    const auto& m = data.inputs[w];
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index f = 0; f < m.cols(); ++f) {
        out << w << ',' << data.start_rows[w] + static_cast<std::size_t>(r) << ','
            << data.feature_names[static_cast<std::size_t>(f)] << ',' << format_number(m(r, f))
            << '\n';
      }
    }
  }
  write_text_file(path, out.str());
}

}  // namespace agshock
