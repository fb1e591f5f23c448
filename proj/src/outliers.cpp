#include "agshock/outliers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"
#include "agshock/preprocess.hpp"
#include "agshock/rng.hpp"

namespace agshock {

namespace {

constexpr int kModelVersion = 1;
constexpr const char* kModelFormat = "agshock.isolation_forest";

std::vector<double> finite_values(std::span<const double> v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) {
    if (!is_missing(x)) out.push_back(x);
  }
  return out;
}

}  // namespace

double percentile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kTooFewPoints, "percentile of empty data");
  const double rank = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

QuartileSummary quartiles(std::span<const double> series) {
  if (series.size() < 4) throw Error(ErrorCode::kTooFewPoints, "quartiles need >= 4 points");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  QuartileSummary q;
  q.q1 = percentile(sorted, 0.25);
  q.q3 = percentile(sorted, 0.75);
  q.iqr = q.q3 - q.q1;
  return q;
}

double contamination_from_iqr(std::span<const double> change_signal, double fence_k) {
  const auto values = finite_values(change_signal);
  const QuartileSummary q = quartiles(values);
  const double lo = q.q1 - fence_k * q.iqr;
  const double hi = q.q3 + fence_k * q.iqr;
  const auto outside = std::count_if(values.begin(), values.end(),
                                     [&](double v) { return v < lo || v > hi; });
  const double fraction = static_cast<double>(outside) / static_cast<double>(values.size());
  return std::clamp(fraction, kMinContamination, kMaxContamination);
}

double harmonic_number(std::size_t k) {
  // Exact below the asymptotic regime; the log form is off by ~1/(2k).
  if (k <= 4096) {
    double h = 0.0;
    for (std::size_t i = k; i >= 1; --i) h += 1.0 / static_cast<double>(i);
    return h;
  }
  constexpr double kEulerGamma = 0.57721566490153286061;
  const double x = static_cast<double>(k);
  return std::log(x) + kEulerGamma + 1.0 / (2.0 * x) - 1.0 / (12.0 * x * x);
}

double average_path_length(std::size_t m) {
  if (m <= 1) return 0.0;
  if (m == 2) return 1.0;
  const double mm = static_cast<double>(m);
  return 2.0 * harmonic_number(m - 1) - 2.0 * (mm - 1.0) / mm;
}

double IsolationTree::path_length(std::span<const double> x) const {
  int idx = 0;
  double edges = 0.0;
  while (true) {
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.feature < 0) return edges + average_path_length(n.size);
    idx = x[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right;
    edges += 1.0;
  }
}

std::size_t IsolationTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    const auto [idx, d] = stack.back();
    stack.pop_back();
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    best = std::max(best, d);
    if (n.feature >= 0) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& data, std::size_t height_limit, Rng& rng)
      : data_(data), height_limit_(height_limit), rng_(rng) {}

  std::vector<IsolationTree::Node> build(std::vector<Eigen::Index> rows) {
    nodes_.clear();
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::span<Eigen::Index> rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(IsolationTree::Node{-1, 0.0, -1, -1, rows.size()});
    if (depth >= height_limit_ || rows.size() <= 1) return id;

    // Features that still vary inside this node.
    std::vector<std::pair<int, std::pair<double, double>>> candidates;
    for (Eigen::Index f = 0; f < data_.cols(); ++f) {
      double lo = data_(rows[0], f);
      double hi = lo;
      for (auto r : rows) {
        lo = std::min(lo, data_(r, f));
        hi = std::max(hi, data_(r, f));
      }
      if (hi > lo) candidates.push_back({static_cast<int>(f), {lo, hi}});
    }
    if (candidates.empty()) return id;

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const auto& [feature, range] = candidates[pick(rng_)];
    std::uniform_real_distribution<double> between(range.first, range.second);
    double split = between(rng_);
    while (!(split > range.first && split < range.second)) split = between(rng_);

    const auto mid = std::partition(rows.begin(), rows.end(), [&](Eigen::Index r) {
      return data_(r, feature) < split;
    });
    const auto n_left = static_cast<std::size_t>(mid - rows.begin());
    nodes_[static_cast<std::size_t>(id)].feature = feature;
    nodes_[static_cast<std::size_t>(id)].split = split;
    const int left = grow(rows.subspan(0, n_left), depth + 1);
    const int right = grow(rows.subspan(n_left), depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  const Eigen::MatrixXd& data_;
  std::size_t height_limit_;
  Rng& rng_;
  std::vector<IsolationTree::Node> nodes_;
};

}  // namespace

IsolationForestModel IsolationForestModel::fit(const Eigen::MatrixXd& data,
                                               const IsolationForestConfig& config) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (n < 8) throw Error(ErrorCode::kInvalidConfig, "isolation forest needs >= 8 rows");
  if (data.cols() < 1) throw Error(ErrorCode::kInvalidConfig, "no features");
  if (!data.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "isolation forest input");
  if (!(config.contamination > 0.0 && config.contamination <= 0.5)) {
    throw Error(ErrorCode::kInvalidConfig, "contamination must be in (0, 0.5]");
  }
  if (config.n_trees < 1) throw Error(ErrorCode::kInvalidConfig, "n_trees must be >= 1");
  const std::size_t m = config.subsample.value_or(std::min<std::size_t>(256, n));
  if (m < 2 || m > n) throw Error(ErrorCode::kInvalidConfig, "subsample must be in [2, n]");

  IsolationForestModel model;
  model.subsample_ = m;
  model.n_features_ = static_cast<std::size_t>(data.cols());
  model.height_limit_ = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(m))));
  model.contamination_ = config.contamination;
  model.seed_ = config.seed;
  model.trees_.reserve(config.n_trees);

  std::vector<Eigen::Index> all(n);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, t));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first m entries are a uniform subsample.
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    TreeBuilder builder(data, model.height_limit_, rng);
    model.trees_.emplace_back(builder.build({all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m)}));
  }

  const auto scores = model.score_rows(data);
  model.threshold_ = threshold_for_contamination(scores, config.contamination);
  return model;
}

double IsolationForestModel::mean_path_length(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(n_features_) +
                                                   " features, got " + std::to_string(x.size()));
  }
  double total = 0.0;
  for (const auto& tree : trees_) total += tree.path_length(x);
  return total / static_cast<double>(trees_.size());
}

double anomaly_score_from_path(double mean_path, std::size_t subsample) {
  return std::exp2(-mean_path / average_path_length(subsample));
}

double IsolationForestModel::score(std::span<const double> x) const {
  return anomaly_score_from_path(mean_path_length(x), subsample_);
}

double anomaly_score(const IsolationForestModel& model, std::span<const double> x) {
  return model.score(x);
}

std::vector<double> IsolationForestModel::score_rows(const Eigen::MatrixXd& data) const {
  std::vector<double> scores(static_cast<std::size_t>(data.rows()));
  std::vector<double> row(static_cast<std::size_t>(data.cols()));
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) row[static_cast<std::size_t>(c)] = data(r, c);
    scores[static_cast<std::size_t>(r)] = score(row);
  }
  return scores;
}

double threshold_for_contamination(std::span<const double> scores, double contamination) {
  if (scores.empty()) throw Error(ErrorCode::kEmpty, "no scores");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto n = sorted.size();
  auto k = static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  if (k >= n) return std::nextafter(sorted.back(), -1.0);
  return sorted[k];
}

nlohmann::json IsolationForestModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json t;
    std::vector<int> feature, left, right;
    std::vector<double> split;
    std::vector<std::size_t> size;
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      split.push_back(n.split);
      left.push_back(n.left);
      right.push_back(n.right);
      size.push_back(n.size);
    }
    t["feature"] = feature;
    t["split"] = split;
    t["left"] = left;
    t["right"] = right;
    t["size"] = size;
    trees.push_back(std::move(t));
  }
  return {{"format", kModelFormat},
          {"version", kModelVersion},
          {"n_features", n_features_},
          {"subsample", subsample_},
          {"height_limit", height_limit_},
          {"contamination", contamination_},
          {"threshold", threshold_},
          {"seed", seed_},
          {"trees", std::move(trees)}};
}

IsolationForestModel IsolationForestModel::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat ||
        j.at("version").get<int>() != kModelVersion) {
      throw Error(ErrorCode::kFormatError, "not an isolation forest model v1");
    }
    IsolationForestModel model;
    model.n_features_ = j.at("n_features").get<std::size_t>();
    model.subsample_ = j.at("subsample").get<std::size_t>();
    model.height_limit_ = j.at("height_limit").get<std::size_t>();
    model.contamination_ = j.at("contamination").get<double>();
    model.threshold_ = j.at("threshold").get<double>();
    model.seed_ = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto split = t.at("split").get<std::vector<double>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto size = t.at("size").get<std::vector<std::size_t>>();
      std::vector<IsolationTree::Node> nodes(feature.size());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = IsolationTree::Node{feature.at(i), split.at(i), left.at(i), right.at(i), size.at(i)};
      }
      model.trees_.emplace_back(std::move(nodes));
    }
    if (model.trees_.empty()) throw Error(ErrorCode::kFormatError, "model has no trees");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormatError, e.what());
  }
}

std::size_t OutlierFlags::flag_count() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), 1));
}

OutlierFlags flag_series(const IsolationForestModel& model, std::span<const double> change_signal,
                         std::vector<Date> dates) {
  if (model.n_features() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "flag_series expects a 1-feature model");
  }
  if (!dates.empty() && dates.size() != change_signal.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "dates and signal lengths differ");
  }
  OutlierFlags out;
  out.dates = std::move(dates);
  out.scores.resize(change_signal.size(), kMissing);
  out.flags.resize(change_signal.size(), 0);
  for (std::size_t t = 0; t < change_signal.size(); ++t) {
    if (is_missing(change_signal[t])) continue;
    const double x[1] = {change_signal[t]};
    out.scores[t] = model.score(x);
    out.flags[t] = model.is_outlier(out.scores[t]) ? 1 : 0;
  }
  return out;
}

void write_flags_csv(const std::filesystem::path& path, const OutlierFlags& flags) {
  std::ostringstream out;
  out << "month,score,flag\n";
  for (std::size_t t = 0; t < flags.flags.size(); ++t) {
    out << (flags.dates.empty() ? std::to_string(t) : format_date(flags.dates[t])) << ','
        << format_number(flags.scores[t]) << ',' << flags.flags[t] << '\n';
  }
  write_text_file(path, out.str());
}

OutlierFlags read_flags_csv(const std::filesystem::path& path) {
  const CsvTable table = parse_csv_table(read_text_file(path));
  const auto month = table.column_index("month");
  const auto score = table.column_index("score");
  const auto flag = table.column_index("flag");
  if (!month || !score || !flag) {
    throw Error(ErrorCode::kMissingColumn, path.string() + ": expected month,score,flag");
  }
  OutlierFlags out;
  for (const auto& row : table.rows) {
    if (row.size() < table.header.size()) throw Error(ErrorCode::kFormatError, path.string());
    out.dates.push_back(parse_date(row[*month]));
    out.scores.push_back(parse_double(row[*score]).value_or(kMissing));
    const auto f = parse_double(row[*flag]);
    if (!f) throw Error(ErrorCode::kFormatError, path.string() + ": bad flag");
    out.flags.push_back(*f != 0.0 ? 1 : 0);
  }
  return out;
}

}  // namespace agshock
