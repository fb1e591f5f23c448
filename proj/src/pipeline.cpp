#include "agshock/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <set>
#include <sstream>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"
#include "agshock/outliers.hpp"
#include "agshock/preprocess.hpp"
#include "agshock/report.hpp"
#include "agshock/rng.hpp"

namespace agshock {

namespace fs = std::filesystem;
using nlohmann::json;

// ================================================================ config

namespace {

enum SeedStream : std::uint64_t { kSyntheticStream = 1, kOutlierStream = 2, kBaselineStream = 3, kLstmStream = 4 };

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); }

// Reads one JSON object, remembering which keys were consumed so that
// misspelled keys are reported instead of silently ignored.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(where() + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      config_error(where(key) + " has the wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    if (j_.at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  void get_size(const char* key, std::size_t& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      config_error(where(key) + " must be a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void get_seed(const char* key, std::optional<std::uint64_t>& out) {
    used_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      config_error(where(key) + " must be a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) {
    used_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, where(key));
  }

  std::string string(const char* key, std::string fallback) {
    get(key, fallback);
    return fallback;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!used_.count(key)) config_error("unknown key " + where(key.c_str()));
    }
  }

 private:
  std::string where(const char* key = nullptr) const {
    std::string p = path_.empty() ? std::string("config") : path_;
    if (key) p += std::string(".") + key;
    return p;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::string_view to_string(OutlierFeatures f) { return f == OutlierFeatures::kAll ? "all" : "paired"; }

std::vector<Variant> parse_variant_list(const std::string& text) {
  if (text == "both") return {Variant::kWithOutliers, Variant::kWithoutOutliers};
  try {
    return {parse_variant(text)};
  } catch (const Error&) {
    config_error("lstm.variants must be with, without or both");
  }
}

std::string variant_list_name(const std::vector<Variant>& v) {
  if (v.size() == 2) return "both";
  return v.front() == Variant::kWithOutliers ? "with" : "without";
}

json depth_to_json(std::size_t depth) { return depth == kUnlimitedDepth ? json(nullptr) : json(depth); }

void read_depth(Section& s, const char* key, std::size_t& depth) {
  std::optional<std::size_t> d = depth == kUnlimitedDepth ? std::nullopt : std::optional(depth);
  s.get(key, d);
  depth = d.value_or(kUnlimitedDepth);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

std::uint64_t PipelineConfig::synthetic_seed() const {
  return synthetic.seed.value_or(derive_seed(seed, kSyntheticStream));
}
std::uint64_t PipelineConfig::outlier_seed() const {
  return outliers.seed.value_or(derive_seed(seed, kOutlierStream));
}
std::uint64_t PipelineConfig::baseline_seed() const {
  return baselines.seed.value_or(derive_seed(seed, kBaselineStream));
}
std::uint64_t PipelineConfig::lstm_seed() const { return lstm.seed.value_or(derive_seed(seed, kLstmStream)); }

void PipelineConfig::validate() const {
  if (data.source == DataSource::kCsv) {
    if (data.indices_dir.empty() || data.commodities_dir.empty()) {
      config_error("data.indices_dir and data.commodities_dir are required for csv input");
    }
    if (!fs::is_directory(data.indices_dir)) config_error("missing directory " + data.indices_dir.string());
    if (!fs::is_directory(data.commodities_dir)) {
      config_error("missing directory " + data.commodities_dir.string());
    }
  }
  if (data.lookback_days < 0) config_error("data.lookback_days must be >= 0");
  if (window < 1 || monthly_window < 1) config_error("preprocess windows must be >= 1");
  if (!(split_fraction > 0.5 && split_fraction < 0.95)) {
    config_error("preprocess.split_fraction must lie in (0.5, 0.95)");
  }
  if (outliers.n_trees < 1) config_error("outliers.n_trees must be >= 1");
  if (outliers.subsample && *outliers.subsample < 2) config_error("outliers.subsample must be >= 2");
  if (!(outliers.fence_k > 0.0)) config_error("outliers.fence_k must be > 0");
  if (relations.lags < 1) config_error("relations.lags must be >= 1");
  if (baselines.lags < 1) config_error("baselines.lags must be >= 1");
  if (baselines.ridge < 0.0) config_error("baselines.ridge must be >= 0");
  if (baselines.tree.min_leaf < 1 || baselines.forest.tree.min_leaf < 1 || baselines.gbt.min_leaf < 1) {
    config_error("min_leaf must be >= 1");
  }
  if (baselines.forest.n_trees < 1) config_error("baselines.forest.n_trees must be >= 1");
  if (!(baselines.gbt.learning_rate > 0.0)) config_error("baselines.gbt.learning_rate must be > 0");
  const auto& e = lstm.experiment;
  if (e.lookback < 1 || e.horizon < 1) config_error("lstm.lookback and lstm.horizon must be >= 1");
  if (e.hidden < 1) config_error("lstm.hidden must be >= 1");
  if (!(e.train.learning_rate > 0.0)) config_error("lstm.learning_rate must be > 0");
  if (!(e.train.gradient_clip > 0.0)) config_error("lstm.gradient_clip must be > 0");
  if (lstm.variants.empty()) config_error("lstm.variants is empty");
}

PipelineConfig parse_config(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  Section root(j, "");
  {
    std::optional<std::uint64_t> seed;
    root.get_seed("seed", seed);
    c.seed = seed.value_or(0);
  }
  c.output_dir = resolve(base_dir, root.string("output_dir", "out"));

  {
    Section s = root.child("data");
    const std::string source = s.string("source", s.has("indices_dir") ? "csv" : "synthetic");
    if (source == "synthetic") {
      c.data.source = DataSource::kSynthetic;
    } else if (source == "csv") {
      c.data.source = DataSource::kCsv;
    } else {
      config_error("data.source must be synthetic or csv");
    }
    const std::string indices_dir = s.string("indices_dir", "");
    const std::string commodities_dir = s.string("commodities_dir", "");
    if (!indices_dir.empty()) c.data.indices_dir = resolve(base_dir, indices_dir);
    if (!commodities_dir.empty()) c.data.commodities_dir = resolve(base_dir, commodities_dir);
    const std::string freq = s.string("index_frequency", "daily");
    if (freq != "daily" && freq != "monthly") config_error("data.index_frequency must be daily or monthly");
    c.data.daily_indices = freq == "daily";
    s.get("date_column", c.data.schema.date_column);
    s.get("value_column", c.data.schema.value_column);
    s.get("date_format", c.data.schema.date_format);
    s.get("lookback_days", c.data.lookback_days);
    s.get("indices", c.data.indices);
    s.get("commodities", c.data.commodities);
    s.finish();
  }
  {
    Section s = root.child("synthetic");
    auto& p = c.synthetic.panel;
    s.get("n_months", p.n_months);
    std::string start = format_date(p.start);
    s.get("start", start);
    try {
      p.start = parse_date(start);
    } catch (const Error&) {
      config_error("synthetic.start is not a YYYY-MM-DD date");
    }
    s.get("index_names", p.index_names);
    s.get("commodity_names", p.commodity_names);
    s.get("index_noise_std", p.index_noise_std);
    s.get("shock_sigmas", p.shock_sigmas);
    s.get("shocks_per_index", p.shocks_per_index);
    s.get("response_lag", p.response_lag);
    s.get("response_duration", p.response_duration);
    s.get("response_magnitude", p.response_magnitude);
    s.get("commodity_noise_std", p.commodity_noise_std);
    s.get("index_loading", p.index_loading);
    s.get("daily_noise_std", c.synthetic.daily_noise_std);
    s.get("holiday_rate", c.synthetic.holiday_rate);
    s.get_seed("seed", c.synthetic.seed);
    s.finish();
  }
  {
    Section s = root.child("preprocess");
    s.get_size("window", c.window);
    s.get_size("monthly_window", c.monthly_window);
    s.get("split_fraction", c.split_fraction);
    s.finish();
  }
  {
    Section s = root.child("outliers");
    s.get_size("n_trees", c.outliers.n_trees);
    s.get("subsample", c.outliers.subsample);
    s.get("fence_k", c.outliers.fence_k);
    s.get("use_raw_levels", c.outliers.use_raw_levels);
    s.get_seed("seed", c.outliers.seed);
    s.finish();
  }
  {
    Section s = root.child("relations");
    s.get_size("lags", c.relations.lags);
    s.get("difference", c.relations.difference);
    s.finish();
  }
  {
    Section s = root.child("baselines");
    auto& b = c.baselines;
    s.get_size("lags", b.lags);
    s.get("ridge", b.ridge);
    s.get_seed("seed", b.seed);
    {
      Section t = s.child("tree");
      read_depth(t, "max_depth", b.tree.max_depth);
      t.get_size("min_leaf", b.tree.min_leaf);
      t.finish();
    }
    {
      Section f = s.child("forest");
      f.get_size("n_trees", b.forest.n_trees);
      f.get("feature_subsample", b.forest.feature_subsample);
      f.get("bootstrap", b.forest.bootstrap);
      read_depth(f, "max_depth", b.forest.tree.max_depth);
      f.get_size("min_leaf", b.forest.tree.min_leaf);
      f.finish();
    }
    {
      Section g = s.child("gbt");
      g.get_size("rounds", b.gbt.rounds);
      g.get("learning_rate", b.gbt.learning_rate);
      g.get_size("max_depth", b.gbt.max_depth);
      g.get_size("min_leaf", b.gbt.min_leaf);
      g.finish();
    }
    s.finish();
  }
  {
    Section s = root.child("lstm");
    auto& e = c.lstm.experiment;
    s.get_size("lookback", e.lookback);
    s.get_size("horizon", e.horizon);
    s.get_size("hidden", e.hidden);
    s.get_size("epochs", e.train.epochs);
    s.get("learning_rate", e.train.learning_rate);
    s.get_size("batch_size", e.train.batch_size);
    s.get("gradient_clip", e.train.gradient_clip);
    s.get_seed("seed", c.lstm.seed);
    const std::string features = s.string("outlier_features", "paired");
    if (features == "paired") {
      c.lstm.outlier_features = OutlierFeatures::kPaired;
    } else if (features == "all") {
      c.lstm.outlier_features = OutlierFeatures::kAll;
    } else {
      config_error("lstm.outlier_features must be paired or all");
    }
    c.lstm.variants = parse_variant_list(s.string("variants", "both"));
    s.finish();
  }
  root.finish();
  c.lstm.experiment.split_fraction = c.split_fraction;
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) config_error("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    config_error(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json config_to_json(const PipelineConfig& c) {
  const auto& p = c.synthetic.panel;
  const auto& b = c.baselines;
  const auto& e = c.lstm.experiment;
  json data = {{"source", c.data.source == DataSource::kCsv ? "csv" : "synthetic"},
               {"index_frequency", c.data.daily_indices ? "daily" : "monthly"},
               {"date_column", c.data.schema.date_column},
               {"value_column", c.data.schema.value_column},
               {"date_format", c.data.schema.date_format},
               {"lookback_days", c.data.lookback_days},
               {"indices", c.data.indices},
               {"commodities", c.data.commodities}};
  if (c.data.source == DataSource::kCsv) {
    data["indices_dir"] = c.data.indices_dir.generic_string();
    data["commodities_dir"] = c.data.commodities_dir.generic_string();
  }
  return {
      {"seed", c.seed},
      {"output_dir", c.output_dir.generic_string()},
      {"data", data},
      {"synthetic",
       {{"n_months", p.n_months},
        {"start", format_date(p.start)},
        {"index_names", p.index_names},
        {"commodity_names", p.commodity_names},
        {"index_noise_std", p.index_noise_std},
        {"shock_sigmas", p.shock_sigmas},
        {"shocks_per_index", p.shocks_per_index},
        {"response_lag", p.response_lag},
        {"response_duration", p.response_duration},
        {"response_magnitude", p.response_magnitude},
        {"commodity_noise_std", p.commodity_noise_std},
        {"index_loading", p.index_loading},
        {"daily_noise_std", c.synthetic.daily_noise_std},
        {"holiday_rate", c.synthetic.holiday_rate},
        {"seed", c.synthetic_seed()}}},
      {"preprocess",
       {{"window", c.window}, {"monthly_window", c.monthly_window}, {"split_fraction", c.split_fraction}}},
      {"outliers",
       {{"n_trees", c.outliers.n_trees},
        {"subsample", c.outliers.subsample ? json(*c.outliers.subsample) : json(nullptr)},
        {"fence_k", c.outliers.fence_k},
        {"use_raw_levels", c.outliers.use_raw_levels},
        {"seed", c.outlier_seed()}}},
      {"relations", {{"lags", c.relations.lags}, {"difference", c.relations.difference}}},
      {"baselines",
       {{"lags", b.lags},
        {"ridge", b.ridge},
        {"seed", c.baseline_seed()},
        {"tree", {{"max_depth", depth_to_json(b.tree.max_depth)}, {"min_leaf", b.tree.min_leaf}}},
        {"forest",
         {{"n_trees", b.forest.n_trees},
          {"feature_subsample",
           b.forest.feature_subsample ? json(*b.forest.feature_subsample) : json(nullptr)},
          {"bootstrap", b.forest.bootstrap},
          {"max_depth", depth_to_json(b.forest.tree.max_depth)},
          {"min_leaf", b.forest.tree.min_leaf}}},
        {"gbt",
         {{"rounds", b.gbt.rounds},
          {"learning_rate", b.gbt.learning_rate},
          {"max_depth", b.gbt.max_depth},
          {"min_leaf", b.gbt.min_leaf}}}}},
      {"lstm",
       {{"lookback", e.lookback},
        {"horizon", e.horizon},
        {"hidden", e.hidden},
        {"epochs", e.train.epochs},
        {"learning_rate", e.train.learning_rate},
        {"batch_size", e.train.batch_size},
        {"gradient_clip", e.train.gradient_clip},
        {"seed", c.lstm_seed()},
        {"outlier_features", to_string(c.lstm.outlier_features)},
        {"variants", variant_list_name(c.lstm.variants)}}},
  };
}

// ================================================================ stages

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kIngest: return "ingest";
    case Stage::kDetect: return "detect";
    case Stage::kRelate: return "relate";
    case Stage::kBaselines: return "baselines";
    case Stage::kTrain: return "train";
    case Stage::kReport: return "report";
  }
  return "unknown";
}

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {Stage::kIngest, Stage::kDetect,    Stage::kRelate,
                                            Stage::kBaselines, Stage::kTrain, Stage::kReport};
  return stages;
}

int exit_code(const Error& error) {
  switch (error.category()) {
    case ErrorCategory::kConfig: return 2;
    case ErrorCategory::kData: return 3;
    case ErrorCategory::kNumerical: return 4;
  }
  return 1;
}

namespace {

// Artifact names shared by producer and consumer stages.
constexpr const char* kPanel = "panel.csv";
constexpr const char* kSeries = "series.json";
constexpr const char* kContamination = "contamination.csv";
constexpr const char* kFlags = "flags.csv";
constexpr const char* kPairing = "pairing.csv";
constexpr const char* kBaselineMetrics = "baselines.csv";
constexpr const char* kLstmMetrics = "lstm_results.csv";

std::string file_stem_safe(const std::string& name) {
  std::string out = name;
  for (char& ch : out) {
    const bool ok = std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return out;
}

// Fails with the name of the stage that produces the artifact.
fs::path require(const fs::path& dir, const std::string& name, std::string_view producer) {
  const fs::path p = dir / name;
  if (!fs::exists(p)) {
    throw Error(ErrorCode::kMissingArtifact,
                std::string(producer) + ": " + name + " not found in " + dir.string());
  }
  return p;
}

struct SeriesIndex {
  std::vector<std::string> indices;
  std::vector<std::string> commodities;
  bool daily = true;
  json inputs = json::object();
};

SeriesIndex read_series_index(const fs::path& dir) {
  const json j = json::parse(read_text_file(require(dir, kSeries, "ingest")));
  SeriesIndex s;
  s.indices = j.at("indices").get<std::vector<std::string>>();
  s.commodities = j.at("commodities").get<std::vector<std::string>>();
  s.daily = j.at("index_frequency").get<std::string>() == "daily";
  s.inputs = j.at("inputs");
  return s;
}

void log_stage(Stage stage, const std::string& msg) {
  std::cerr << "[agshock] " << to_string(stage) << ": " << msg << '\n';
}

// ---------------------------------------------------------------- ingest

std::vector<std::string> csv_stems(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      names.push_back(entry.path().stem().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw Error(ErrorCode::kEmptyAfterCleaning, "no *.csv files in " + dir.string());
  return names;
}

// Monthly snapshots: each observation is assigned to its month start.
TimeSeries to_month_starts(const TimeSeries& s) {
  TimeSeries out = s;
  for (auto& d : out.dates) d = month_start(d);
  for (std::size_t i = 1; i < out.dates.size(); ++i) {
    if (out.dates[i] == out.dates[i - 1]) {
      throw Error(ErrorCode::kDuplicateDate, s.name + " has two observations in " + format_date(out.dates[i]));
    }
  }
  if (out.provenance == "native" && out.dates != s.dates) out.provenance = "month-start(calendar month)";
  return out;
}

void stage_ingest(const PipelineConfig& cfg) {
  const fs::path& out = cfg.output_dir;
  fs::path indices_dir = cfg.data.indices_dir;
  fs::path commodities_dir = cfg.data.commodities_dir;
  CsvSchema schema = cfg.data.schema;
  bool daily = cfg.data.daily_indices;
  std::vector<std::string> index_names = cfg.data.indices;
  std::vector<std::string> commodity_names = cfg.data.commodities;

  if (cfg.data.source == DataSource::kSynthetic) {
    SyntheticPanelSpec spec = cfg.synthetic.panel;
    spec.seed = cfg.synthetic_seed();
    const SyntheticSnapshot snap = generate_synthetic_panel(spec);
    indices_dir = out / "raw" / "indices";
    commodities_dir = out / "raw" / "commodities";
    schema = CsvSchema{};
    daily = true;
    index_names = spec.index_names;
    commodity_names = spec.commodity_names;
    for (std::size_t k = 0; k < snap.indices.size(); ++k) {
      const TimeSeries d = expand_to_weekdays(snap.indices[k], cfg.synthetic.daily_noise_std,
                                              derive_seed(spec.seed, 10 + k), cfg.synthetic.holiday_rate);
      write_series_csv(indices_dir / (file_stem_safe(d.name) + ".csv"), d);
    }
    for (const auto& c : snap.commodities) {
      write_series_csv(commodities_dir / (file_stem_safe(c.name) + ".csv"), c);
    }
    json truth = {{"drivers", json::object()}, {"index_shocks", json::object()}};
    for (std::size_t c = 0; c < snap.commodities.size(); ++c) {
      truth["drivers"][snap.commodities[c].name] = snap.drivers[c];
    }
    for (std::size_t k = 0; k < snap.indices.size(); ++k) {
      truth["index_shocks"][snap.indices[k].name] = snap.index_shocks[k];
    }
    write_text_file(out / "raw" / "truth.json", truth.dump(2) + "\n");
  } else {
    if (index_names.empty()) index_names = csv_stems(indices_dir);
    if (commodity_names.empty()) commodity_names = csv_stems(commodities_dir);
  }

  json inputs = json::object();
  auto load = [&](const fs::path& dir, const std::string& name) {
    const fs::path file = dir / (file_stem_safe(name) + ".csv");
    if (!fs::exists(file)) throw Error(ErrorCode::kIoError, "missing input " + file.string());
    LoadStats stats;
    TimeSeries s = load_csv(file, schema, &stats);
    s.name = name;
    inputs[name] = {{"file", file.filename().string()},
                    {"sha256", sha256_hex(read_text_file(file))},
                    {"rows", stats.rows},
                    {"dropped_empty", stats.dropped_empty}};
    return s;
  };

  std::vector<TimeSeries> monthly;
  for (const auto& name : index_names) {
    const TimeSeries raw = load(indices_dir, name);
    if (daily) {
      write_series_csv(out / "daily" / (file_stem_safe(name) + ".csv"), raw);
      monthly.push_back(align_to_month_start(raw, cfg.data.lookback_days));
    } else {
      monthly.push_back(to_month_starts(raw));
    }
  }
  for (const auto& name : commodity_names) monthly.push_back(to_month_starts(load(commodities_dir, name)));

  const MonthlyPanel panel = merge_panel(monthly);
  write_panel_csv(out / kPanel, panel);
  json provenance = json::object();
  for (const auto& col : panel.columns) provenance[col.name] = col.provenance;
  const json index = {{"indices", index_names},
                      {"commodities", commodity_names},
                      {"index_frequency", daily ? "daily" : "monthly"},
                      {"months", panel.rows()},
                      {"first_month", format_date(panel.months.front())},
                      {"last_month", format_date(panel.months.back())},
                      {"provenance", provenance},
                      {"inputs", inputs}};
  write_text_file(out / kSeries, index.dump(2) + "\n");
  log_stage(Stage::kIngest, std::to_string(index_names.size()) + " indices, " +
                                std::to_string(commodity_names.size()) + " commodities, " +
                                std::to_string(panel.rows()) + " months");
}

// ---------------------------------------------------------------- detect

std::vector<double> defined(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    if (!is_missing(x)) out.push_back(x);
  }
  return out;
}

void stage_detect(const PipelineConfig& cfg) {
  const fs::path& out = cfg.output_dir;
  const SeriesIndex series = read_series_index(out);
  const MonthlyPanel panel = read_panel_csv(require(out, kPanel, "ingest"));

  std::ostringstream table;
  table << "index,daily_contamination,monthly_contamination,monthly_flags,months\n";
  MonthlyPanel flag_panel;
  flag_panel.months = panel.months;
  for (std::size_t k = 0; k < series.indices.size(); ++k) {
    const std::string& name = series.indices[k];
    double daily_rate = kMissing;
    if (series.daily) {
      const TimeSeries daily =
          load_csv(require(out, "daily/" + file_stem_safe(name) + ".csv", "ingest"));
      const auto signal = double_rolling_aggregate(daily.values, cfg.window);
      daily_rate = contamination_from_iqr(signal, cfg.outliers.fence_k);
    }
    const auto change = double_rolling_aggregate(panel.column(name).values, cfg.monthly_window);
    const double monthly_rate = contamination_from_iqr(change, cfg.outliers.fence_k);
    const auto& signal = cfg.outliers.use_raw_levels ? panel.column(name).values : change;

    const std::vector<double> points = defined(signal);
    Eigen::MatrixXd data(static_cast<Eigen::Index>(points.size()), 1);
    for (std::size_t i = 0; i < points.size(); ++i) data(static_cast<Eigen::Index>(i), 0) = points[i];
    IsolationForestConfig ic;
    ic.n_trees = cfg.outliers.n_trees;
    if (cfg.outliers.subsample) ic.subsample = std::min(*cfg.outliers.subsample, points.size());
    ic.contamination = monthly_rate;
    ic.seed = derive_seed(cfg.outlier_seed(), k);
    const IsolationForestModel model = IsolationForestModel::fit(data, ic);
    const OutlierFlags flags = flag_series(model, signal, panel.months);

    const std::string stem = file_stem_safe(name);
    write_flags_csv(out / ("flags_" + stem + ".csv"), flags);
    write_text_file(out / "models" / ("iforest_" + stem + ".json"), model.to_json().dump() + "\n");
    PanelColumn col{name, {}, cfg.outliers.use_raw_levels
                                  ? std::string("isolation_forest(levels)")
                                  : "isolation_forest(window=" + std::to_string(cfg.monthly_window) + ")"};
    for (int f : flags.flags) col.values.push_back(static_cast<double>(f));
    flag_panel.columns.push_back(std::move(col));

    table << name << ',' << format_number(daily_rate) << ',' << format_number(monthly_rate) << ','
          << flags.flag_count() << ',' << panel.rows() << '\n';
  }
  write_text_file(out / kContamination, table.str());
  write_panel_csv(out / kFlags, flag_panel);
  log_stage(Stage::kDetect, "flagged " + std::to_string(series.indices.size()) + " indices");
}

// ---------------------------------------------------------------- relate

void stage_relate(const PipelineConfig& cfg) {
  const fs::path& out = cfg.output_dir;
  const SeriesIndex series = read_series_index(out);
  const MonthlyPanel panel = read_panel_csv(require(out, kPanel, "ingest"));
  const RelationMatrix matrix = build_relation_matrix(panel, series.commodities, series.indices, cfg.relations);
  write_relation_csvs(out, matrix);
  std::vector<PairingResult> pairs;
  for (const auto& c : series.commodities) pairs.push_back(pair_features(matrix, c));
  write_pairing_csv(out / kPairing, pairs);
  const auto merged = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.merged; });
  log_stage(Stage::kRelate, std::to_string(pairs.size()) + " pairings, " + std::to_string(merged) + " merged");
}

const PairingResult& pairing_for(const std::vector<PairingResult>& pairs, const std::string& commodity) {
  for (const auto& p : pairs) {
    if (p.commodity == commodity) return p;
  }
  throw Error(ErrorCode::kUnknownCommodity, commodity + " missing from " + kPairing);
}

ScalerParams target_scaler(std::span<const double> train) {
  const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
  return *hi > *lo ? ScalerParams{*lo, *hi} : ScalerParams{*lo, *lo + 1.0};
}

// ---------------------------------------------------------------- baselines

void stage_baselines(const PipelineConfig& cfg) {
  const fs::path& out = cfg.output_dir;
  const SeriesIndex series = read_series_index(out);
  const MonthlyPanel panel = read_panel_csv(require(out, kPanel, "ingest"));
  const auto pairs = read_pairing_csv(require(out, kPairing, "relations"));
  const std::size_t split = split_point(panel.rows(), cfg.split_fraction);

  EvalReport fragment;
  for (std::size_t ci = 0; ci < series.commodities.size(); ++ci) {
    const std::string& c = series.commodities[ci];
    const auto features = pairing_for(pairs, c).feature_indices();
    const RegressionDataset data = build_regression_dataset(panel, c, features, cfg.baselines.lags);
    std::vector<Eigen::Index> train_rows, test_rows;
    for (std::size_t r = 0; r < data.rows.size(); ++r) {
      (data.rows[r] < split ? train_rows : test_rows).push_back(static_cast<Eigen::Index>(r));
    }
    if (train_rows.empty() || test_rows.empty()) {
      throw Error(ErrorCode::kInsufficientSamples, c + ": empty train or test split");
    }
    const Eigen::MatrixXd X_train = data.X(train_rows, Eigen::all);
    const Eigen::VectorXd y_train = data.y(train_rows);
    const Eigen::MatrixXd X_test = data.X(test_rows, Eigen::all);
    const Eigen::VectorXd y_test = data.y(test_rows);
    const ScalerParams scaler = target_scaler({y_train.data(), static_cast<std::size_t>(y_train.size())});

    const std::uint64_t seed = derive_seed(cfg.baseline_seed(), ci);
    for (const auto& family : baseline_names()) {
      BaselineModel model;
      if (family == "linear") {
        model = fit_linear(X_train, y_train, 1, cfg.baselines.ridge);
      } else if (family == "poly2") {
        model = fit_linear(X_train, y_train, 2, cfg.baselines.ridge);
      } else if (family == "tree") {
        model = fit_tree(X_train, y_train, cfg.baselines.tree);
      } else if (family == "forest") {
        ForestConfig fc = cfg.baselines.forest;
        fc.seed = derive_seed(seed, 1);
        model = fit_forest(X_train, y_train, fc);
      } else {
        GbtConfig gc = cfg.baselines.gbt;
        gc.seed = derive_seed(seed, 2);
        model = fit_gbt(X_train, y_train, gc);
      }
      const Eigen::VectorXd pred = predict(model, X_test);
      const std::span<const double> p(pred.data(), static_cast<std::size_t>(pred.size()));
      const std::span<const double> y(y_test.data(), static_cast<std::size_t>(y_test.size()));
      EvalRow row;
      row.commodity = c;
      row.model = family;
      row.rmse_units = rmse(p, y);
      row.rmse = row.rmse_units / (scaler.x_max - scaler.x_min);
      try {
        row.r2 = r2(p, y);
      } catch (const Error&) {
        row.r2 = kMissing;
      }
      row.prediction_last = p.back();
      row.paired_indices = features;
      fragment.rows.push_back(std::move(row));
      write_text_file(out / "models" / ("baseline_" + file_stem_safe(c) + "_" + family + ".json"),
                      to_json(model).dump() + "\n");
    }
  }
  write_text_file(out / kBaselineMetrics, format_metrics_csv(fragment));
  log_stage(Stage::kBaselines, std::to_string(fragment.rows.size()) + " fits");
}

// ---------------------------------------------------------------- train

std::string lstm_series_name(const std::string& commodity, Variant v) {
  return "lstm/" + file_stem_safe(commodity) + "_" + std::string(to_string(v)) + ".csv";
}

void stage_train(const PipelineConfig& cfg) {
  const fs::path& out = cfg.output_dir;
  const SeriesIndex series = read_series_index(out);
  const MonthlyPanel panel = read_panel_csv(require(out, kPanel, "ingest"));
  const auto pairs = read_pairing_csv(require(out, kPairing, "relations"));
  const MonthlyPanel flags = read_panel_csv(require(out, kFlags, "outliers"));
  if (flags.months != panel.months) throw Error(ErrorCode::kFormatError, "flags.csv months differ from panel");

  EvalReport fragment;
  for (std::size_t ci = 0; ci < series.commodities.size(); ++ci) {
    const std::string& c = series.commodities[ci];
    const auto paired = pairing_for(pairs, c).feature_indices();
    const auto& flagged =
        cfg.lstm.outlier_features == OutlierFeatures::kAll ? series.indices : paired;

    ForecastInput input;
    std::vector<const std::vector<double>*> columns = {&panel.column(c).values};
    input.feature_names = {c};
    for (const auto& idx : paired) {
      columns.push_back(&panel.column(idx).values);
      input.feature_names.push_back(idx);
    }
    for (const auto& idx : flagged) {
      input.outlier_columns.push_back(columns.size());
      columns.push_back(&flags.column(idx).values);
      input.feature_names.push_back("outlier_" + idx);
    }
    input.features.resize(static_cast<Eigen::Index>(panel.rows()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t f = 0; f < columns.size(); ++f) {
      for (std::size_t t = 0; t < panel.rows(); ++t) {
        input.features(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) = (*columns[f])[t];
      }
    }
    input.target_column = 0;

    ExperimentConfig ec = cfg.lstm.experiment;
    ec.split_fraction = cfg.split_fraction;
    ec.train.seed = derive_seed(cfg.lstm_seed(), ci);
    for (Variant v : cfg.lstm.variants) {
      const LstmExperiment exp = run_lstm_experiment(input, v, ec);
      const ForecastResult& r = exp.result;
      EvalRow row;
      row.commodity = c;
      row.model = v == Variant::kWithOutliers ? kLstmWith : kLstmWithout;
      row.rmse = r.rmse_scaled;
      row.rmse_units = r.rmse_units;
      row.r2 = r.r2;
      row.prediction_last = r.forecast.back();
      row.paired_indices = paired;
      fragment.rows.push_back(std::move(row));

      std::ostringstream s;
      s << "month,actual,fitted,forecast\n";
      const auto& actual = panel.column(c).values;
      for (std::size_t t = 0; t < panel.rows(); ++t) {
        s << format_date(panel.months[t]) << ',' << format_number(actual[t]) << ','
          << format_number(r.history_fit[t]) << ",\n";
      }
      for (std::size_t k = 0; k < r.forecast.size(); ++k) {
        s << format_date(add_months(panel.months.back(), static_cast<int>(k + 1))) << ",,,"
          << format_number(r.forecast[k]) << '\n';
      }
      write_text_file(out / lstm_series_name(c, v), s.str());

      std::ostringstream loss;
      loss << "epoch,loss\n";
      for (std::size_t e = 0; e < r.loss_trace.size(); ++e) {
        loss << e << ',' << format_number(r.loss_trace[e]) << '\n';
      }
      const std::string stem = file_stem_safe(c) + "_" + std::string(to_string(v));
      write_text_file(out / "lstm" / (stem + "_loss.csv"), loss.str());
      write_text_file(out / "models" / ("lstm_" + stem + ".json"), exp.model.to_json().dump() + "\n");
    }
    log_stage(Stage::kTrain, c + " done");
  }
  write_text_file(out / kLstmMetrics, format_metrics_csv(fragment));
}

// ---------------------------------------------------------------- report

struct LstmSeries {
  std::vector<double> fitted;
  std::vector<Date> future;
  std::vector<double> forecast;
};

LstmSeries read_lstm_series(const fs::path& path) {
  const CsvTable table = parse_csv_table(read_text_file(path));
  const auto mi = table.column_index("month");
  const auto fi = table.column_index("fitted");
  const auto pi = table.column_index("forecast");
  if (!mi || !fi || !pi) throw Error(ErrorCode::kMissingColumn, path.string());
  LstmSeries s;
  for (const auto& row : table.rows) {
    const auto forecast = parse_double(row.at(*pi));
    if (forecast) {
      s.future.push_back(parse_date(row.at(*mi)));
      s.forecast.push_back(*forecast);
    } else {
      s.fitted.push_back(parse_double(row.at(*fi)).value_or(kMissing));
    }
  }
  return s;
}

std::vector<EvalReport> split_by_model(const EvalReport& metrics) {
  std::vector<EvalReport> out;
  std::vector<std::string> models;
  for (const auto& r : metrics.rows) {
    auto it = std::find(models.begin(), models.end(), r.model);
    if (it == models.end()) {
      models.push_back(r.model);
      out.emplace_back();
      it = models.end() - 1;
    }
    out[static_cast<std::size_t>(it - models.begin())].rows.push_back(r);
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void stage_report(const PipelineConfig& cfg) {
  const fs::path& out = cfg.output_dir;
  const SeriesIndex series = read_series_index(out);
  const fs::path panel_path = require(out, kPanel, "ingest");
  const MonthlyPanel panel = read_panel_csv(panel_path);
  const EvalReport baselines = parse_metrics_csv(read_text_file(require(out, kBaselineMetrics, "baselines")));
  const EvalReport lstm = parse_metrics_csv(read_text_file(require(out, kLstmMetrics, "lstm")));

  std::vector<EvalReport> fragments = split_by_model(baselines);
  for (auto& f : split_by_model(lstm)) fragments.push_back(std::move(f));
  EvalReport report = build_comparison(fragments);

  json seeds = {{"global", cfg.seed},
                {"synthetic", cfg.synthetic_seed()},
                {"outliers", cfg.outlier_seed()},
                {"baselines", cfg.baseline_seed()},
                {"lstm", cfg.lstm_seed()}};
  json hashes = {{"panel.csv", sha256_hex(read_text_file(panel_path))}};
  for (const auto& [name, info] : series.inputs.items()) hashes[name] = info.at("sha256");
  report.metadata = {{"config", config_to_json(cfg)},
                     {"seeds", seeds},
                     {"data_hashes", hashes},
                     {"generated_at", utc_timestamp()}};

  write_text_file(out / "report.json", report.to_json().dump(2) + "\n");
  write_text_file(out / "table5.csv", format_table5_csv(report));
  write_text_file(out / "table6.csv", format_table6_csv(report));

  for (const auto& c : series.commodities) {
    ForecastPlotData plot;
    plot.months = panel.months;
    plot.actual = panel.column(c).values;
    for (Variant v : {Variant::kWithOutliers, Variant::kWithoutOutliers}) {
      const fs::path p = out / lstm_series_name(c, v);
      if (!report.find(c, v == Variant::kWithOutliers ? kLstmWith : kLstmWithout)) continue;
      const LstmSeries s = read_lstm_series(require(out, lstm_series_name(c, v), "lstm"));
      if (plot.fitted.empty()) plot.fitted = s.fitted;
      if (plot.future_months.empty()) plot.future_months = s.future;
      (v == Variant::kWithOutliers ? plot.forecast_with : plot.forecast_without) = s.forecast;
    }
    write_text_file(out / ("forecast_" + file_stem_safe(c) + ".csv"), format_forecast_plot_csv(plot));
  }
  const auto& s = report.summary;
  log_stage(Stage::kReport, std::to_string(s.lstm_beats_baseline) + "/" + std::to_string(s.commodities) +
                                " commodities favour the LSTM; with outliers beats without in " +
                                std::to_string(s.with_beats_without));
}

}  // namespace

void run_stage(Stage stage, const PipelineConfig& config) {
  config.validate();
  fs::create_directories(config.output_dir);
  switch (stage) {
    case Stage::kIngest: stage_ingest(config); break;
    case Stage::kDetect: stage_detect(config); break;
    case Stage::kRelate: stage_relate(config); break;
    case Stage::kBaselines: stage_baselines(config); break;
    case Stage::kTrain: stage_train(config); break;
    case Stage::kReport: stage_report(config); break;
  }
  write_manifest(config.output_dir);
}

void run_all(const PipelineConfig& config) {
  for (Stage s : all_stages()) run_stage(s, config);
}

}  // namespace agshock
