#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agshock/baselines.hpp"
#include "agshock/dataio.hpp"
#include "agshock/error.hpp"
#include "agshock/lstm.hpp"
#include "agshock/relations.hpp"

namespace agshock {

enum class DataSource { kSynthetic, kCsv };

struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  std::filesystem::path indices_dir;
  std::filesystem::path commodities_dir;
  bool daily_indices = true;  // "daily" or "monthly" index snapshots
  CsvSchema schema;
  int lookback_days = 7;
  // Explicit series order; empty means every *.csv in the directory, sorted.
  std::vector<std::string> indices;
  std::vector<std::string> commodities;
};

struct SyntheticDataConfig {
  SyntheticPanelSpec panel;
  double daily_noise_std = 0.05;
  double holiday_rate = 0.02;
  std::optional<std::uint64_t> seed;  // panel.seed is ignored in favour of this
};

struct OutlierConfig {
  std::size_t n_trees = 100;
  std::optional<std::size_t> subsample;
  double fence_k = 1.5;
  bool use_raw_levels = false;  // fit the forest on monthly levels instead of the change signal
  std::optional<std::uint64_t> seed;
};

struct BaselineSettings {
  std::size_t lags = 3;
  double ridge = 1e-8;
  TreeConfig tree;
  ForestConfig forest;
  GbtConfig gbt;
  std::optional<std::uint64_t> seed;
};

enum class OutlierFeatures { kPaired, kAll };

struct LstmSettings {
  ExperimentConfig experiment;
  OutlierFeatures outlier_features = OutlierFeatures::kPaired;
  std::vector<Variant> variants = {Variant::kWithOutliers, Variant::kWithoutOutliers};
  std::optional<std::uint64_t> seed;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  DataConfig data;
  SyntheticDataConfig synthetic;
  std::size_t window = 5;          // daily change-signal window
  std::size_t monthly_window = 1;  // monthly change-signal window
  double split_fraction = 0.8;
  OutlierConfig outliers;
  RelationOptions relations;
  BaselineSettings baselines;
  LstmSettings lstm;

  // Stage seeds: the explicit section seed, else one derived from `seed`.
  std::uint64_t synthetic_seed() const;
  std::uint64_t outlier_seed() const;
  std::uint64_t baseline_seed() const;
  std::uint64_t lstm_seed() const;

  // Throws ConfigError on a value outside its documented range.
  void validate() const;
};

// Relative data paths resolve against `base_dir`. Unknown keys are rejected.
PipelineConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
// Fully resolved configuration, including derived seeds.
nlohmann::json config_to_json(const PipelineConfig& config);

enum class Stage { kIngest, kDetect, kRelate, kBaselines, kTrain, kReport };

std::string_view to_string(Stage stage);
const std::vector<Stage>& all_stages();

// Reads the stage's declared inputs from config.output_dir, writes its
// artifacts there, and refreshes manifest.json.
void run_stage(Stage stage, const PipelineConfig& config);
void run_all(const PipelineConfig& config);

// 0 success, 2 configuration, 3 data, 4 numerical.
int exit_code(const Error& error);

// ------------------------------------------------------------ manifest

std::string sha256_hex(std::string_view bytes);

struct ManifestEntry {
  std::string path;  // relative to the output directory, '/' separated
  std::uintmax_t bytes = 0;
  std::string sha256;
};

// Every regular file under `dir` except manifest.json, sorted by path.
std::vector<ManifestEntry> scan_artifacts(const std::filesystem::path& dir);
void write_manifest(const std::filesystem::path& dir);

}  // namespace agshock
