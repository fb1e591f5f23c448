#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"
#include "agshock/pipeline.hpp"

using namespace agshock;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no agshock::Error thrown";
  return ErrorCode::kFormatError;
}

const fs::path kSmallConfig = fs::path(AGSHOCK_SOURCE_DIR) / "configs" / "small.json";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("agshock_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct CliResult {
  int code = -1;
  std::string err;
};

CliResult cli(const std::string& args, const fs::path& work) {
  const fs::path err = work / "stderr.txt";
  const std::string cmd = std::string(AGSHOCK_CLI_PATH) + " " + args + " 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err) ? read_text_file(err) : "";
  return r;
}

nlohmann::json small_json() { return nlohmann::json::parse(read_text_file(kSmallConfig)); }

}  // namespace

TEST(Config, DefaultsAndSeeds) {
  const auto cfg = parse_config(nlohmann::json::object());
  EXPECT_EQ(cfg.lstm.experiment.lookback, 60u);
  EXPECT_EQ(cfg.lstm.experiment.horizon, 30u);
  EXPECT_EQ(cfg.split_fraction, 0.8);
  EXPECT_EQ(cfg.lstm.variants.size(), 2u);
  EXPECT_NE(cfg.outlier_seed(), cfg.lstm_seed());

  auto j = small_json();
  j["lstm"]["seed"] = 5;
  const auto explicit_seed = parse_config(j);
  EXPECT_EQ(explicit_seed.lstm_seed(), 5u);
  j["seed"] = 8;
  EXPECT_EQ(parse_config(j).lstm_seed(), 5u);
  EXPECT_NE(parse_config(j).baseline_seed(), explicit_seed.baseline_seed());
}

TEST(Config, RelativePathsFollowConfigFile) {
  const auto cfg = load_config(kSmallConfig);
  EXPECT_EQ(fs::weakly_canonical(cfg.output_dir), fs::weakly_canonical(fs::path(AGSHOCK_SOURCE_DIR) / "out" / "small"));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = small_json();
  j["lstm"]["hiden"] = 3;
  EXPECT_EQ(code_of([&] { parse_config(j); }), ErrorCode::kConfigError);

  auto bad_split = small_json();
  bad_split["preprocess"]["split_fraction"] = 0.97;
  EXPECT_EQ(code_of([&] { parse_config(bad_split).validate(); }), ErrorCode::kConfigError);

  auto bad_type = small_json();
  bad_type["lstm"]["epochs"] = "many";
  EXPECT_EQ(code_of([&] { parse_config(bad_type); }), ErrorCode::kConfigError);

  auto bad_variant = small_json();
  bad_variant["lstm"]["variants"] = "sometimes";
  EXPECT_EQ(code_of([&] { parse_config(bad_variant); }), ErrorCode::kConfigError);

  auto zero_horizon = small_json();
  zero_horizon["lstm"]["horizon"] = 0;
  EXPECT_EQ(code_of([&] { parse_config(zero_horizon).validate(); }), ErrorCode::kConfigError);

  EXPECT_EQ(code_of([] { load_config("/nonexistent/agshock.json"); }), ErrorCode::kConfigError);
}

TEST(Config, ResolvedJsonReparses) {
  const auto cfg = load_config(kSmallConfig);
  const auto j = config_to_json(cfg);
  EXPECT_EQ(config_to_json(parse_config(j)), j);
}

TEST(Manifest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(ExitCodes, Categories) {
  EXPECT_EQ(exit_code(Error(ErrorCode::kConfigError, "x")), 2);
  EXPECT_EQ(exit_code(Error(ErrorCode::kMissingArtifact, "x")), 3);
  EXPECT_EQ(exit_code(Error(ErrorCode::kNonFiniteLoss, "x")), 4);
}

TEST(Cli, TrainWithoutDetectReportsMissingOutliers) {
  const auto work = scratch("missing");
  const auto out = work / "out";
  ASSERT_EQ(cli("ingest --config " + kSmallConfig.string() + " --out " + out.string(), work).code, 0);
  ASSERT_EQ(cli("relate --config " + kSmallConfig.string() + " --out " + out.string(), work).code, 0);
  const auto r = cli("train --config " + kSmallConfig.string() + " --out " + out.string(), work);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("MissingArtifact"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("outliers"), std::string::npos) << r.err;
  fs::remove_all(work);
}

TEST(Cli, UsageAndConfigErrors) {
  const auto work = scratch("usage");
  EXPECT_EQ(cli("", work).code, 2);
  EXPECT_EQ(cli("run-all", work).code, 2);
  EXPECT_EQ(cli("run-all --config " + kSmallConfig.string() + " --variant sometimes", work).code, 2);
  write_text_file(work / "bad.json", "{\"lstm\": {\"horizon\": 0}}");
  EXPECT_EQ(cli("run-all --config " + (work / "bad.json").string() + " --out " + (work / "o").string(), work).code, 2);
  write_text_file(work / "broken.json", "{not json");
  EXPECT_EQ(cli("ingest --config " + (work / "broken.json").string(), work).code, 2);
  fs::remove_all(work);
}

TEST(Cli, RunAllProducesManifestedArtifacts) {
  const auto work = scratch("runall");
  const auto out = work / "out";
  const auto r = cli("run-all --config " + kSmallConfig.string() + " --out " + out.string(), work);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"panel.csv", "series.json", "contamination.csv", "flags.csv", "correlation.csv",
                           "causation.csv", "pairing.csv", "baselines.csv", "lstm_results.csv", "report.json",
                           "table5.csv", "table6.csv", "forecast_Corn.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  const auto manifest = nlohmann::json::parse(read_text_file(out / "manifest.json"));
  const auto listed = manifest.at("files");
  const auto scanned = scan_artifacts(out);
  ASSERT_EQ(listed.size(), scanned.size());
  for (std::size_t i = 0; i < scanned.size(); ++i) {
    EXPECT_EQ(listed[i].at("path"), scanned[i].path);
    EXPECT_EQ(listed[i].at("sha256"), sha256_hex(read_text_file(out / scanned[i].path)));
  }

  // Re-running one stage over the same inputs reproduces its artifacts.
  const std::string table6 = read_text_file(out / "table6.csv");
  ASSERT_EQ(cli("report --config " + kSmallConfig.string() + " --out " + out.string(), work).code, 0);
  EXPECT_EQ(read_text_file(out / "table6.csv"), table6);

  const auto second = work / "second";
  ASSERT_EQ(cli("run-all --config " + kSmallConfig.string() + " --out " + second.string(), work).code, 0);
  EXPECT_EQ(read_text_file(second / "table5.csv"), read_text_file(out / "table5.csv"));
  EXPECT_EQ(read_text_file(second / "table6.csv"), table6);

  const auto reseeded = work / "reseeded";
  ASSERT_EQ(cli("run-all --config " + kSmallConfig.string() + " --seed 99 --out " + reseeded.string(), work).code, 0);
  EXPECT_NE(read_text_file(reseeded / "panel.csv"), read_text_file(out / "panel.csv"));
  fs::remove_all(work);
}

TEST(Cli, VariantFlagLimitsLstmRuns) {
  const auto work = scratch("variant");
  const auto out = work / "out";
  ASSERT_EQ(cli("run-all --config " + kSmallConfig.string() + " --variant with --out " + out.string(), work).code, 0);
  const auto t = parse_csv_table(read_text_file(out / "lstm_results.csv"));
  const auto model = t.column_index("model");
  ASSERT_TRUE(model.has_value());
  ASSERT_EQ(t.rows.size(), 3u);
  for (const auto& row : t.rows) EXPECT_EQ(row[*model], "lstm_with_outliers");
  EXPECT_FALSE(fs::exists(out / "lstm" / "Corn_without_outliers.csv"));
  fs::remove_all(work);
}

TEST(Cli, CsvSnapshotRun) {
  const auto work = scratch("csv");
  const auto synthetic = work / "synthetic";
  ASSERT_EQ(cli("ingest --config " + kSmallConfig.string() + " --out " + synthetic.string(), work).code, 0);
  auto j = small_json();
  j.erase("synthetic");
  j["data"] = {{"source", "csv"},
               {"indices_dir", (synthetic / "raw" / "indices").string()},
               {"commodities_dir", (synthetic / "raw" / "commodities").string()},
               {"commodities", {"Corn", "Milk", "Eggs"}}};
  write_text_file(work / "csv.json", j.dump(2));
  const auto out = work / "out";
  const auto r = cli("run-all --config " + (work / "csv.json").string() + " --out " + out.string(), work);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto corr = parse_csv_table(read_text_file(out / "correlation.csv"));
  EXPECT_EQ(corr.header, (std::vector<std::string>{"commodity", "Gold", "Oil"}));
  EXPECT_EQ(corr.rows.size(), 3u);
  EXPECT_EQ(read_text_file(out / "panel.csv"), read_text_file(synthetic / "panel.csv"));

  fs::remove_all(synthetic / "raw" / "commodities");
  fs::create_directories(synthetic / "raw" / "commodities");
  EXPECT_EQ(cli("ingest --config " + (work / "csv.json").string() + " --out " + out.string(), work).code, 3);
  fs::remove_all(work);
}
