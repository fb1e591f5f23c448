#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "agshock/error.hpp"
#include "agshock/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
};

agshock::PipelineConfig resolve_config(const Options& opt) {
  agshock::PipelineConfig cfg = agshock::load_config(opt.config);
  if (opt.out) cfg.output_dir = *opt.out;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.variant) {
    if (*opt.variant == "both") {
      cfg.lstm.variants = {agshock::Variant::kWithOutliers, agshock::Variant::kWithoutOutliers};
    } else {
      cfg.lstm.variants = {agshock::parse_variant(*opt.variant)};
    }
  }
  return cfg;
}

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config,-c", opt.config, "Pipeline configuration (JSON)")->required();
  cmd->add_option("--out,-o", opt.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", opt.seed, "Global seed (overrides seed)");
  cmd->add_option("--variant", opt.variant, "LSTM variants to train")
      ->check(CLI::IsMember({"with", "without", "both"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outlier-aware commodity production forecasting pipeline"};
  app.require_subcommand(1);
  Options opt;

  struct Entry {
    const char* name;
    const char* help;
    std::optional<agshock::Stage> stage;
  };
  const Entry entries[] = {
      {"ingest", "Load snapshots (or generate synthetic data) and build the monthly panel", agshock::Stage::kIngest},
      {"detect", "Contamination rates and isolation-forest outlier flags per index", agshock::Stage::kDetect},
      {"relate", "Correlation and causation matrices; per-commodity index pairing", agshock::Stage::kRelate},
      {"baselines", "Fit and score the five regression baselines", agshock::Stage::kBaselines},
      {"train", "Train the LSTM forecasters with and without outlier features", agshock::Stage::kTrain},
      {"report", "Assemble metrics, comparison tables and plot data", agshock::Stage::kReport},
      {"run-all", "Run every stage in order", std::nullopt},
  };
  std::vector<std::pair<CLI::App*, std::optional<agshock::Stage>>> commands;
  for (const auto& e : entries) {
    CLI::App* cmd = app.add_subcommand(e.name, e.help);
    add_common(cmd, opt);
    commands.emplace_back(cmd, e.stage);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const agshock::PipelineConfig cfg = resolve_config(opt);
    for (const auto& [cmd, stage] : commands) {
      if (!cmd->parsed()) continue;
      if (stage) {
        agshock::run_stage(*stage, cfg);
      } else {
        agshock::run_all(cfg);
      }
    }
  } catch (const agshock::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return agshock::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
