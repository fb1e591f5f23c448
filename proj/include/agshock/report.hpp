#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agshock/dataio.hpp"

namespace agshock {

double rmse(std::span<const double> y_hat, std::span<const double> y);
// 1 - SS_res / SS_tot; negative when worse than predicting the mean.
double r2(std::span<const double> y_hat, std::span<const double> y);

inline constexpr const char* kLstmWith = "lstm_with_outliers";
inline constexpr const char* kLstmWithout = "lstm_without_outliers";

struct EvalRow {
  std::string commodity;
  std::string model;
  double rmse = 0.0;        // scaled target space
  double rmse_units = 0.0;  // production units
  double r2 = 0.0;
  double prediction_last = 0.0;
  std::vector<std::string> paired_indices;

  bool operator==(const EvalRow&) const = default;
};

struct ComparisonRow {
  std::string commodity;
  std::string baseline_model;
  double baseline_rmse = 0.0;
  double with_rmse = 0.0;
  double without_rmse = 0.0;
  std::string winner;  // "baseline", kLstmWith or kLstmWithout
  bool tie = false;

  bool operator==(const ComparisonRow&) const = default;
};

struct ComparisonSummary {
  std::size_t commodities = 0;
  std::size_t lstm_beats_baseline = 0;  // min(with, without) < baseline
  std::size_t with_beats_without = 0;
  std::size_t baseline_wins = 0;
  std::size_t with_wins = 0;
  std::size_t without_wins = 0;
  std::size_t ties = 0;

  bool operator==(const ComparisonSummary&) const = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<ComparisonRow> comparison;
  ComparisonSummary summary;
  nlohmann::json metadata = nlohmann::json::object();

  std::vector<std::string> commodities() const;
  std::optional<EvalRow> find(const std::string& commodity, const std::string& model) const;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);

  bool operator==(const EvalReport& other) const;
};

// Merges per-model fragments (one fragment per model family, each covering
// the same commodities) into one report with a per-commodity winner table.
// The compared baseline is the family with the lowest summed per-commodity
// RMSE rank.
EvalReport build_comparison(const std::vector<EvalReport>& fragments);

// Table of the two LSTM variants: RMSE and last forecast point each.
std::string format_table5_csv(const EvalReport& report);
// Best baseline vs both LSTM variants with the winner per commodity.
std::string format_table6_csv(const EvalReport& report);
// Every row of the report (model, rmse, rmse_units, r2, prediction_last).
std::string format_metrics_csv(const EvalReport& report);
EvalReport parse_metrics_csv(std::string_view text);

struct ForecastPlotData {
  std::vector<Date> months;
  std::vector<double> actual;
  std::vector<double> fitted;
  std::vector<Date> future_months;
  std::vector<double> forecast_with;
  std::vector<double> forecast_without;
};

// month,actual,fitted,forecast_with,forecast_without
std::string format_forecast_plot_csv(const ForecastPlotData& data);

}  // namespace agshock
