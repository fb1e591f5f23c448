#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agshock/dataio.hpp"

namespace agshock {

double pearson(std::span<const double> x, std::span<const double> y);

struct CausationScore {
  double f_stat = 0.0;
  double p_value = 1.0;
  std::size_t df_num = 0;
  std::size_t df_den = 0;
};

// Granger-style F test: does adding lags 1..p of `cause` to an
// autoregression of `effect` on its own lags 1..p (plus intercept) reduce
// the residual sum of squares?
CausationScore causation_score(std::span<const double> cause, std::span<const double> effect,
                               std::size_t lags = 3);

// Upper-tail probability of the F(d1, d2) distribution.
double f_distribution_sf(double f, double d1, double d2);

struct RelationMatrix {
  std::vector<std::string> commodities;
  std::vector<std::string> indices;
  Eigen::MatrixXd correlation;  // commodities × indices
  Eigen::MatrixXd causation;    // F statistics, >= 0
  Eigen::MatrixXd causation_p;

  std::size_t commodity_row(const std::string& name) const;
};

struct RelationOptions {
  std::size_t lags = 3;
  bool difference = false;  // score first differences instead of levels
};

// Correlation of every commodity with every index, and the index → commodity
// causation score. A degenerate causation cell scores 0 with p = 1.
RelationMatrix build_relation_matrix(const MonthlyPanel& panel,
                                     const std::vector<std::string>& commodities,
                                     const std::vector<std::string>& indices,
                                     const RelationOptions& options = {});

struct PairingResult {
  std::string commodity;
  std::string corr_index;
  double corr_value = 0.0;
  std::string caus_index;
  double caus_value = 0.0;
  bool merged = false;

  // Feature indices used downstream: causation first, then correlation if distinct.
  std::vector<std::string> feature_indices() const;
};

PairingResult pair_features(const RelationMatrix& matrix, const std::string& commodity);

void write_relation_csvs(const std::filesystem::path& dir, const RelationMatrix& matrix);
void write_pairing_csv(const std::filesystem::path& path, const std::vector<PairingResult>& pairs);
std::vector<PairingResult> read_pairing_csv(const std::filesystem::path& path);

}  // namespace agshock
