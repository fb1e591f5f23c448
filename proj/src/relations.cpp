#include "agshock/relations.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/fisher_f.hpp>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"

namespace agshock {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "pearson inputs differ in length");
  if (x.size() < 3) throw Error(ErrorCode::kTooShort, "pearson needs >= 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::kConstantInput, "pearson of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double f_distribution_sf(double f, double d1, double d2) {
  if (!(f > 0.0)) return 1.0;
  if (!std::isfinite(f)) return 0.0;
  const boost::math::fisher_f dist(d1, d2);
  return boost::math::cdf(boost::math::complement(dist, f));
}

namespace {

// Residual sum of squares of an OLS fit; throws on a rank-deficient design.
double ols_rss(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    throw Error(ErrorCode::kSingularRegression,
                "design rank " + std::to_string(qr.rank()) + " < " + std::to_string(design.cols()));
  }
  const Eigen::VectorXd beta = qr.solve(y);
  return (y - design * beta).squaredNorm();
}

}  // namespace

CausationScore causation_score(std::span<const double> cause, std::span<const double> effect,
                               std::size_t lags) {
  if (cause.size() != effect.size()) throw Error(ErrorCode::kLengthMismatch, "causation inputs");
  if (lags < 1) throw Error(ErrorCode::kInvalidConfig, "lags must be >= 1");
  if (effect.size() < 5 * lags || effect.size() < 2 * lags + 2 + lags) {
    throw Error(ErrorCode::kTooShort, "need >= " + std::to_string(5 * lags) + " points");
  }
  for (std::size_t i = 0; i < cause.size(); ++i) {
    if (!std::isfinite(cause[i]) || !std::isfinite(effect[i])) {
      throw Error(ErrorCode::kNonFiniteValue, "causation input row " + std::to_string(i));
    }
  }
  const auto p = static_cast<Eigen::Index>(lags);
  const auto rows = static_cast<Eigen::Index>(effect.size() - lags);
  Eigen::MatrixXd restricted(rows, 1 + p);
  Eigen::MatrixXd full(rows, 1 + 2 * p);
  Eigen::VectorXd y(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = static_cast<std::size_t>(r) + lags;
    y(r) = effect[t];
    restricted(r, 0) = 1.0;
    full(r, 0) = 1.0;
    for (Eigen::Index k = 1; k <= p; ++k) {
      const auto lagged = t - static_cast<std::size_t>(k);
      restricted(r, k) = effect[lagged];
      full(r, k) = effect[lagged];
      full(r, p + k) = cause[lagged];
    }
  }
  const double rss_r = ols_rss(restricted, y);
  const double rss_u = ols_rss(full, y);
  CausationScore out;
  out.df_num = lags;
  out.df_den = static_cast<std::size_t>(rows) - 2 * lags - 1;
  if (!(rss_u > 1e-12 * std::max(1.0, rss_r))) {
    throw Error(ErrorCode::kSingularRegression, "unrestricted model fits exactly");
  }
  out.f_stat = std::max(0.0, ((rss_r - rss_u) / static_cast<double>(out.df_num)) /
                                 (rss_u / static_cast<double>(out.df_den)));
  out.p_value = f_distribution_sf(out.f_stat, static_cast<double>(out.df_num),
                                  static_cast<double>(out.df_den));
  return out;
}

std::size_t RelationMatrix::commodity_row(const std::string& name) const {
  const auto it = std::find(commodities.begin(), commodities.end(), name);
  if (it == commodities.end()) throw Error(ErrorCode::kUnknownCommodity, name);
  return static_cast<std::size_t>(it - commodities.begin());
}

RelationMatrix build_relation_matrix(const MonthlyPanel& panel,
                                     const std::vector<std::string>& commodities,
                                     const std::vector<std::string>& indices,
                                     const RelationOptions& options) {
  RelationMatrix m;
  m.commodities = commodities;
  m.indices = indices;
  const auto nc = static_cast<Eigen::Index>(commodities.size());
  const auto ni = static_cast<Eigen::Index>(indices.size());
  m.correlation.setZero(nc, ni);
  m.causation.setZero(nc, ni);
  m.causation_p.setOnes(nc, ni);

  auto prepared = [&](const std::string& name) {
    std::vector<double> v = panel.column(name).values;
    if (options.difference) {
      for (std::size_t t = v.size() - 1; t > 0; --t) v[t] -= v[t - 1];
      v.erase(v.begin());
    }
    return v;
  };
  for (Eigen::Index c = 0; c < nc; ++c) {
    const auto effect = prepared(commodities[static_cast<std::size_t>(c)]);
    for (Eigen::Index i = 0; i < ni; ++i) {
      const auto cause = prepared(indices[static_cast<std::size_t>(i)]);
      m.correlation(c, i) = pearson(effect, cause);
      try {
        const auto score = causation_score(cause, effect, options.lags);
        m.causation(c, i) = score.f_stat;
        m.causation_p(c, i) = score.p_value;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kSingularRegression) throw;
      }
    }
  }
  return m;
}

std::vector<std::string> PairingResult::feature_indices() const {
  if (merged) return {caus_index};
  return {caus_index, corr_index};
}

PairingResult pair_features(const RelationMatrix& matrix, const std::string& commodity) {
  const auto row = static_cast<Eigen::Index>(matrix.commodity_row(commodity));
  if (matrix.indices.empty()) throw Error(ErrorCode::kInvalidConfig, "no indices");
  Eigen::Index corr_best = 0;
  Eigen::Index caus_best = 0;
  for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(matrix.indices.size()); ++i) {
    const double a = std::abs(matrix.correlation(row, i));
    const double b = std::abs(matrix.correlation(row, corr_best));
    // Ties on |correlation| go to the higher causation score, then list order.
    if (a > b || (a == b && matrix.causation(row, i) > matrix.causation(row, corr_best))) {
      corr_best = i;
    }
    if (matrix.causation(row, i) > matrix.causation(row, caus_best)) caus_best = i;
  }
  PairingResult out;
  out.commodity = commodity;
  out.corr_index = matrix.indices[static_cast<std::size_t>(corr_best)];
  out.corr_value = matrix.correlation(row, corr_best);
  out.caus_index = matrix.indices[static_cast<std::size_t>(caus_best)];
  out.caus_value = matrix.causation(row, caus_best);
  out.merged = corr_best == caus_best;
  return out;
}

namespace {

std::string matrix_csv(const RelationMatrix& m, const Eigen::MatrixXd& values) {
  std::ostringstream out;
  out << "commodity";
  for (const auto& name : m.indices) out << ',' << name;
  out << '\n';
  for (std::size_t c = 0; c < m.commodities.size(); ++c) {
    out << m.commodities[c];
    for (std::size_t i = 0; i < m.indices.size(); ++i) {
      out << ',' << format_number(values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace

void write_relation_csvs(const std::filesystem::path& dir, const RelationMatrix& matrix) {
  write_text_file(dir / "correlation.csv", matrix_csv(matrix, matrix.correlation));
  write_text_file(dir / "causation.csv", matrix_csv(matrix, matrix.causation));
  write_text_file(dir / "causation_pvalues.csv", matrix_csv(matrix, matrix.causation_p));
}

void write_pairing_csv(const std::filesystem::path& path, const std::vector<PairingResult>& pairs) {
  std::ostringstream out;
  out << "commodity,corr_index,corr_value,caus_index,caus_value,merged\n";
  for (const auto& p : pairs) {
    out << p.commodity << ',' << p.corr_index << ',' << format_number(p.corr_value) << ','
        << p.caus_index << ',' << format_number(p.caus_value) << ',' << (p.merged ? "true" : "false")
        << '\n';
  }
  write_text_file(path, out.str());
}

std::vector<PairingResult> read_pairing_csv(const std::filesystem::path& path) {
  const CsvTable t = parse_csv_table(read_text_file(path));
  const std::vector<std::string> expected = {"commodity", "corr_index", "corr_value",
                                             "caus_index", "caus_value", "merged"};
  if (t.header != expected) throw Error(ErrorCode::kFormatError, path.string() + ": bad header");
  std::vector<PairingResult> out;
  for (const auto& row : t.rows) {
    if (row.size() != expected.size()) throw Error(ErrorCode::kFormatError, path.string());
    PairingResult p;
    p.commodity = row[0];
    p.corr_index = row[1];
    p.corr_value = parse_double(row[2]).value_or(0.0);
    p.caus_index = row[3];
    p.caus_value = parse_double(row[4]).value_or(0.0);
    p.merged = row[5] == "true";
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace agshock
