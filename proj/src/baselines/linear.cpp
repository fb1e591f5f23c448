#include <cmath>

#include "agshock/baselines.hpp"
#include "agshock/error.hpp"

namespace agshock {

Eigen::MatrixXd polynomial_features(const Eigen::MatrixXd& X, int degree) {
  if (degree != 1 && degree != 2) throw Error(ErrorCode::kInvalidConfig, "degree must be 1 or 2");
  if (degree == 1) return X;
  const Eigen::Index d = X.cols();
  Eigen::MatrixXd out(X.rows(), d + d * (d + 1) / 2);
  out.leftCols(d) = X;
  Eigen::Index col = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) out.col(col++) = X.col(i).cwiseProduct(X.col(j));
  }
  return out;
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != n_inputs) {
    throw Error(ErrorCode::kDimensionMismatch, "linear model expects " + std::to_string(n_inputs) +
                                                   " features, got " + std::to_string(X.cols()));
  }
  const Eigen::MatrixXd F = polynomial_features(X, degree);
  return (F * coefficients).array() + intercept;
}

LinearModel fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int degree,
                       double ridge) {
  if (X.rows() != y.size()) throw Error(ErrorCode::kDimensionMismatch, "X rows != y length");
  if (X.rows() < 1) throw Error(ErrorCode::kInsufficientSamples, "empty training set");
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::kNonFiniteValue, "linear fit input");

  const Eigen::MatrixXd F = polynomial_features(X, degree);
  Eigen::MatrixXd A(F.rows(), F.cols() + 1);
  A.col(0).setOnes();
  A.rightCols(F.cols()) = F;

  LinearModel model;
  model.degree = degree;
  model.n_inputs = static_cast<std::size_t>(X.cols());
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  model.rank_deficient = qr.rank() < A.cols();

  Eigen::VectorXd beta;
  if (model.rank_deficient) {
    Eigen::MatrixXd gram = A.transpose() * A;
    gram.diagonal().tail(F.cols()).array() += ridge;
    beta = gram.ldlt().solve(A.transpose() * y);
  } else {
    beta = qr.solve(y);
  }
  if (!beta.allFinite()) throw Error(ErrorCode::kSingularRegression, "normal equations diverged");
  model.intercept = beta(0);
  model.coefficients = beta.tail(F.cols());
  return model;
}

}  // namespace agshock
