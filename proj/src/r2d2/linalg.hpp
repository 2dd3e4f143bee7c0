#pragma once

#include <Eigen/Dense>
#include <optional>

namespace r2d2 {

// Lower Cholesky factor of a (possibly jittered) SPD matrix.
struct CholeskyFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;  // amount added to the diagonal before factoring

  Eigen::MatrixXd lower() const { return llt.matrixL(); }
  double log_det() const;
  // x' A^{-1} x using the factor.
  double inverse_quadratic(const Eigen::VectorXd& x) const;
};

// Jitter policy: factor as-is; on failure add 1e-10 * mean(diag) to the
// diagonal and retry, escalating x10 up to three times. Returns nullopt
// when every attempt fails.
std::optional<CholeskyFactor> try_robust_cholesky(const Eigen::MatrixXd& a);

// Same as try_robust_cholesky but throws ErrorKind::kSingularCovariance.
CholeskyFactor robust_cholesky(const Eigen::MatrixXd& a);

}  // namespace r2d2
