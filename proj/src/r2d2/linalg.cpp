#include "r2d2/linalg.hpp"

#include <cmath>

#include "r2d2/error.hpp"

namespace r2d2 {

double CholeskyFactor::log_det() const {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double CholeskyFactor::inverse_quadratic(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd w = llt.matrixL().solve(x);
  return w.squaredNorm();
}

namespace {

bool factor_ok(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const auto d = llt.matrixLLT().diagonal();
  return (d.array() > 0.0).all() && d.allFinite();
}

}  // namespace

std::optional<CholeskyFactor> try_robust_cholesky(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0 || !a.allFinite()) return std::nullopt;
  CholeskyFactor out;
  out.llt.compute(a);
  if (factor_ok(out.llt)) return out;

  const double mean_diag = a.diagonal().mean();
  if (!(mean_diag > 0.0)) return std::nullopt;
  double jitter = 1e-10 * mean_diag;
  for (int attempt = 0; attempt < 3; ++attempt, jitter *= 10.0) {
    Eigen::MatrixXd b = a;
    b.diagonal().array() += jitter;
    out.llt.compute(b);
    if (factor_ok(out.llt)) {
      out.jitter = jitter;
      return out;
    }
  }
  return std::nullopt;
}

CholeskyFactor robust_cholesky(const Eigen::MatrixXd& a) {
  auto f = try_robust_cholesky(a);
  if (!f) fail(ErrorKind::kSingularCovariance, "covariance is not positive definite after jitter");
  return std::move(*f);
}

}  // namespace r2d2
