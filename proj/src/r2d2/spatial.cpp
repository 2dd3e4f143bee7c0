#include "r2d2/spatial.hpp"

#include <cmath>
#include <sstream>

#include "r2d2/error.hpp"

namespace r2d2::spatial {

void Locations::validate() const {
  if (coords.rows() < 2) fail(ErrorKind::kConfiguration, "need at least two locations");
  if (!coords.allFinite()) fail(ErrorKind::kInput, "location coordinates must be finite");
}

CorrelationKernel::CorrelationKernel(KernelFamily f, double rho, int twice_nu, int blocks)
    : family_(f), rho_(rho), twice_nu_(twice_nu), blocks_(blocks) {
  validate();
}

CorrelationKernel CorrelationKernel::exponential(double rho) {
  return CorrelationKernel(KernelFamily::kExponential, rho, 1, 1);
}

CorrelationKernel CorrelationKernel::matern(double nu, double rho) {
  const double twice = 2.0 * nu;
  const int t = static_cast<int>(std::lround(twice));
  if (std::abs(twice - t) > 1e-12 || (t != 1 && t != 3 && t != 5))
    fail(ErrorKind::kConfiguration, "Matern smoothness must be one of 0.5, 1.5, 2.5");
  return CorrelationKernel(KernelFamily::kMatern, rho, t, 1);
}

CorrelationKernel CorrelationKernel::compound_symmetry(double rho) {
  return CorrelationKernel(KernelFamily::kCompoundSymmetry, rho, 1, 1);
}

CorrelationKernel CorrelationKernel::blocked_compound_symmetry(double rho, int blocks) {
  return CorrelationKernel(KernelFamily::kBlockedCompoundSymmetry, rho, 1, blocks);
}

CorrelationKernel CorrelationKernel::with_rho(double rho) const {
  return CorrelationKernel(family_, rho, twice_nu_, blocks_);
}

void CorrelationKernel::validate() const {
  if (!std::isfinite(rho_)) fail(ErrorKind::kConfiguration, "kernel rho must be finite");
  if (distance_based()) {
    if (rho_ <= 0.0) fail(ErrorKind::kConfiguration, "range parameter rho must be positive");
  } else {
    if (rho_ < 0.0 || rho_ > 1.0)
      fail(ErrorKind::kConfiguration, "compound-symmetry rho must lie in [0, 1]");
    if (blocks_ < 1) fail(ErrorKind::kConfiguration, "block count must be >= 1");
  }
}

double CorrelationKernel::at_distance(double d) const {
  const double r = d / rho_;
  switch (twice_nu_) {
    case 1:
      return std::exp(-r);
    case 3: {
      const double s = std::sqrt(3.0) * r;
      return (1.0 + s) * std::exp(-s);
    }
    default: {
      const double s = std::sqrt(5.0) * r;
      return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
}

Eigen::MatrixXd distance_matrix(const Locations& locs) {
  locs.validate();
  const Eigen::Index n = locs.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = (locs.coords.row(i) - locs.coords.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Eigen::MatrixXd correlation_from_distances(const CorrelationKernel& kernel, const Eigen::MatrixXd& d) {
  const Eigen::Index n = d.rows();
  Eigen::MatrixXd s(n, n);
  switch (kernel.family()) {
    case KernelFamily::kExponential:
      s = (-d.array() / kernel.rho()).exp().matrix();
      break;
    case KernelFamily::kMatern:
      for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j; i < n; ++i) s(i, j) = s(j, i) = kernel.at_distance(d(i, j));
      break;
    case KernelFamily::kCompoundSymmetry:
      s.setConstant(kernel.rho());
      break;
    case KernelFamily::kBlockedCompoundSymmetry: {
      const int m = kernel.blocks();
      if (n % m != 0) {
        std::ostringstream os;
        os << "blocked compound symmetry: " << m << " blocks do not divide n = " << n;
        fail(ErrorKind::kConfiguration, os.str());
      }
      const Eigen::Index size = n / m;
      s.setZero();
      for (int b = 0; b < m; ++b) s.block(b * size, b * size, size, size).setConstant(kernel.rho());
      break;
    }
  }
  // exact symmetry and unit diagonal regardless of rounding in exp()
  s = (0.5 * (s + s.transpose())).eval();
  s.diagonal().setOnes();
  return s;
}

Eigen::MatrixXd correlation_matrix(const CorrelationKernel& kernel, const Locations& locs) {
  return correlation_from_distances(kernel, distance_matrix(locs));
}

Eigen::MatrixXd center_apply(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n < 2) fail(ErrorKind::kConfiguration, "center_apply needs n >= 2");
  const Eigen::RowVectorXd means = m.colwise().mean();
  return (m.rowwise() - means) / static_cast<double>(n - 1);
}

TracePair trace_pair(const Eigen::MatrixXd& b) {
  const Eigen::MatrixXd a = center_apply(b);
  TracePair out;
  out.trace = a.trace();
  out.trace_sq = a.cwiseProduct(a.transpose()).sum();
  return out;
}

TracePair trace_pair_eigen(const Eigen::MatrixXd& b) {
  const Eigen::Index n = b.rows();
  // C B C / (n-1) is symmetric and shares the spectrum of PB.
  Eigen::MatrixXd cbc = center_apply(b) * static_cast<double>(n - 1);
  cbc = center_apply(cbc.transpose().eval());
  cbc = 0.5 * (cbc + cbc.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cbc, Eigen::EigenvaluesOnly);
  TracePair out;
  out.trace = es.eigenvalues().sum();
  out.trace_sq = es.eigenvalues().squaredNorm();
  return out;
}

}  // namespace r2d2::spatial
