#pragma once

#include <Eigen/Dense>

namespace r2d2::spatial {

// n x 2 coordinates; distances are taken in whatever units the caller
// supplies (the ingestion layer rescales to the unit square).
struct Locations {
  Eigen::MatrixX2d coords;

  Eigen::Index size() const { return coords.rows(); }
  void validate() const;
};

enum class KernelFamily { kExponential, kMatern, kCompoundSymmetry, kBlockedCompoundSymmetry };

// Correlation family together with its range / correlation parameter.
// Matern smoothness is restricted to nu in {1/2, 3/2, 5/2}, stored as 2*nu.
class CorrelationKernel {
 public:
  static CorrelationKernel exponential(double rho);
  static CorrelationKernel matern(double nu, double rho);
  static CorrelationKernel compound_symmetry(double rho);
  static CorrelationKernel blocked_compound_symmetry(double rho, int blocks);

  KernelFamily family() const { return family_; }
  double rho() const { return rho_; }
  double nu() const { return 0.5 * twice_nu_; }
  int blocks() const { return blocks_; }
  bool distance_based() const {
    return family_ == KernelFamily::kExponential || family_ == KernelFamily::kMatern;
  }

  // Same family and shape parameters, new rho.
  CorrelationKernel with_rho(double rho) const;

  // Correlation at distance d (distance-based families only).
  double at_distance(double d) const;

 private:
  CorrelationKernel(KernelFamily f, double rho, int twice_nu, int blocks);
  void validate() const;

  KernelFamily family_;
  double rho_;
  int twice_nu_ = 1;
  int blocks_ = 1;
};

Eigen::MatrixXd distance_matrix(const Locations& locs);

// Dense correlation matrix: exactly symmetric with unit diagonal.
Eigen::MatrixXd correlation_matrix(const CorrelationKernel& kernel, const Locations& locs);
// Distance-based families from a precomputed distance matrix; the CS
// families only need n.
Eigen::MatrixXd correlation_from_distances(const CorrelationKernel& kernel, const Eigen::MatrixXd& d);

// P M with P = (I - 11'/n)/(n-1), in O(nk) without forming P.
Eigen::MatrixXd center_apply(const Eigen::MatrixXd& m);

struct TracePair {
  double trace = 0.0;     // tr(PB)
  double trace_sq = 0.0;  // tr(PBPB)
};

// O(n^2) after assembly: A = center_apply(B); tr(A) and sum_ij A_ij A_ji.
TracePair trace_pair(const Eigen::MatrixXd& b);

// Verification path: same quantities from the eigenvalues of the
// symmetrized C B C / (n-1). O(n^3).
TracePair trace_pair_eigen(const Eigen::MatrixXd& b);

}  // namespace r2d2::spatial
