#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "r2d2/design.hpp"
#include "r2d2/random.hpp"
#include "r2d2/spatial.hpp"

namespace r2d2::prior {

// Which simplex components exist. With equal_fixed the p coefficients share
// one component (each gets phi_fixed / p); otherwise one component per
// coefficient. Order: fixed shares, group share (if any), spatial share.
struct ShareLayout {
  int p = 0;
  bool grouped = false;
  bool equal_fixed = true;

  int fixed_shares() const { return p == 0 ? 0 : (equal_fixed ? 1 : p); }
  int size() const { return fixed_shares() + (grouped ? 1 : 0) + 1; }
  int group_index() const { return fixed_shares(); }
  int spatial_index() const { return size() - 1; }
};

struct VarianceSplit {
  ShareLayout layout;
  Eigen::VectorXd phi;

  static VarianceSplit uniform(const ShareLayout& layout);
  void validate() const;

  // Prior variance weight of each of the p coefficients.
  Eigen::VectorXd coefficient_weights() const;
  double group_weight() const { return layout.grouped ? phi[layout.group_index()] : 0.0; }
  double spatial_weight() const { return phi[layout.spatial_index()]; }
};

// Moment-matched gamma approximation of the centered quadratic form S:
// shape alpha = mu^2 / sigma2, scale beta = sigma2 / mu.
struct PriorShapeScale {
  double mu_S = 1.0;
  double sigma2_S = 1.0;
  double alpha = 1.0;
  double beta = 1.0;

  // Throws kDegeneratePrior when mu < 1e-8 or sigma2 < 1e-12.
  static PriorShapeScale from_moments(double mu, double sigma2);
};

struct R2Hyper {
  double a = 1.0;
  double b = 1.0;
  void validate() const;
};

// Assemble B = X Phi X' + phi_g Z Z' + phi_s Sigma and match moments from
// tr(PB), 2 tr(PBPB). `z` may be empty (no grouping factor).
PriorShapeScale moment_match(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& sigma, const VarianceSplit& phi);

// Same computation split into a design part (fixed once) and a
// correlation part (refreshed when Sigma changes); phi enters only through
// a K x K quadratic form, so re-matching for new phi is O(K^2).
class MomentMatcher {
 public:
  struct SpatialTerms {
    double trace = 0.0;     // tr(P Sigma)
    Eigen::VectorXd cross;  // tr(P B_k P Sigma) for each low-rank component
    double self = 0.0;      // tr(P Sigma P Sigma)
  };

  MomentMatcher(const Eigen::MatrixXd& x, const GroupIndex& groups, const ShareLayout& layout);

  SpatialTerms spatial_terms(const Eigen::MatrixXd& sigma) const;
  spatial::TracePair traces(const VarianceSplit& phi, const SpatialTerms& st) const;
  PriorShapeScale match(const VarianceSplit& phi, const SpatialTerms& st) const;

  const ShareLayout& layout() const { return layout_; }

 private:
  ShareLayout layout_;
  Eigen::Index n_ = 0;
  std::vector<Eigen::MatrixXd> centered_;  // C F_k for each low-rank component
  Eigen::VectorXd trace_;                  // tr(P F_k F_k')
  Eigen::MatrixXd pair_;                   // tr(P B_k P B_l)
};

// Compound symmetry without covariates: (mu_S, sigma2_S) = (1 - rho, 2(1-rho)^2/(n-1)).
std::pair<double, double> closed_form_cs(double rho, int n);
// m equal blocks of compound symmetry: mu_S = 1 - (n-m) rho / (m (n-1)).
double closed_form_blocked_cs(double rho, int n, int m);
// Any unit-diagonal Sigma without covariates: mu_S = 1 - 2/(n(n-1)) sum_{i<j} Sigma_ij.
double pairwise_mean_identity(const Eigen::MatrixXd& sigma);

struct WPriorDraw {
  double w = 0.0;
  double gamma = 0.0;
  double u = 0.0;
  double v = 0.0;
};

// gamma ~ Gamma(b, 1), U ~ Gamma(a, 1/gamma), V ~ IG(alpha, 1/beta), W = U V.
WPriorDraw w_prior_sample(RandomStream& rs, const R2Hyper& hyper, const PriorShapeScale& ss);

struct WMoments {
  double mean = 0.0;      // +inf unless alpha > 1 and b > 1
  double variance = 0.0;  // +inf unless alpha > 2 and b > 2
};

WMoments w_prior_moments(const R2Hyper& hyper, const PriorShapeScale& ss);

// (1/n) sum_i Var(eta_i) for eta = X beta + Z u + theta under the prior
// covariance sigma2 W (X Phi X' + phi_g ZZ' + phi_s Sigma).
double average_marginal_variance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                 const Eigen::MatrixXd& sigma, const VarianceSplit& phi,
                                 double sigma_sq, double w);

// Design for prior-predictive simulation of R^2.
struct PredictiveDesign {
  Eigen::MatrixXd x;          // standardized covariates (may have 0 columns)
  GroupIndex groups;
  Eigen::MatrixXd distances;  // n x n
  spatial::CorrelationKernel kernel = spatial::CorrelationKernel::exponential(0.5);
  bool equal_fixed = true;
};

struct PredictiveOptions {
  std::optional<Eigen::VectorXd> fixed_phi;  // otherwise phi ~ Dirichlet(xi)
  Eigen::VectorXd xi;                        // size layout.size(); empty -> all ones
  bool fixed_rho = true;                     // otherwise log rho ~ N(mean, var)
  double log_rho_mean = -2.0;
  double log_rho_var = 1.0;
  double sigma_sq = 1.0;
  std::optional<double> w_override;  // force W (e.g. 0)
  int n_draws = 10000;
};

struct PredictiveDraws {
  std::vector<double> r2;
  std::vector<double> w;
};

PredictiveDraws prior_r2_simulate(RandomStream& rs, const R2Hyper& hyper,
                                  const PredictiveDesign& design, const PredictiveOptions& opts);

}  // namespace r2d2::prior
