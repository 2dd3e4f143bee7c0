#pragma once

#include <Eigen/Dense>

#include "r2d2/random.hpp"

// Random generation and densities for the distributions used by the prior
// and the sampler. Gamma-family arguments are always (shape, scale) unless
// the function name says otherwise.
namespace r2d2::dist {

// --- elementary variates ----------------------------------------------------

double gamma(RandomStream& rs, double shape, double scale);
double gamma_rate(RandomStream& rs, double shape, double rate);
// log of a Gamma(shape, 1) variate; stays finite for tiny shapes.
double log_gamma_variate(RandomStream& rs, double shape);
// Density proportional to x^{-shape-1} exp(-scale / x).
double inverse_gamma(RandomStream& rs, double shape, double scale);
double beta(RandomStream& rs, double a, double b);

// --- generalized beta prime -------------------------------------------------

struct GbpParams {
  double a = 1.0;  // shape
  double b = 1.0;  // shape
  double c = 1.0;  // power
  double d = 1.0;  // scale

  void validate() const;
};

double gbp_pdf(double x, const GbpParams& p);
double gbp_log_pdf(double x, const GbpParams& p);
double gbp_cdf(double x, const GbpParams& p);
// d * {u / (1 - u)}^{1/c}: maps a Beta(a, b) draw onto GBP(a, b, c, d).
double gbp_from_beta(double u, const GbpParams& p);
double gbp_sample(RandomStream& rs, const GbpParams& p);

// Beta prime through the gamma mixture: X | g ~ Gamma(a, 1/g), g ~ Gamma(b, 1).
// `unit_gamma` is a Gamma(a, 1) draw, so X = unit_gamma / mixing.
inline double bp_from_mixture(double mixing, double unit_gamma) { return unit_gamma / mixing; }
double bp_sample_mixture(RandomStream& rs, double a, double b);

// X1 / X2 with X1 ~ Gamma(a1, b1), X2 ~ Gamma(a2, b2); distributed GBP(a1, a2, 1, b1/b2).
double gbp_sample_ratio(RandomStream& rs, double a1, double b1, double a2, double b2);

// --- generalized inverse Gaussian -----------------------------------------

// Density proportional to z^{lambda-1} exp{-(rho z + chi / z) / 2}.
struct GigParams {
  double rho = 1.0;
  double chi = 1.0;
  double lambda = 0.0;

  void validate() const;
};

double gig_log_kernel(double z, const GigParams& p);
double gig_sample(RandomStream& rs, const GigParams& p);

// --- multivariate -----------------------------------------------------------

// mean + L z for the lower Cholesky factor L of `covariance` (jitter policy applies).
Eigen::VectorXd mvn_from_normals(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                 const Eigen::VectorXd& z);
Eigen::VectorXd mvn_sample(RandomStream& rs, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance);
Eigen::VectorXd standard_normal_vector(RandomStream& rs, Eigen::Index n);

Eigen::VectorXd dirichlet_sample(RandomStream& rs, const Eigen::VectorXd& concentration);

// --- log densities ------------------------------------------------------------

double log_normal_pdf(double x, double mean, double variance);
double log_gamma_pdf(double x, double shape, double scale);
double log_inverse_gamma_pdf(double x, double shape, double scale);
double log_dirichlet_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& concentration);
double log_beta_fn(double a, double b);

}  // namespace r2d2::dist
