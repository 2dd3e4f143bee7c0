#include "r2d2/distributions.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "r2d2/error.hpp"
#include "r2d2/linalg.hpp"

namespace r2d2::dist {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void require_positive(double x, const char* name) {
  if (!positive_finite(x)) {
    std::ostringstream os;
    os << name << " must be positive and finite (got " << x << ")";
    fail(ErrorKind::kParameter, os.str());
  }
}

// Marsaglia & Tsang (2000) for shape >= 1; returns log of the variate.
double log_gamma_mt(RandomStream& rs, double shape) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rs.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rs.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

}  // namespace

double log_gamma_variate(RandomStream& rs, double shape) {
  require_positive(shape, "gamma shape");
  if (shape >= 1.0) return log_gamma_mt(rs, shape);
  // Gamma(a) = Gamma(a + 1) * U^{1/a}
  const double lg = log_gamma_mt(rs, shape + 1.0);
  return lg + std::log(rs.uniform()) / shape;
}

double gamma(RandomStream& rs, double shape, double scale) {
  require_positive(scale, "gamma scale");
  return scale * std::exp(log_gamma_variate(rs, shape));
}

double gamma_rate(RandomStream& rs, double shape, double rate) {
  require_positive(rate, "gamma rate");
  return std::exp(log_gamma_variate(rs, shape)) / rate;
}

double inverse_gamma(RandomStream& rs, double shape, double scale) {
  require_positive(scale, "inverse-gamma scale");
  return scale * std::exp(-log_gamma_variate(rs, shape));
}

double beta(RandomStream& rs, double a, double b) {
  const double la = log_gamma_variate(rs, a);
  const double lb = log_gamma_variate(rs, b);
  // x / (x + y) evaluated in log space
  const double m = std::max(la, lb);
  return std::exp(la - m) / (std::exp(la - m) + std::exp(lb - m));
}

// --- GBP ------------------------------------------------------------------------

void GbpParams::validate() const {
  require_positive(a, "GBP a");
  require_positive(b, "GBP b");
  require_positive(c, "GBP c");
  require_positive(d, "GBP d");
}

double gbp_log_pdf(double x, const GbpParams& p) {
  p.validate();
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  if (x == 0.0) {
    const double ac = p.a * p.c;
    if (ac > 1.0) return -std::numeric_limits<double>::infinity();
    if (ac < 1.0) return std::numeric_limits<double>::infinity();
    return std::log(p.c / p.d) - log_beta_fn(p.a, p.b);
  }
  const double lr = std::log(x / p.d);
  // log(1 + (x/d)^c) without overflow
  const double t = p.c * lr;
  const double log1p_pow = t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
  return std::log(p.c) + (p.a * p.c - 1.0) * lr - (p.a + p.b) * log1p_pow - std::log(p.d) -
         log_beta_fn(p.a, p.b);
}

double gbp_pdf(double x, const GbpParams& p) {
  const double lp = gbp_log_pdf(x, p);
  return std::exp(lp);
}

double gbp_cdf(double x, const GbpParams& p) {
  p.validate();
  if (x <= 0.0) return 0.0;
  // U = (x/d)^c / (1 + (x/d)^c) is Beta(a, b)
  const double t = p.c * std::log(x / p.d);
  if (t > 0.0) {
    const double q = 1.0 / (1.0 + std::exp(t));  // 1 - U, accurate for large x
    return boost::math::ibetac(p.b, p.a, q);
  }
  const double u = std::exp(t) / (1.0 + std::exp(t));
  return boost::math::ibeta(p.a, p.b, u);
}

double gbp_from_beta(double u, const GbpParams& p) {
  p.validate();
  if (!(u > 0.0 && u < 1.0)) fail(ErrorKind::kParameter, "beta draw must lie in (0, 1)");
  return p.d * std::pow(u / (1.0 - u), 1.0 / p.c);
}

double gbp_sample(RandomStream& rs, const GbpParams& p) {
  p.validate();
  // Work with the odds ratio directly: U/(1-U) = Ga / Gb.
  const double log_odds = log_gamma_variate(rs, p.a) - log_gamma_variate(rs, p.b);
  return p.d * std::exp(log_odds / p.c);
}

double bp_sample_mixture(RandomStream& rs, double a, double b) {
  require_positive(a, "BP a");
  require_positive(b, "BP b");
  const double mixing = gamma(rs, b, 1.0);
  const double unit = gamma(rs, a, 1.0);
  return bp_from_mixture(mixing, unit);
}

double gbp_sample_ratio(RandomStream& rs, double a1, double b1, double a2, double b2) {
  const double x1 = gamma(rs, a1, b1);
  const double x2 = gamma(rs, a2, b2);
  return x1 / x2;
}

// --- GIG ------------------------------------------------------------------------

void GigParams::validate() const {
  require_positive(rho, "GIG rho");
  if (!std::isfinite(chi) || chi < 0.0) fail(ErrorKind::kParameter, "GIG chi must be >= 0");
  if (!std::isfinite(lambda)) fail(ErrorKind::kParameter, "GIG lambda must be finite");
  if (chi == 0.0 && lambda <= 0.0)
    fail(ErrorKind::kParameter, "GIG with chi = 0 requires lambda > 0");
}

double gig_log_kernel(double z, const GigParams& p) {
  if (z <= 0.0) return -std::numeric_limits<double>::infinity();
  return (p.lambda - 1.0) * std::log(z) - 0.5 * (p.rho * z + p.chi / z);
}

namespace {

// The generators below draw from the standardized two-parameter form
//   f(x) ~ x^{lambda-1} exp{-(omega/2)(x + 1/x)},  lambda >= 0,
// following Hormann & Leydold (2014): ratio-of-uniforms with and without
// mode shift, plus a piecewise hat for the small-omega, lambda < 1 corner.

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

double gig_rou_shift(RandomStream& rs, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) are roots of a cubic; solve with Cardano.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;

  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);

  for (;;) {
    const double u = uminus + rs.uniform() * (uplus - uminus);
    const double v = rs.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double gig_rou_noshift(RandomStream& rs, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  // maximizer of x sqrt(f(x))
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);

  for (;;) {
    const double u = um * rs.uniform();
    const double v = rs.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double gig_piecewise_hat(RandomStream& rs, double lambda, double omega) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);

  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  double area[3];
  area[0] = k0 * x0;

  double k1, k2;
  if (x0 >= 2.0 / omega) {
    k1 = 0.0;
    area[1] = 0.0;
    k2 = std::pow(x0, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area[1] = (lambda == 0.0) ? k1 * std::log(2.0 / (omega * omega))
                              : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area[0] + area[1] + area[2];

  for (;;) {
    double v = total * rs.uniform();
    double x, hx;
    if (v <= area[0]) {
      x = x0 * v / area[0];
      hx = k0;
    } else if ((v -= area[0]) <= area[1]) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + (lambda / k1 * v), 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area[1];
      const double lo = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rs.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

double gig_sample(RandomStream& rs, const GigParams& p) {
  p.validate();
  if (p.chi == 0.0) return gamma(rs, p.lambda, 2.0 / p.rho);

  const double omega = std::sqrt(p.rho * p.chi);
  const double alpha = std::sqrt(p.chi / p.rho);
  const double abs_lambda = std::abs(p.lambda);

  if (omega < 1e-14) {
    // chi * rho underflows the standardized form; use the gamma limits.
    if (p.lambda > 0.0) return gamma(rs, p.lambda, 2.0 / p.rho);
    if (p.lambda < 0.0) return inverse_gamma(rs, -p.lambda, p.chi / 2.0);
  }

  double x;
  if (abs_lambda > 2.0 || omega > 3.0) {
    x = gig_rou_shift(rs, abs_lambda, omega);
  } else if (abs_lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = gig_rou_noshift(rs, abs_lambda, omega);
  } else {
    x = gig_piecewise_hat(rs, abs_lambda, omega);
  }
  return p.lambda < 0.0 ? alpha / x : alpha * x;
}

// --- multivariate -----------------------------------------------------------------

Eigen::VectorXd standard_normal_vector(RandomStream& rs, Eigen::Index n) {
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z[i] = rs.normal();
  return z;
}

Eigen::VectorXd mvn_from_normals(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance,
                                 const Eigen::VectorXd& z) {
  if (covariance.rows() != mean.size() || z.size() != mean.size())
    fail(ErrorKind::kParameter, "mvn: dimension mismatch");
  const CholeskyFactor f = robust_cholesky(covariance);
  return mean + f.llt.matrixL() * z;
}

Eigen::VectorXd mvn_sample(RandomStream& rs, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& covariance) {
  return mvn_from_normals(mean, covariance, standard_normal_vector(rs, mean.size()));
}

Eigen::VectorXd dirichlet_sample(RandomStream& rs, const Eigen::VectorXd& concentration) {
  const Eigen::Index k = concentration.size();
  if (k == 0) fail(ErrorKind::kParameter, "dirichlet: empty concentration");
  Eigen::VectorXd lg(k);
  for (Eigen::Index i = 0; i < k; ++i) lg[i] = log_gamma_variate(rs, concentration[i]);
  const double m = lg.maxCoeff();
  Eigen::VectorXd x = (lg.array() - m).exp();
  return x / x.sum();
}

// --- log densities ----------------------------------------------------------------

double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

double log_normal_pdf(double x, double mean, double variance) {
  const double r = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

double log_gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double log_inverse_gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_dirichlet_pdf(const Eigen::VectorXd& x, const Eigen::VectorXd& concentration) {
  double out = std::lgamma(concentration.sum());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0) return -std::numeric_limits<double>::infinity();
    out += (concentration[i] - 1.0) * std::log(x[i]) - std::lgamma(concentration[i]);
  }
  return out;
}

}  // namespace r2d2::dist
