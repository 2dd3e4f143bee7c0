#include "r2d2/prior.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"
#include "r2d2/linalg.hpp"

namespace r2d2::prior {

VarianceSplit VarianceSplit::uniform(const ShareLayout& layout) {
  VarianceSplit s;
  s.layout = layout;
  s.phi = Eigen::VectorXd::Constant(layout.size(), 1.0 / layout.size());
  return s;
}

void VarianceSplit::validate() const {
  if (phi.size() != layout.size()) {
    std::ostringstream os;
    os << "variance split has " << phi.size() << " components, layout needs " << layout.size();
    fail(ErrorKind::kConfiguration, os.str());
  }
  if (!(phi.array() > 0.0).all() || !phi.allFinite())
    fail(ErrorKind::kParameter, "variance split components must be positive");
  if (std::abs(phi.sum() - 1.0) > 1e-12) fail(ErrorKind::kParameter, "variance split must sum to one");
}

Eigen::VectorXd VarianceSplit::coefficient_weights() const {
  const int p = layout.p;
  if (p == 0) return Eigen::VectorXd();
  if (layout.equal_fixed) return Eigen::VectorXd::Constant(p, phi[0] / p);
  return phi.head(p);
}

PriorShapeScale PriorShapeScale::from_moments(double mu, double sigma2) {
  if (!(mu >= 1e-8) || !(sigma2 >= 1e-12) || !std::isfinite(mu) || !std::isfinite(sigma2)) {
    std::ostringstream os;
    os << "degenerate prior: mu_S = " << mu << ", sigma2_S = " << sigma2;
    fail(ErrorKind::kDegeneratePrior, os.str());
  }
  PriorShapeScale s;
  s.mu_S = mu;
  s.sigma2_S = sigma2;
  s.alpha = mu * mu / sigma2;
  s.beta = sigma2 / mu;
  return s;
}

void R2Hyper::validate() const {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    fail(ErrorKind::kParameter, "R^2 beta hyperparameters must be positive");
}

namespace {

void check_design(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, const Eigen::MatrixXd& sigma,
                  const VarianceSplit& phi) {
  phi.validate();
  const Eigen::Index n = sigma.rows();
  if (sigma.cols() != n || (x.cols() > 0 && x.rows() != n) || (z.cols() > 0 && z.rows() != n))
    fail(ErrorKind::kConfiguration, "moment_match: dimension mismatch");
  if (x.cols() != phi.layout.p) fail(ErrorKind::kConfiguration, "moment_match: covariate count mismatch");
  if ((z.cols() > 0) != phi.layout.grouped)
    fail(ErrorKind::kConfiguration, "moment_match: grouping does not match layout");
}

// Frobenius norm squared of C S C for symmetric S, C the centering matrix.
double centered_frobenius_sq(const Eigen::MatrixXd& s) {
  const Eigen::VectorXd r = s.rowwise().mean();
  const double g = r.mean();
  const Eigen::Index n = s.rows();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += ((s.col(j).array() - r.array()) - (r[j] - g)).square().sum();
  }
  return acc;
}

}  // namespace

PriorShapeScale moment_match(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                             const Eigen::MatrixXd& sigma, const VarianceSplit& phi) {
  check_design(x, z, sigma, phi);
  Eigen::MatrixXd b = phi.spatial_weight() * sigma;
  if (x.cols() > 0) {
    const Eigen::VectorXd w = phi.coefficient_weights();
    b.noalias() += x * w.asDiagonal() * x.transpose();
  }
  if (z.cols() > 0) b.noalias() += phi.group_weight() * z * z.transpose();
  const spatial::TracePair tp = spatial::trace_pair(b);
  return PriorShapeScale::from_moments(tp.trace, 2.0 * tp.trace_sq);
}

MomentMatcher::MomentMatcher(const Eigen::MatrixXd& x, const GroupIndex& groups,
                             const ShareLayout& layout)
    : layout_(layout), n_(x.rows()) {
  if (x.cols() != layout.p) fail(ErrorKind::kConfiguration, "MomentMatcher: covariate count mismatch");
  if (groups.empty() == layout.grouped)
    fail(ErrorKind::kConfiguration, "MomentMatcher: grouping does not match layout");
  if (!groups.empty()) n_ = static_cast<Eigen::Index>(groups.level.size());

  auto center = [](const Eigen::MatrixXd& f) {
    return Eigen::MatrixXd(f.rowwise() - f.colwise().mean());
  };
  if (layout.p > 0) {
    if (layout.equal_fixed) {
      centered_.push_back(center(x / std::sqrt(static_cast<double>(layout.p))));
    } else {
      for (int j = 0; j < layout.p; ++j) centered_.push_back(center(x.col(j)));
    }
  }
  if (layout.grouped) centered_.push_back(center(groups.indicator()));

  const double nm1 = static_cast<double>(n_ - 1);
  const auto k = static_cast<Eigen::Index>(centered_.size());
  trace_.resize(k);
  pair_.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    trace_[i] = centered_[i].squaredNorm() / nm1;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = (centered_[i].transpose() * centered_[j]).squaredNorm() / (nm1 * nm1);
      pair_(i, j) = pair_(j, i) = v;
    }
  }
}

MomentMatcher::SpatialTerms MomentMatcher::spatial_terms(const Eigen::MatrixXd& sigma) const {
  if (sigma.rows() != n_) fail(ErrorKind::kConfiguration, "MomentMatcher: Sigma has wrong size");
  const double nm1 = static_cast<double>(n_ - 1);
  SpatialTerms st;
  st.trace = (sigma.trace() - sigma.sum() / static_cast<double>(n_)) / nm1;
  st.cross.resize(static_cast<Eigen::Index>(centered_.size()));
  for (std::size_t k = 0; k < centered_.size(); ++k) {
    const Eigen::MatrixXd& f = centered_[k];
    st.cross[static_cast<Eigen::Index>(k)] = (f.transpose() * sigma * f).trace() / (nm1 * nm1);
  }
  st.self = centered_frobenius_sq(sigma) / (nm1 * nm1);
  return st;
}

spatial::TracePair MomentMatcher::traces(const VarianceSplit& phi, const SpatialTerms& st) const {
  const auto k = static_cast<Eigen::Index>(centered_.size());
  const Eigen::VectorXd w = phi.phi.head(k);
  const double ws = phi.spatial_weight();
  spatial::TracePair tp;
  tp.trace = w.dot(trace_) + ws * st.trace;
  tp.trace_sq = w.dot(pair_ * w) + 2.0 * ws * w.dot(st.cross) + ws * ws * st.self;
  return tp;
}

PriorShapeScale MomentMatcher::match(const VarianceSplit& phi, const SpatialTerms& st) const {
  const spatial::TracePair tp = traces(phi, st);
  return PriorShapeScale::from_moments(tp.trace, 2.0 * tp.trace_sq);
}

std::pair<double, double> closed_form_cs(double rho, int n) {
  if (!(rho >= 0.0) || n < 2) fail(ErrorKind::kConfiguration, "closed_form_cs: need rho >= 0, n >= 2");
  if (rho >= 1.0) fail(ErrorKind::kDegeneratePrior, "compound symmetry with rho = 1: S is degenerate at zero");
  const double q = 1.0 - rho;
  return {q, 2.0 * q * q / (n - 1)};
}

double closed_form_blocked_cs(double rho, int n, int m) {
  if (m < 1 || n < 2 || n % m != 0) fail(ErrorKind::kConfiguration, "closed_form_blocked_cs: m must divide n");
  if (!(rho >= 0.0) || rho >= 1.0) fail(ErrorKind::kConfiguration, "closed_form_blocked_cs: rho in [0, 1)");
  return 1.0 - (1.0 / m) * (static_cast<double>(n - m) / (n - 1)) * rho;
}

double pairwise_mean_identity(const Eigen::MatrixXd& sigma) {
  const Eigen::Index n = sigma.rows();
  double upper = 0.0;
  for (Eigen::Index j = 1; j < n; ++j) upper += sigma.col(j).head(j).sum();
  return 1.0 - 2.0 / (static_cast<double>(n) * (n - 1)) * upper;
}

WPriorDraw w_prior_sample(RandomStream& rs, const R2Hyper& hyper, const PriorShapeScale& ss) {
  hyper.validate();
  WPriorDraw d;
  d.gamma = dist::gamma(rs, hyper.b, 1.0);
  d.u = dist::gamma(rs, hyper.a, 1.0 / d.gamma);
  d.v = dist::inverse_gamma(rs, ss.alpha, 1.0 / ss.beta);
  d.w = d.u * d.v;
  return d;
}

WMoments w_prior_moments(const R2Hyper& hyper, const PriorShapeScale& ss) {
  hyper.validate();
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double a = hyper.a, b = hyper.b, al = ss.alpha, be = ss.beta;
  WMoments m;
  m.mean = (al > 1.0 && b > 1.0) ? a / (be * (al - 1.0) * (b - 1.0)) : inf;
  if (al > 2.0 && b > 2.0) {
    const double t1 = a * (a + al - 1.0) / (be * be * (al - 2.0) * (al - 1.0) * (al - 1.0) * (b - 1.0) * (b - 2.0));
    const double t2 = a * a / (be * be * (al - 1.0) * (al - 1.0) * (b - 1.0) * (b - 1.0) * (b - 2.0));
    m.variance = t1 + t2;
  } else {
    m.variance = inf;
  }
  return m;
}

double average_marginal_variance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                                 const Eigen::MatrixXd& sigma, const VarianceSplit& phi,
                                 double sigma_sq, double w) {
  check_design(x, z, sigma, phi);
  const Eigen::Index n = sigma.rows();
  double tr = phi.spatial_weight() * sigma.trace();
  if (x.cols() > 0) tr += x.colwise().squaredNorm().dot(phi.coefficient_weights().transpose());
  if (z.cols() > 0) tr += phi.group_weight() * z.squaredNorm();
  return sigma_sq * w * tr / static_cast<double>(n);
}

PredictiveDraws prior_r2_simulate(RandomStream& rs, const R2Hyper& hyper,
                                  const PredictiveDesign& design, const PredictiveOptions& opts) {
  hyper.validate();
  const Eigen::Index n = design.distances.rows();
  ShareLayout layout{static_cast<int>(design.x.cols()), !design.groups.empty(), design.equal_fixed};
  const MomentMatcher matcher(design.x, design.groups, layout);
  const Eigen::MatrixXd z = design.groups.empty() ? Eigen::MatrixXd(n, 0) : design.groups.indicator();
  Eigen::VectorXd xi = opts.xi.size() ? opts.xi : Eigen::VectorXd::Ones(layout.size());
  if (xi.size() != layout.size()) fail(ErrorKind::kConfiguration, "prior_r2_simulate: xi has wrong length");

  VarianceSplit phi{layout, Eigen::VectorXd()};
  if (opts.fixed_phi) {
    phi.phi = *opts.fixed_phi;
    phi.validate();
  }

  // caches for the current rho
  double cached_rho = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd sigma, lower;
  MomentMatcher::SpatialTerms terms;

  PredictiveDraws out;
  out.r2.reserve(static_cast<std::size_t>(opts.n_draws));
  out.w.reserve(static_cast<std::size_t>(opts.n_draws));
  for (int it = 0; it < opts.n_draws; ++it) {
    if (!opts.fixed_phi) phi.phi = dist::dirichlet_sample(rs, xi);
    double rho = design.kernel.rho();
    if (!opts.fixed_rho) rho = std::exp(opts.log_rho_mean + std::sqrt(opts.log_rho_var) * rs.normal());
    if (!(rho == cached_rho)) {
      sigma = spatial::correlation_from_distances(design.kernel.with_rho(rho), design.distances);
      terms = matcher.spatial_terms(sigma);
      lower.resize(0, 0);
      cached_rho = rho;
    }
    // matched before factoring, so a degenerate kernel reports as such
    const PriorShapeScale ss = matcher.match(phi, terms);
    if (lower.size() == 0) lower = robust_cholesky(sigma).lower();
    const double w = opts.w_override ? *opts.w_override : w_prior_sample(rs, hyper, ss).w;
    const double scale = opts.sigma_sq * w;

    Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
    if (layout.p > 0) {
      const Eigen::VectorXd cw = phi.coefficient_weights();
      Eigen::VectorXd beta(layout.p);
      for (int j = 0; j < layout.p; ++j) beta[j] = std::sqrt(scale * cw[j]) * rs.normal();
      eta.noalias() += design.x * beta;
    }
    if (layout.grouped) {
      Eigen::VectorXd u(design.groups.levels);
      for (int l = 0; l < design.groups.levels; ++l) u[l] = std::sqrt(scale * phi.group_weight()) * rs.normal();
      eta.noalias() += z * u;
    }
    const Eigen::VectorXd zt = dist::standard_normal_vector(rs, n);
    eta.noalias() += std::sqrt(scale * phi.spatial_weight()) * (lower * zt);

    const double vn = (eta.array() - eta.mean()).square().sum() / static_cast<double>(n - 1);
    out.r2.push_back(vn / (vn + opts.sigma_sq));
    out.w.push_back(w);
  }
  return out;
}

}  // namespace r2d2::prior
