// Vague and penalized-complexity comparison priors. Both put
// beta ~ N(0, sigma_beta_sq I) (not scaled by sigma2), u ~ N(0, sigma2 sigma_u_sq I)
// and theta ~ N(0, sigma2 sigma_theta_sq Sigma).
#include <cmath>

#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"
#include "r2d2/mcmc.hpp"

namespace r2d2::mcmc {

namespace {

void baseline_beta(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const Eigen::Index p = ctx.p();
  if (p == 0) return;
  const double sb = ctx.hyper().sigma_beta_sq;
  if (!ctx.likelihood()) {
    for (Eigen::Index j = 0; j < p; ++j) s.beta[j] = std::sqrt(sb) * rs.normal();
    return;
  }
  Eigen::VectorXd r = ctx.residual(s);
  r.noalias() += ctx.data().x * s.beta;
  Eigen::MatrixXd a = ctx.xtx() / s.sigma_sq;
  a.diagonal().array() += 1.0 / sb;
  const Eigen::VectorXd rhs = ctx.data().x.transpose() * r / s.sigma_sq;
  const CholeskyFactor f = robust_cholesky(a);
  const Eigen::VectorXd z = dist::standard_normal_vector(rs, p);
  s.beta = f.llt.solve(rhs) + f.llt.matrixU().solve(z);
}

void baseline_u(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const int levels = ctx.levels();
  if (levels == 0) return;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(levels);
  if (ctx.likelihood()) {
    const Eigen::VectorXd r = ctx.residual(s);
    const auto& lev = ctx.data().groups.level;
    for (std::size_t i = 0; i < lev.size(); ++i) sums[lev[i]] += r[static_cast<Eigen::Index>(i)];
    for (int l = 0; l < levels; ++l) sums[l] += ctx.counts()[static_cast<std::size_t>(l)] * s.u[l];
  }
  for (int l = 0; l < levels; ++l) {
    const double nl = ctx.likelihood() ? ctx.counts()[static_cast<std::size_t>(l)] : 0.0;
    const double prec = nl + 1.0 / s.sigma_u_sq;
    s.u[l] = sums[l] / prec + std::sqrt(s.sigma_sq / prec) * rs.normal();
  }
}

void baseline_sigma2(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const HyperParams& h = ctx.hyper();
  const double n = static_cast<double>(ctx.n());
  double shape = h.a0 + 0.5 * (n + ctx.levels());
  double rate = h.b0 + 0.5 * s.cache.chol.inverse_quadratic(s.theta) / s.sigma_theta_sq;
  if (ctx.levels() > 0) rate += 0.5 * s.u.squaredNorm() / s.sigma_u_sq;
  if (ctx.likelihood()) {
    shape += 0.5 * n;
    rate += 0.5 * ctx.residual(s).squaredNorm();
  }
  s.sigma_sq = dist::inverse_gamma(rs, shape, rate);
}

void vague_sigma_u(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  if (ctx.levels() == 0) return;
  const HyperParams& h = ctx.hyper();
  s.sigma_u_sq = dist::inverse_gamma(rs, h.vague_a + 0.5 * ctx.levels(), h.vague_b + 0.5 * s.u.squaredNorm() / s.sigma_sq);
}

void vague_sigma_theta(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const HyperParams& h = ctx.hyper();
  const double q = s.cache.chol.inverse_quadratic(s.theta);
  s.sigma_theta_sq =
      dist::inverse_gamma(rs, h.vague_a + 0.5 * static_cast<double>(ctx.n()), h.vague_b + 0.5 * q / s.sigma_sq);
}

// log target of t = log sigma_theta under the exponential prior
double pc_sigma_target(const ModelContext& ctx, const ChainState& s, double t, double q) {
  const double sd = std::exp(t);
  const double n = static_cast<double>(ctx.n());
  return -ctx.hyper().pc_sigma_rate() * sd + t - n * t - 0.5 * q / (s.sigma_sq * sd * sd);
}

bool pc_sigma_theta(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c3) {
  const double q = s.cache.chol.inverse_quadratic(s.theta);
  const double t = 0.5 * std::log(s.sigma_theta_sq);
  const double tp = t + c3 * rs.normal();
  const double log_u = std::log(rs.uniform());
  const double ratio = pc_sigma_target(ctx, s, tp, q) - pc_sigma_target(ctx, s, t, q);
  if (!(log_u < ratio)) return false;
  s.sigma_theta_sq = std::exp(2.0 * tp);
  return true;
}

double baseline_log_rho_prior(const HyperParams& h, double rho) {
  const double lr = std::log(rho);
  if (h.family == PriorFamily::kPC) {
    // IG(1, s) density in rho plus the log-scale Jacobian
    const double sc = h.pc_rho_scale();
    return std::log(sc) - 2.0 * lr - sc / rho + lr;
  }
  return dist::log_normal_pdf(lr, h.log_rho_mean, h.log_rho_var);
}

double baseline_rho_target(const ModelContext& ctx, const ChainState& s, const SpatialCache& c) {
  const double v = s.sigma_sq * s.sigma_theta_sq;
  return baseline_log_rho_prior(ctx.hyper(), c.rho) - 0.5 * c.chol.log_det() -
         0.5 * c.chol.inverse_quadratic(s.theta) / v;
}

bool baseline_rho(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c2) {
  const double prop = std::exp(std::log(s.rho) + c2 * rs.normal());
  const double log_u = std::log(rs.uniform());
  if (!(prop > 0.0) || !std::isfinite(prop)) return false;
  auto cache = ctx.try_make_cache(prop);
  if (!cache) return false;
  const double ratio = baseline_rho_target(ctx, s, *cache) - baseline_rho_target(ctx, s, s.cache);
  if (!(log_u < ratio)) return false;
  s.rho = prop;
  s.cache = std::move(*cache);
  return true;
}

}  // namespace

void baseline_sweep(const ModelContext& ctx, ChainState& s, RandomStream& rs, const TuningState& t,
                    const McmcConfig& cfg, SweepStats& stats) {
  const PriorFamily fam = ctx.hyper().family;
  if (fam == PriorFamily::kR2D2) fail(ErrorKind::kConfiguration, "baseline_sweep called for the R2D2 prior");
  step_beta0(ctx, s, rs);
  baseline_beta(ctx, s, rs);
  baseline_u(ctx, s, rs);
  draw_theta(ctx, s, rs, s.sigma_theta_sq, ctx.residual(s) + s.theta);
  baseline_sigma2(ctx, s, rs);
  vague_sigma_u(ctx, s, rs);
  if (fam == PriorFamily::kVague) {
    vague_sigma_theta(ctx, s, rs);
  } else {
    ++stats.sigma_theta.proposed;
    if (pc_sigma_theta(ctx, s, rs, t.c3)) ++stats.sigma_theta.accepted;
  }
  if (ctx.rho_moves() && !cfg.fix_rho) {
    ++stats.rho.proposed;
    if (baseline_rho(ctx, s, rs, t.c2)) ++stats.rho.accepted;
  }
}

}  // namespace r2d2::mcmc
