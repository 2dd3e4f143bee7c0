#include "r2d2/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"

namespace r2d2::mcmc {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPhiFloor = 1e-8;

ModelData validated(ModelData d) {
  d.validate();
  return d;
}
}  // namespace

const char* family_name(PriorFamily f) {
  switch (f) {
    case PriorFamily::kR2D2:
      return "r2d2";
    case PriorFamily::kVague:
      return "vague";
    case PriorFamily::kPC:
      return "pc";
  }
  return "?";
}

void ModelData::validate() const {
  const Eigen::Index n = y.size();
  if (n < 2) fail(ErrorKind::kInput, "need at least two observations");
  if (!y.allFinite()) fail(ErrorKind::kInput, "response contains non-finite values");
  if (x.rows() != n && x.cols() > 0) fail(ErrorKind::kInput, "covariate rows do not match response length");
  if (!x.allFinite()) fail(ErrorKind::kInput, "covariates contain non-finite values");
  if (!covariate_names.empty() && static_cast<Eigen::Index>(covariate_names.size()) != x.cols())
    fail(ErrorKind::kInput, "covariate names do not match covariate columns");
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).mean();
    const double ss = x.col(j).squaredNorm();
    if (std::abs(m) > 1e-8 || std::abs(ss - static_cast<double>(n)) > 1e-8 * n)
      fail(ErrorKind::kInput, "covariates must be standardized (mean 0, sum of squares n)");
  }
  if (!groups.empty()) {
    if (static_cast<Eigen::Index>(groups.level.size()) != n)
      fail(ErrorKind::kInput, "group labels do not match response length");
    for (int l : groups.level)
      if (l < 0 || l >= groups.levels) fail(ErrorKind::kInput, "group level out of range");
  }
  if (locations.size() != n) fail(ErrorKind::kInput, "locations do not match response length");
  locations.validate();
}

void HyperParams::validate() const {
  r2.validate();
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::kParameter, std::string(name) + " must be positive");
  };
  positive(sigma0_sq, "sigma0_sq");
  positive(a0, "a0");
  positive(b0, "b0");
  positive(log_rho_var, "log_rho_var");
  positive(sigma_beta_sq, "sigma_beta_sq");
  positive(vague_a, "vague_a");
  positive(vague_b, "vague_b");
  positive(pc_sigma0, "pc_sigma0");
  positive(pc_rho0, "pc_rho0");
  if (!std::isfinite(mu0) || !std::isfinite(log_rho_mean)) fail(ErrorKind::kParameter, "prior means must be finite");
  if (!(pc_alpha > 0.0 && pc_alpha < 1.0)) fail(ErrorKind::kParameter, "pc_alpha must lie in (0, 1)");
  if (xi.size() && !(xi.array() > 0.0).all()) fail(ErrorKind::kParameter, "xi must be positive");
}

double HyperParams::pc_sigma_rate() const { return -std::log(pc_alpha) / pc_sigma0; }
double HyperParams::pc_rho_scale() const { return -std::log(pc_alpha) * pc_rho0; }

void McmcConfig::validate() const {
  if (burnin < 0 || iters < 1) fail(ErrorKind::kConfiguration, "need burnin >= 0 and iters >= 1");
  if (thin < 1) fail(ErrorKind::kConfiguration, "thin must be >= 1");
  if (chains < 1) fail(ErrorKind::kConfiguration, "chains must be >= 1");
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(c3 > 0.0)) fail(ErrorKind::kConfiguration, "proposal scales must be positive");
  if (adapt_interval < 1) fail(ErrorKind::kConfiguration, "adapt_interval must be >= 1");
  if (rho_init && !(*rho_init > 0.0)) fail(ErrorKind::kConfiguration, "rho_init must be positive");
}

ModelContext::ModelContext(ModelData data, HyperParams hyper, bool likelihood)
    : data_(validated(std::move(data))),
      hyper_(std::move(hyper)),
      likelihood_(likelihood),
      layout_{static_cast<int>(data_.p()), !data_.groups.empty(), hyper_.equal_fixed},
      matcher_(data_.x, data_.groups, layout_) {
  hyper_.validate();
  const Eigen::Index n = data_.n();
  if (data_.kernel.distance_based())
    distances_ = spatial::distance_matrix(data_.locations);
  else
    distances_ = Eigen::MatrixXd::Zero(n, n);
  xtx_ = data_.x.transpose() * data_.x;
  counts_ = data_.groups.counts();
  xi_ = hyper_.xi.size() ? hyper_.xi : Eigen::VectorXd::Ones(layout_.size());
  if (xi_.size() != layout_.size()) {
    std::ostringstream os;
    os << "xi has " << xi_.size() << " entries, the variance split has " << layout_.size();
    fail(ErrorKind::kConfiguration, os.str());
  }
}

void ModelContext::set_response(const Eigen::VectorXd& y) {
  if (y.size() != data_.n()) fail(ErrorKind::kInput, "set_response: wrong length");
  data_.y = y;
}

std::optional<SpatialCache> ModelContext::try_make_cache(double rho) const {
  SpatialCache c;
  c.rho = rho;
  const auto kernel = data_.kernel.distance_based() ? data_.kernel.with_rho(rho) : data_.kernel;
  c.sigma = spatial::correlation_from_distances(kernel, distances_);
  auto chol = try_robust_cholesky(c.sigma);
  if (!chol) return std::nullopt;
  c.chol = std::move(*chol);
  if (hyper_.family == PriorFamily::kR2D2) c.terms = matcher_.spatial_terms(c.sigma);
  return c;
}

SpatialCache ModelContext::make_cache(double rho) const {
  auto c = try_make_cache(rho);
  if (!c) {
    std::ostringstream os;
    os << "correlation matrix at rho = " << rho << " is not positive definite";
    fail(ErrorKind::kSingularCovariance, os.str());
  }
  return std::move(*c);
}

Eigen::VectorXd ModelContext::linear_predictor(const ChainState& s) const {
  Eigen::VectorXd eta = s.theta.array() + s.beta0;
  if (p() > 0) eta.noalias() += data_.x * s.beta;
  for (Eigen::Index i = 0; i < data_.n() && levels() > 0; ++i)
    eta[i] += s.u[data_.groups.level[static_cast<std::size_t>(i)]];
  return eta;
}

Eigen::VectorXd ModelContext::residual(const ChainState& s) const { return data_.y - linear_predictor(s); }

double r2_of(const ModelContext& ctx, const ChainState& s) {
  const Eigen::VectorXd eta = ctx.linear_predictor(s);
  const double v = (eta.array() - eta.mean()).square().sum() / static_cast<double>(eta.size() - 1);
  return v / (v + s.sigma_sq);
}

ChainState initial_state(const ModelContext& ctx, const McmcConfig& cfg) {
  const HyperParams& h = ctx.hyper();
  const Eigen::VectorXd& y = ctx.data().y;
  const Eigen::Index n = ctx.n();
  ChainState s;
  s.beta0 = y.mean();
  s.beta = Eigen::VectorXd::Zero(ctx.p());
  s.u = Eigen::VectorXd::Zero(ctx.levels());
  s.theta = Eigen::VectorXd::Zero(n);
  const double var = (y.array() - y.mean()).square().sum() / static_cast<double>(n - 1);
  s.sigma_sq = var > 0.0 ? var : 1.0;
  s.phi = prior::VarianceSplit::uniform(ctx.layout());
  if (ctx.rho_moves())
    s.rho = cfg.rho_init ? *cfg.rho_init : std::exp(h.log_rho_mean);
  else
    s.rho = ctx.data().kernel.rho();
  s.cache = ctx.make_cache(s.rho);
  s.gamma = h.r2.b;
  s.U = h.r2.a;
  if (h.family == PriorFamily::kR2D2) {
    s.ss = ctx.matcher().match(s.phi, s.cache.terms);
    const double scale = 1.0 / s.ss.beta;
    const double v0 = s.ss.alpha > 1.0 ? scale / (s.ss.alpha - 1.0) : scale / (s.ss.alpha + 1.0);
    s.V = std::clamp(v0, 1e-6, 1e6);
  }
  s.sigma_theta_sq = 1.0;
  s.sigma_u_sq = 1.0;
  return s;
}

ChainState prior_draw(const ModelContext& ctx, RandomStream& rs, bool rho_random) {
  const HyperParams& h = ctx.hyper();
  const Eigen::Index n = ctx.n();
  ChainState s;
  s.beta0 = h.mu0 + std::sqrt(h.sigma0_sq) * rs.normal();
  s.sigma_sq = dist::inverse_gamma(rs, h.a0, h.b0);
  s.phi.layout = ctx.layout();
  s.phi.phi = dist::dirichlet_sample(rs, ctx.xi());
  s.rho = ctx.data().kernel.rho();
  if (ctx.rho_moves() && rho_random) s.rho = std::exp(h.log_rho_mean + std::sqrt(h.log_rho_var) * rs.normal());
  s.cache = ctx.make_cache(s.rho);
  s.ss = ctx.matcher().match(s.phi, s.cache.terms);
  const prior::WPriorDraw wd = prior::w_prior_sample(rs, h.r2, s.ss);
  s.gamma = wd.gamma;
  s.U = wd.u;
  s.V = wd.v;
  const double scale = s.sigma_sq * s.w();
  const Eigen::VectorXd cw = s.phi.coefficient_weights();
  s.beta.resize(ctx.p());
  for (Eigen::Index j = 0; j < ctx.p(); ++j) s.beta[j] = std::sqrt(scale * cw[j]) * rs.normal();
  s.u.resize(ctx.levels());
  for (int l = 0; l < ctx.levels(); ++l) s.u[l] = std::sqrt(scale * s.phi.group_weight()) * rs.normal();
  const Eigen::VectorXd z = dist::standard_normal_vector(rs, n);
  s.theta = s.cache.chol.llt.matrixL() * z;
  s.theta *= std::sqrt(scale * s.phi.spatial_weight());
  return s;
}

// --- Gibbs steps -------------------------------------------------------------

void step_beta0(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const HyperParams& h = ctx.hyper();
  if (!ctx.likelihood()) {
    s.beta0 = h.mu0 + std::sqrt(h.sigma0_sq) * rs.normal();
    return;
  }
  const double r = ctx.residual(s).sum() + static_cast<double>(ctx.n()) * s.beta0;
  const double prec = static_cast<double>(ctx.n()) / s.sigma_sq + 1.0 / h.sigma0_sq;
  const double mean = (r / s.sigma_sq + h.mu0 / h.sigma0_sq) / prec;
  s.beta0 = mean + std::sqrt(1.0 / prec) * rs.normal();
}

namespace {

// beta | rest when beta ~ N(0, sigma2 diag(d)) (scaled) or N(0, diag(d)) (unscaled).
void draw_beta(const ModelContext& ctx, ChainState& s, RandomStream& rs, const Eigen::VectorXd& d, bool scaled) {
  const Eigen::Index p = ctx.p();
  if (p == 0) return;
  if (!ctx.likelihood()) {
    const double f = scaled ? s.sigma_sq : 1.0;
    for (Eigen::Index j = 0; j < p; ++j) s.beta[j] = std::sqrt(f * d[j]) * rs.normal();
    return;
  }
  Eigen::VectorXd r = ctx.residual(s);
  r.noalias() += ctx.data().x * s.beta;
  // precision in units of 1/sigma2 when scaled, absolute otherwise
  Eigen::MatrixXd a = ctx.xtx();
  Eigen::VectorXd rhs = ctx.data().x.transpose() * r;
  const double noise = scaled ? 1.0 : 1.0 / s.sigma_sq;
  a *= noise;
  rhs *= noise;
  a.diagonal().array() += d.array().inverse();
  const CholeskyFactor f = robust_cholesky(a);
  Eigen::VectorXd mean = f.llt.solve(rhs);
  const Eigen::VectorXd z = dist::standard_normal_vector(rs, p);
  const Eigen::VectorXd dev = f.llt.matrixU().solve(z);
  s.beta = mean + (scaled ? std::sqrt(s.sigma_sq) : 1.0) * dev;
}

// u | rest when u ~ N(0, sigma2 v I).
void draw_u(const ModelContext& ctx, ChainState& s, RandomStream& rs, double v) {
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
    const double prec = nl + 1.0 / v;
    s.u[l] = sums[l] / prec + std::sqrt(s.sigma_sq / prec) * rs.normal();
  }
}

}  // namespace

void step_beta(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  draw_beta(ctx, s, rs, s.w() * s.phi.coefficient_weights(), true);
}

void step_u(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  draw_u(ctx, s, rs, s.w() * s.phi.group_weight());
}

void draw_theta(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c, const Eigen::VectorXd& m) {
  const Eigen::Index n = ctx.n();
  const Eigen::VectorXd z1 = dist::standard_normal_vector(rs, n);
  Eigen::VectorXd prior_part = s.cache.chol.llt.matrixL() * z1;
  prior_part *= std::sqrt(s.sigma_sq * c);
  if (!ctx.likelihood()) {
    s.theta = prior_part;
    return;
  }
  // Conditioning a prior draw on the pseudo-observation m = theta + e.
  const Eigen::VectorXd z2 = dist::standard_normal_vector(rs, n);
  const Eigen::VectorXd r = m - prior_part - std::sqrt(s.sigma_sq) * z2;
  Eigen::MatrixXd a = c * s.cache.sigma;
  a.diagonal().array() += 1.0;
  const CholeskyFactor f = robust_cholesky(a);
  s.theta = prior_part + r - f.llt.solve(r);
}

void step_theta(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  Eigen::VectorXd m = ctx.residual(s) + s.theta;
  draw_theta(ctx, s, rs, s.w() * s.phi.spatial_weight(), m);
}

double r2d2_quadratic(const ModelContext& ctx, const ChainState& s) {
  double q = 0.0;
  if (ctx.p() > 0) q += (s.beta.array().square() / s.phi.coefficient_weights().array()).sum();
  if (ctx.levels() > 0) q += s.u.squaredNorm() / s.phi.group_weight();
  q += s.cache.chol.inverse_quadratic(s.theta) / s.phi.spatial_weight();
  return q;
}

namespace {
double effect_count(const ModelContext& ctx) {
  return static_cast<double>(ctx.n() + ctx.p() + ctx.levels());
}
}  // namespace

void step_sigma2(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const HyperParams& h = ctx.hyper();
  double shape = h.a0 + 0.5 * effect_count(ctx);
  double rate = h.b0 + 0.5 * r2d2_quadratic(ctx, s) / s.w();
  if (ctx.likelihood()) {
    shape += 0.5 * static_cast<double>(ctx.n());
    rate += 0.5 * ctx.residual(s).squaredNorm();
  }
  s.sigma_sq = dist::inverse_gamma(rs, shape, rate);
}

void step_U(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const prior::R2Hyper& r2 = ctx.hyper().r2;
  dist::GigParams g;
  g.rho = 2.0 * s.gamma;
  g.chi = r2d2_quadratic(ctx, s) / (s.sigma_sq * s.V);
  g.lambda = r2.a - 0.5 * effect_count(ctx);
  if (g.chi == 0.0 && g.lambda <= 0.0) {
    s.U = dist::gamma(rs, r2.a, 1.0 / s.gamma);
    return;
  }
  s.U = dist::gig_sample(rs, g);
}

void step_V(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const double shape = s.ss.alpha + 0.5 * effect_count(ctx);
  const double scale = 1.0 / s.ss.beta + 0.5 * r2d2_quadratic(ctx, s) / (s.sigma_sq * s.U);
  s.V = dist::inverse_gamma(rs, shape, scale);
}

void step_gamma(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  const prior::R2Hyper& r2 = ctx.hyper().r2;
  s.gamma = dist::gamma_rate(rs, r2.a + r2.b, 1.0 + s.U);
}

// --- Metropolis-Hastings steps ---------------------------------------------

double log_phi_target(const ModelContext& ctx, const ChainState& s, const Eigen::VectorXd& phi) {
  prior::VarianceSplit split{ctx.layout(), phi};
  prior::PriorShapeScale ss;
  try {
    ss = ctx.matcher().match(split, s.cache.terms);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegeneratePrior) return kNegInf;
    throw;
  }
  const double v = s.sigma_sq * s.w();
  double lp = dist::log_dirichlet_pdf(phi, ctx.xi());
  if (ctx.p() > 0) {
    const Eigen::ArrayXd w = v * split.coefficient_weights().array();
    lp += -0.5 * w.log().sum() - 0.5 * (s.beta.array().square() / w).sum();
  }
  if (ctx.levels() > 0) {
    const double w = v * split.group_weight();
    lp += -0.5 * ctx.levels() * std::log(w) - 0.5 * s.u.squaredNorm() / w;
  }
  const double ws = v * split.spatial_weight();
  lp += -0.5 * static_cast<double>(ctx.n()) * std::log(ws) - 0.5 * s.cache.chol.inverse_quadratic(s.theta) / ws;
  lp += dist::log_inverse_gamma_pdf(s.V, ss.alpha, 1.0 / ss.beta);
  return lp;
}

bool step_phi_mh(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c1) {
  const Eigen::VectorXd& cur = s.phi.phi;
  const Eigen::VectorXd prop = dist::dirichlet_sample(rs, c1 * cur);
  const double log_u = std::log(rs.uniform());
  if (prop.minCoeff() < kPhiFloor) return false;
  const double target = log_phi_target(ctx, s, prop);
  if (target == kNegInf) return false;
  const double log_ratio = target - log_phi_target(ctx, s, cur) + dist::log_dirichlet_pdf(cur, c1 * prop) -
                           dist::log_dirichlet_pdf(prop, c1 * cur);
  if (!(log_u < log_ratio)) return false;
  s.phi.phi = prop;
  s.ss = ctx.matcher().match(s.phi, s.cache.terms);
  return true;
}

double log_rho_target(const ModelContext& ctx, const ChainState& s, const SpatialCache& cache,
                      const prior::PriorShapeScale& ss) {
  const HyperParams& h = ctx.hyper();
  const double ws = s.sigma_sq * s.w() * s.phi.spatial_weight();
  double lp = dist::log_normal_pdf(std::log(cache.rho), h.log_rho_mean, h.log_rho_var);
  lp += -0.5 * cache.chol.log_det() - 0.5 * cache.chol.inverse_quadratic(s.theta) / ws;
  lp += dist::log_inverse_gamma_pdf(s.V, ss.alpha, 1.0 / ss.beta);
  return lp;
}

bool step_rho_mh(const ModelContext& ctx, ChainState& s, RandomStream& rs, double c2) {
  const double prop_rho = std::exp(std::log(s.rho) + c2 * rs.normal());
  const double log_u = std::log(rs.uniform());
  if (!(prop_rho > 0.0) || !std::isfinite(prop_rho)) return false;
  auto cache = ctx.try_make_cache(prop_rho);
  if (!cache) return false;
  prior::PriorShapeScale ss;
  try {
    ss = ctx.matcher().match(s.phi, cache->terms);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegeneratePrior) return false;
    throw;
  }
  const double log_ratio = log_rho_target(ctx, s, *cache, ss) - log_rho_target(ctx, s, s.cache, s.ss);
  if (!(log_u < log_ratio)) return false;
  s.rho = prop_rho;
  s.cache = std::move(*cache);
  s.ss = ss;
  return true;
}

void adapt_proposals(TuningState& t, std::optional<double> phi_rate, std::optional<double> rho_rate,
                     std::optional<double> sigma_rate) {
  if (phi_rate) {
    if (*phi_rate < 0.2)
      t.c1 *= 2.0;
    else if (*phi_rate > 0.5)
      t.c1 /= 2.0;
  }
  auto walk = [](double& c, std::optional<double> rate) {
    if (!rate) return;
    if (*rate < 0.2)
      c /= 1.5;
    else if (*rate > 0.5)
      c *= 1.5;
  };
  walk(t.c2, rho_rate);
  walk(t.c3, sigma_rate);
}

void sweep(const ModelContext& ctx, ChainState& s, RandomStream& rs, const TuningState& t,
           const McmcConfig& cfg, SweepStats& stats) {
  step_beta0(ctx, s, rs);
  step_beta(ctx, s, rs);
  step_u(ctx, s, rs);
  step_theta(ctx, s, rs);
  step_sigma2(ctx, s, rs);
  step_U(ctx, s, rs);
  step_V(ctx, s, rs);
  step_gamma(ctx, s, rs);
  if (ctx.layout().size() > 1) {
    ++stats.phi.proposed;
    if (step_phi_mh(ctx, s, rs, t.c1)) ++stats.phi.accepted;
  }
  if (ctx.rho_moves() && !cfg.fix_rho) {
    ++stats.rho.proposed;
    if (step_rho_mh(ctx, s, rs, t.c2)) ++stats.rho.accepted;
  }
}

// --- output ------------------------------------------------------------------

Eigen::Index PosteriorSamples::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Eigen::Index>(it - names.begin());
}

Eigen::VectorXd PosteriorSamples::values(const std::string& name) const {
  const Eigen::Index c = column(name);
  if (c < 0) fail(ErrorKind::kConfiguration, "no sampled quantity named " + name);
  return draws.col(c);
}

std::vector<std::string> sample_names(const ModelContext& ctx, bool store_theta) {
  std::vector<std::string> names{"beta0"};
  const auto& cov = ctx.data().covariate_names;
  for (Eigen::Index j = 0; j < ctx.p(); ++j)
    names.push_back("beta_" + (cov.empty() ? std::to_string(j + 1) : cov[static_cast<std::size_t>(j)]));
  for (int l = 0; l < ctx.levels(); ++l) names.push_back("u_" + std::to_string(l + 1));
  names.push_back("sigma_sq");
  if (ctx.hyper().family == PriorFamily::kR2D2) {
    for (const char* n : {"W", "U", "V", "gamma"}) names.emplace_back(n);
    for (int k = 0; k < ctx.layout().size(); ++k) names.push_back("phi_" + std::to_string(k + 1));
  } else if (ctx.levels() > 0) {
    names.emplace_back("sigma_u_sq");
  }
  names.emplace_back("sigma_theta_sq");
  names.emplace_back("rho");
  names.emplace_back("R2");
  if (store_theta)
    for (Eigen::Index i = 0; i < ctx.n(); ++i) names.push_back("theta_" + std::to_string(i + 1));
  return names;
}

void record(const ModelContext& ctx, const ChainState& s, bool store_theta, Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  Eigen::Index k = 0;
  row[k++] = s.beta0;
  for (Eigen::Index j = 0; j < ctx.p(); ++j) row[k++] = s.beta[j];
  for (int l = 0; l < ctx.levels(); ++l) row[k++] = s.u[l];
  row[k++] = s.sigma_sq;
  if (ctx.hyper().family == PriorFamily::kR2D2) {
    row[k++] = s.w();
    row[k++] = s.U;
    row[k++] = s.V;
    row[k++] = s.gamma;
    for (Eigen::Index c = 0; c < s.phi.phi.size(); ++c) row[k++] = s.phi.phi[c];
    row[k++] = s.phi.spatial_weight() * s.w();
  } else {
    if (ctx.levels() > 0) row[k++] = s.sigma_u_sq;
    row[k++] = s.sigma_theta_sq;
  }
  row[k++] = s.rho;
  row[k++] = r2_of(ctx, s);
  if (store_theta)
    for (Eigen::Index i = 0; i < ctx.n(); ++i) row[k++] = s.theta[i];
}

PosteriorSamples run_chain(const ModelContext& ctx, const McmcConfig& cfg, RandomStream& rs, int chain_index) {
  cfg.validate();
  const bool baseline = ctx.hyper().family != PriorFamily::kR2D2;
  ChainState s = initial_state(ctx, cfg);
  TuningState t{cfg.c1, cfg.c2, cfg.c3};

  PosteriorSamples out;
  out.names = sample_names(ctx, cfg.store_theta);
  const int rows = cfg.iters / cfg.thin;
  out.draws.resize(rows, static_cast<Eigen::Index>(out.names.size()));
  out.chain.assign(static_cast<std::size_t>(rows), chain_index);
  out.iteration.resize(static_cast<std::size_t>(rows));

  auto one = [&](SweepStats& stats, int it) {
    try {
      if (baseline)
        baseline_sweep(ctx, s, rs, t, cfg, stats);
      else
        sweep(ctx, s, rs, t, cfg, stats);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "chain " << chain_index << ", iteration " << it << ": " << e.what();
      fail(ErrorKind::kSampler, os.str());
    }
  };

  SweepStats window;
  auto rate = [](const AcceptanceCounter& c) -> std::optional<double> {
    if (c.proposed == 0) return std::nullopt;
    return c.rate();
  };
  for (int it = 0; it < cfg.burnin; ++it) {
    one(window, it - cfg.burnin);
    if ((it + 1) % cfg.adapt_interval == 0) {
      adapt_proposals(t, rate(window.phi), rate(window.rho), rate(window.sigma_theta));
      window = SweepStats{};
    }
  }
  SweepStats post;
  int row = 0;
  for (int it = 0; it < cfg.iters; ++it) {
    one(post, it);
    if ((it + 1) % cfg.thin == 0 && row < rows) {
      record(ctx, s, cfg.store_theta, out.draws.row(row));
      out.iteration[static_cast<std::size_t>(row)] = it + 1;
      ++row;
    }
  }
  out.phi_acceptance.push_back(post.phi.rate());
  out.rho_acceptance.push_back(post.rho.rate());
  out.sigma_theta_acceptance.push_back(post.sigma_theta.rate());
  out.final_tuning.push_back(t);
  return out;
}

PosteriorSamples run_chains(const ModelContext& ctx, const McmcConfig& cfg) {
  cfg.validate();
  const RandomStream root(cfg.seed);
  std::vector<PosteriorSamples> parts(static_cast<std::size_t>(cfg.chains));
  std::vector<std::exception_ptr> errors(parts.size());
  auto work = [&](std::size_t c) {
    try {
      RandomStream rs = root.split(c);
      parts[c] = run_chain(ctx, cfg, rs, static_cast<int>(c));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (parts.size() == 1) {
    work(0);
  } else {
    const std::size_t pool = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t start = 0; start < parts.size(); start += pool) {
      std::vector<std::thread> threads;
      for (std::size_t c = start; c < std::min(parts.size(), start + pool); ++c) threads.emplace_back(work, c);
      for (auto& th : threads) th.join();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorSamples out = std::move(parts[0]);
  for (std::size_t c = 1; c < parts.size(); ++c) {
    const PosteriorSamples& p = parts[c];
    Eigen::MatrixXd merged(out.draws.rows() + p.draws.rows(), out.draws.cols());
    merged << out.draws, p.draws;
    out.draws = std::move(merged);
    out.chain.insert(out.chain.end(), p.chain.begin(), p.chain.end());
    out.iteration.insert(out.iteration.end(), p.iteration.begin(), p.iteration.end());
    out.phi_acceptance.insert(out.phi_acceptance.end(), p.phi_acceptance.begin(), p.phi_acceptance.end());
    out.rho_acceptance.insert(out.rho_acceptance.end(), p.rho_acceptance.begin(), p.rho_acceptance.end());
    out.sigma_theta_acceptance.insert(out.sigma_theta_acceptance.end(), p.sigma_theta_acceptance.begin(),
                                      p.sigma_theta_acceptance.end());
    out.final_tuning.insert(out.final_tuning.end(), p.final_tuning.begin(), p.final_tuning.end());
  }
  return out;
}

}  // namespace r2d2::mcmc
