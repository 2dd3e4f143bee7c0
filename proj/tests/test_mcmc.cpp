#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/inverse_gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"
#include "r2d2/inference.hpp"
#include "r2d2/mcmc.hpp"
#include "test_support.hpp"

using namespace r2d2;
using namespace r2d2::mcmc;
using testing::mean_se;

namespace {

struct Toy {
  int n = 10;
  int p = 2;
  int levels = 0;
  std::uint64_t seed = 1;
};

ModelData toy_data(const Toy& t) {
  RandomStream rs(t.seed);
  ModelData d;
  d.y.resize(t.n);
  for (int i = 0; i < t.n; ++i) d.y[i] = rs.normal();
  d.x.resize(t.n, t.p);
  for (Eigen::Index i = 0; i < d.x.size(); ++i) d.x.data()[i] = rs.normal();
  Standardization st;
  Eigen::Index bad = -1;
  if (t.p > 0) standardize_columns(d.x, st, bad);
  d.locations.coords.resize(t.n, 2);
  for (int i = 0; i < t.n; ++i) {
    d.locations.coords(i, 0) = rs.uniform();
    d.locations.coords(i, 1) = rs.uniform();
  }
  if (t.levels > 0) {
    d.groups.levels = t.levels;
    for (int i = 0; i < t.n; ++i) d.groups.level.push_back(i % t.levels);
  }
  d.kernel = spatial::CorrelationKernel::exponential(0.2);
  return d;
}

ModelData fixed_data(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixX2d& coords) {
  ModelData d;
  d.y = y;
  d.x = x;
  d.locations.coords = coords;
  d.kernel = spatial::CorrelationKernel::exponential(0.2);
  return d;
}

Eigen::MatrixX2d line_coords(int n, double spacing) {
  Eigen::MatrixX2d c = Eigen::MatrixX2d::Zero(n, 2);
  for (int i = 0; i < n; ++i) c(i, 0) = spacing * i;
  return c;
}

McmcConfig short_config(std::uint64_t seed = 3) {
  McmcConfig c;
  c.burnin = 0;
  c.iters = 1;
  c.thin = 1;
  c.seed = seed;
  return c;
}

// Randomized but valid R2D2 state.
void scramble(const ModelContext& ctx, ChainState& s, RandomStream& rs) {
  s.beta0 = rs.normal();
  for (Eigen::Index j = 0; j < s.beta.size(); ++j) s.beta[j] = rs.normal();
  for (Eigen::Index l = 0; l < s.u.size(); ++l) s.u[l] = rs.normal();
  for (Eigen::Index i = 0; i < s.theta.size(); ++i) s.theta[i] = rs.normal();
  s.sigma_sq = 0.5 + rs.uniform();
  s.U = 0.5 + rs.uniform();
  s.V = 0.5 + rs.uniform();
  s.gamma = 0.5 + rs.uniform();
  s.phi.phi = dist::dirichlet_sample(rs, Eigen::VectorXd::Constant(ctx.layout().size(), 3.0));
  s.ss = ctx.matcher().match(s.phi, s.cache.terms);
}

// Q assembled from dense inverses.
double dense_quadratic(const ModelContext& ctx, const ChainState& s) {
  double q = 0.0;
  const Eigen::VectorXd cw = s.phi.coefficient_weights();
  for (Eigen::Index j = 0; j < ctx.p(); ++j) q += s.beta[j] * s.beta[j] / cw[j];
  if (ctx.levels() > 0) q += s.u.squaredNorm() / s.phi.group_weight();
  const Eigen::MatrixXd inv = s.cache.sigma.inverse();
  q += s.theta.dot(inv * s.theta) / s.phi.spatial_weight();
  return q;
}

double log_ig(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_mvn_zero(const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  const double logdet = std::log(std::abs(lu.determinant()));
  return -0.5 * x.size() * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * x.dot(lu.solve(x));
}

double log_dirichlet(const Eigen::VectorXd& x, const Eigen::VectorXd& a) {
  double lp = std::lgamma(a.sum());
  for (Eigen::Index i = 0; i < a.size(); ++i) lp += (a[i] - 1.0) * std::log(x[i]) - std::lgamma(a[i]);
  return lp;
}

// Dense density of the phi conditional at phi.
double dense_phi_target(const ModelContext& ctx, const ChainState& s, const Eigen::VectorXd& phi) {
  prior::VarianceSplit split{ctx.layout(), phi};
  const Eigen::MatrixXd z = ctx.levels() ? ctx.data().groups.indicator() : Eigen::MatrixXd(ctx.n(), 0);
  const prior::PriorShapeScale ss = prior::moment_match(ctx.data().x, z, s.cache.sigma, split);
  const double v = s.sigma_sq * s.w();
  double lp = log_dirichlet(phi, ctx.xi());
  lp += log_mvn_zero(s.beta, v * Eigen::MatrixXd(split.coefficient_weights().asDiagonal()));
  if (ctx.levels()) lp += log_mvn_zero(s.u, v * split.group_weight() * Eigen::MatrixXd::Identity(ctx.levels(), ctx.levels()));
  lp += log_mvn_zero(s.theta, v * split.spatial_weight() * s.cache.sigma);
  lp += log_ig(s.V, ss.alpha, 1.0 / ss.beta);
  return lp;
}

double dense_rho_target(const ModelContext& ctx, const ChainState& s, double rho) {
  const Eigen::MatrixXd sigma = spatial::correlation_matrix(ctx.data().kernel.with_rho(rho), ctx.data().locations);
  const Eigen::MatrixXd z = ctx.levels() ? ctx.data().groups.indicator() : Eigen::MatrixXd(ctx.n(), 0);
  const prior::PriorShapeScale ss = prior::moment_match(ctx.data().x, z, sigma, s.phi);
  const double ws = s.sigma_sq * s.w() * s.phi.spatial_weight();
  const double m = ctx.hyper().log_rho_mean, v = ctx.hyper().log_rho_var;
  const double lr = std::log(rho);
  double lp = -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * (lr - m) * (lr - m) / v;
  lp += log_mvn_zero(s.theta, ws * sigma);
  lp += log_ig(s.V, ss.alpha, 1.0 / ss.beta);
  return lp;
}

template <class F>
std::vector<double> repeat(int n, F f) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = f();
  return out;
}

}  // namespace

TEST_CASE("beta0 conditional") {
  Eigen::MatrixX2d c = line_coords(2, 1.0);
  HyperParams h;
  h.sigma0_sq = 1.0;
  ModelContext ctx(fixed_data(Eigen::Vector2d(1.0, 1.0), Eigen::MatrixXd(2, 0), c), h);
  ChainState s = initial_state(ctx, short_config());
  s.sigma_sq = 1.0;
  s.theta.setZero();
  RandomStream rs(1);
  RandomStream twin = rs;
  step_beta0(ctx, s, rs);
  CHECK(std::abs(s.beta0 - (2.0 / 3.0 + std::sqrt(1.0 / 3.0) * twin.normal())) < 1e-12);

  std::vector<double> d = repeat(100000, [&] {
    step_beta0(ctx, s, rs);
    return s.beta0;
  });
  const auto ms = mean_se(d);
  CHECK(std::abs(ms.mean - 2.0 / 3.0) < 3.0 * ms.se);
  CHECK(std::abs(ms.var - 1.0 / 3.0) < 3.0 * testing::variance_se(d));

  HyperParams flat;
  flat.sigma0_sq = 1e12;
  ModelContext fctx(fixed_data(Eigen::Vector2d(0.3, 1.1), Eigen::MatrixXd(2, 0), c), flat);
  ChainState f = initial_state(fctx, short_config());
  f.sigma_sq = 1.0;
  f.theta.setZero();
  RandomStream r2(2);
  RandomStream t2 = r2;
  step_beta0(fctx, f, r2);
  CHECK(std::abs(f.beta0 - std::sqrt(0.5) * t2.normal() - 0.7) < 1e-6);

  ModelContext zctx(fixed_data(Eigen::Vector2d(0.0, 0.0), Eigen::MatrixXd(2, 0), c), h);
  ChainState zs = initial_state(zctx, short_config());
  zs.sigma_sq = 1.0;
  RandomStream r3(3);
  RandomStream t3 = r3;
  step_beta0(zctx, zs, r3);
  CHECK(std::abs(zs.beta0 - std::sqrt(1.0 / 3.0) * t3.normal()) < 1e-12);
}

TEST_CASE("beta conditional") {
  Eigen::MatrixXd x(4, 1);
  x << 1, 1, -1, -1;
  ModelContext ctx(fixed_data(Eigen::Vector4d(1, 1, 0, 0), x, line_coords(4, 1.0)), HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  s.beta0 = 0.0;
  s.theta.setZero();
  s.sigma_sq = 1.0;
  s.U = 1.0;
  s.V = 2.0;
  s.phi.phi = Eigen::Vector2d(0.5, 0.5);

  RandomStream rs(4);
  RandomStream twin = rs;
  step_beta(ctx, s, rs);
  CHECK(std::abs(s.beta[0] - (0.4 + std::sqrt(0.2) * twin.normal())) < 1e-12);

  s.U = 1e12;
  twin = rs;
  step_beta(ctx, s, rs);
  CHECK(std::abs(s.beta[0] - 0.5 - 0.5 * twin.normal()) < 1e-4);

  s.U = 1e-12;
  step_beta(ctx, s, rs);
  CHECK(std::abs(s.beta[0]) < 1e-5);
}

TEST_CASE("u conditional") {
  ModelData d = fixed_data(Eigen::Vector3d(1, 1, 1), Eigen::MatrixXd(3, 0), line_coords(3, 1.0));
  d.groups.levels = 1;
  d.groups.level = {0, 0, 0};
  ModelContext ctx(d, HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  s.beta0 = 0.0;
  s.theta.setZero();
  s.sigma_sq = 1.0;
  s.U = 1.0;
  s.V = 2.0;
  s.phi.phi = Eigen::Vector2d(0.5, 0.5);
  RandomStream rs(5);
  RandomStream twin = rs;
  step_u(ctx, s, rs);
  CHECK(std::abs(s.u[0] - (0.75 + 0.5 * twin.normal())) < 1e-12);

  s.U = 1e-14;
  step_u(ctx, s, rs);
  CHECK(std::abs(s.u[0]) < 1e-5);

  ModelContext none(fixed_data(Eigen::Vector3d(1, 2, 3), Eigen::MatrixXd(3, 0), line_coords(3, 1.0)), HyperParams{});
  ChainState e = initial_state(none, short_config());
  step_u(none, e, rs);
  CHECK(e.u.size() == 0);
}

TEST_CASE("theta conditional with independent sites") {
  const Eigen::Vector3d y(0.5, -1.0, 2.0);
  ModelContext ctx(fixed_data(y, Eigen::MatrixXd(3, 0), line_coords(3, 1.0)), HyperParams{});
  McmcConfig cfg = short_config();
  cfg.rho_init = 1e-3;
  ChainState s = initial_state(ctx, cfg);
  REQUIRE((s.cache.sigma - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-300);
  s.beta0 = 0.0;
  s.sigma_sq = 0.8;
  s.U = 1.5;
  s.V = 1.0;
  s.phi.phi = Eigen::VectorXd::Ones(1);
  const double c = s.phi.spatial_weight() * s.w();

  RandomStream rs(6);
  RandomStream twin = rs;
  step_theta(ctx, s, rs);
  const Eigen::VectorXd z1 = dist::standard_normal_vector(twin, 3);
  const Eigen::VectorXd z2 = dist::standard_normal_vector(twin, 3);
  const Eigen::VectorXd a = std::sqrt(s.sigma_sq * c) * z1;
  const Eigen::VectorXd e = std::sqrt(s.sigma_sq) * z2;
  const Eigen::VectorXd expected = (a + c * (y - e)) / (1.0 + c);
  CHECK((s.theta - expected).cwiseAbs().maxCoeff() < 1e-10);

  std::vector<std::vector<double>> draws(3);
  for (int it = 0; it < 100000; ++it) {
    step_theta(ctx, s, rs);
    for (int i = 0; i < 3; ++i) draws[static_cast<std::size_t>(i)].push_back(s.theta[i]);
  }
  for (int i = 0; i < 3; ++i) {
    const auto& v = draws[static_cast<std::size_t>(i)];
    const auto ms = mean_se(v);
    CHECK(std::abs(ms.mean - c * y[i] / (1.0 + c)) < 3.0 * ms.se);
    CHECK(std::abs(ms.var - s.sigma_sq * c / (1.0 + c)) < 3.0 * testing::variance_se(v));
  }

  s.U = 1e-14;
  step_theta(ctx, s, rs);
  CHECK(s.theta.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("theta conditional with correlated sites") {
  const Eigen::Vector2d y(1.0, -0.5);
  ModelContext ctx(fixed_data(y, Eigen::MatrixXd(2, 0), line_coords(2, 1.0)), HyperParams{});
  McmcConfig cfg = short_config();
  cfg.rho_init = 1.0 / std::log(2.0);
  ChainState s = initial_state(ctx, cfg);
  REQUIRE(std::abs(s.cache.sigma(0, 1) - 0.5) < 1e-14);
  s.beta0 = 0.0;
  s.sigma_sq = 1.3;
  s.U = 0.7;
  s.V = 1.0;
  s.phi.phi = Eigen::VectorXd::Ones(1);
  const double c = s.w();
  const Eigen::Matrix2d sigma = s.cache.sigma;
  const Eigen::Matrix2d id = Eigen::Matrix2d::Identity();
  const Eigen::Vector2d mean = c * sigma * (id + c * sigma).inverse() * y;
  const Eigen::Matrix2d cov = s.sigma_sq * (sigma.inverse() / c + id).inverse();

  RandomStream rs(7);
  std::vector<double> t0, t1, p00, p01, p11;
  for (int it = 0; it < 100000; ++it) {
    step_theta(ctx, s, rs);
    t0.push_back(s.theta[0]);
    t1.push_back(s.theta[1]);
    const double d0 = s.theta[0] - mean[0], d1 = s.theta[1] - mean[1];
    p00.push_back(d0 * d0);
    p01.push_back(d0 * d1);
    p11.push_back(d1 * d1);
  }
  const auto m0 = mean_se(t0), m1 = mean_se(t1);
  CHECK(std::abs(m0.mean - mean[0]) < 3.0 * m0.se);
  CHECK(std::abs(m1.mean - mean[1]) < 3.0 * m1.se);
  const auto c00 = mean_se(p00), c01 = mean_se(p01), c11 = mean_se(p11);
  CHECK(std::abs(c00.mean - cov(0, 0)) < 3.0 * c00.se);
  CHECK(std::abs(c01.mean - cov(0, 1)) < 3.0 * c01.se);
  CHECK(std::abs(c11.mean - cov(1, 1)) < 3.0 * c11.se);
}

TEST_CASE("sigma2 conditional passes PIT") {
  const Toy t{8, 2, 2, 11};
  ModelContext ctx(toy_data(t), HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  RandomStream rs(8);
  scramble(ctx, s, rs);
  const HyperParams& h = ctx.hyper();
  const double shape = h.a0 + 0.5 * (t.n + t.p + t.levels) + 0.5 * t.n;
  const double rate = h.b0 + 0.5 * (ctx.residual(s).squaredNorm() + dense_quadratic(ctx, s) / s.w());
  const boost::math::inverse_gamma_distribution<> ig(shape, rate);
  const auto d = repeat(10000, [&] {
    step_sigma2(ctx, s, rs);
    return s.sigma_sq;
  });
  CHECK(testing::uniform_chi_square_ok(testing::pit(d, [&](double v) { return boost::math::cdf(ig, v); })));
}

TEST_CASE("U conditional") {
  SUBCASE("gamma limit") {
    ModelContext ctx(toy_data({6, 1, 0, 12}), HyperParams{});
    ChainState s = initial_state(ctx, short_config());
    RandomStream rs(9);
    scramble(ctx, s, rs);
    s.beta.setZero();
    s.theta.setZero();
    const boost::math::gamma_distribution<> g(ctx.hyper().r2.a, 1.0 / s.gamma);
    const auto d = repeat(10000, [&] {
      step_U(ctx, s, rs);
      return s.U;
    });
    CHECK(testing::uniform_chi_square_ok(testing::pit(d, [&](double v) { return boost::math::cdf(g, v); })));
  }
  SUBCASE("negative lambda against a quadrature-normalized density") {
    // n = 22, a = 1: lambda = 1 - 11 = -10; V chosen so chi = 3; gamma = 1.
    ModelContext ctx(toy_data({22, 0, 0, 13}), HyperParams{});
    ChainState s = initial_state(ctx, short_config());
    RandomStream rs(10);
    scramble(ctx, s, rs);
    s.gamma = 1.0;
    s.V = dense_quadratic(ctx, s) / (3.0 * s.sigma_sq);
    const dist::GigParams gp{2.0, 3.0, -10.0};
    const double mode = (gp.lambda - 1.0 + std::sqrt((gp.lambda - 1.0) * (gp.lambda - 1.0) + gp.rho * gp.chi)) / gp.rho;
    const double top = dist::gig_log_kernel(mode, gp);
    auto f = [&](double z) { return z > 0.0 ? std::exp(dist::gig_log_kernel(z, gp) - top) : 0.0; };
    boost::math::quadrature::tanh_sinh<double> ts;
    boost::math::quadrature::exp_sinh<double> es;
    const double norm = ts.integrate(f, 0.0, 1.0) + es.integrate(f, 1.0, std::numeric_limits<double>::infinity());
    auto d = repeat(10000, [&] {
      step_U(ctx, s, rs);
      return s.U;
    });
    std::vector<double> sorted = d;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> u;
    double acc = 0.0, prev = 0.0;
    for (double x : sorted) {
      acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, prev, x, 5, 1e-12);
      u.push_back(acc / norm);
      prev = x;
    }
    CHECK(testing::uniform_chi_square_ok(u));
  }
}

TEST_CASE("V conditional passes PIT") {
  const Toy t{9, 2, 3, 14};
  ModelContext ctx(toy_data(t), HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  RandomStream rs(11);
  scramble(ctx, s, rs);
  const Eigen::MatrixXd z = ctx.data().groups.indicator();
  const prior::PriorShapeScale ss = prior::moment_match(ctx.data().x, z, s.cache.sigma, s.phi);
  const double shape = ss.alpha + 0.5 * (t.n + t.p + t.levels);
  const double scale = 1.0 / ss.beta + 0.5 * dense_quadratic(ctx, s) / (s.sigma_sq * s.U);
  const boost::math::inverse_gamma_distribution<> ig(shape, scale);
  const auto d = repeat(10000, [&] {
    step_V(ctx, s, rs);
    return s.V;
  });
  CHECK(testing::uniform_chi_square_ok(testing::pit(d, [&](double v) { return boost::math::cdf(ig, v); })));
}

TEST_CASE("gamma conditional") {
  ModelContext ctx(toy_data({5, 1, 0, 15}), HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  RandomStream rs(12);
  s.U = 1.0;
  const auto d = repeat(100000, [&] {
    step_gamma(ctx, s, rs);
    return s.gamma;
  });
  const auto ms = mean_se(d);
  CHECK(std::abs(ms.mean - 1.0) < 3.0 * ms.se);

  s.U = 0.0;
  const boost::math::gamma_distribution<> g(2.0, 1.0);
  const auto e = repeat(10000, [&] {
    step_gamma(ctx, s, rs);
    return s.gamma;
  });
  CHECK(testing::uniform_chi_square_ok(testing::pit(e, [&](double v) { return boost::math::cdf(g, v); })));
}

TEST_CASE("phi target matches an independent assembly") {
  const Toy t{12, 3, 2, 16};
  for (bool equal : {true, false}) {
    HyperParams h;
    h.equal_fixed = equal;
    ModelContext ctx(toy_data(t), h);
    ChainState s = initial_state(ctx, short_config());
    RandomStream rs(13);
    scramble(ctx, s, rs);
    for (int rep = 0; rep < 5; ++rep) {
      const Eigen::VectorXd a = dist::dirichlet_sample(rs, Eigen::VectorXd::Constant(ctx.layout().size(), 2.0));
      const Eigen::VectorXd b = dist::dirichlet_sample(rs, Eigen::VectorXd::Constant(ctx.layout().size(), 2.0));
      const double impl = log_phi_target(ctx, s, a) - log_phi_target(ctx, s, b);
      const double dense = dense_phi_target(ctx, s, a) - dense_phi_target(ctx, s, b);
      CHECK(std::abs(impl - dense) < 1e-10);
    }
  }
}

TEST_CASE("rho target matches an independent assembly") {
  ModelContext ctx(toy_data({12, 2, 2, 17}), HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  RandomStream rs(14);
  scramble(ctx, s, rs);
  for (auto [r1, r2] : {std::pair{0.05, 0.2}, std::pair{0.3, 0.11}, std::pair{0.7, 0.02}}) {
    const SpatialCache c1 = ctx.make_cache(r1), c2 = ctx.make_cache(r2);
    const double impl = log_rho_target(ctx, s, c1, ctx.matcher().match(s.phi, c1.terms)) -
                        log_rho_target(ctx, s, c2, ctx.matcher().match(s.phi, c2.terms));
    const double dense = dense_rho_target(ctx, s, r1) - dense_rho_target(ctx, s, r2);
    CHECK(std::abs(impl - dense) < 1e-10);
  }
}

TEST_CASE("near-identity proposals are always accepted") {
  ModelContext ctx(toy_data({10, 2, 0, 18}), HyperParams{});
  ChainState s = initial_state(ctx, short_config());
  RandomStream rs(15);
  scramble(ctx, s, rs);
  int phi_acc = 0, rho_acc = 0;
  for (int i = 0; i < 200; ++i) {
    phi_acc += step_phi_mh(ctx, s, rs, 1e12);
    rho_acc += step_rho_mh(ctx, s, rs, 1e-12);
  }
  CHECK(phi_acc == 200);
  CHECK(rho_acc == 200);
}

TEST_CASE("adaptation rule") {
  TuningState t{100.0, 0.5, 0.5};
  adapt_proposals(t, 0.35, 0.35, 0.35);
  CHECK(t.c1 == 100.0);
  CHECK(t.c2 == 0.5);
  CHECK(t.c3 == 0.5);
  adapt_proposals(t, 0.05, std::nullopt);
  CHECK(t.c1 == 200.0);
  CHECK(t.c2 == 0.5);
  adapt_proposals(t, 0.9, 0.9, 0.05);
  CHECK(t.c1 == 100.0);
  CHECK(t.c2 == doctest::Approx(0.75));
  CHECK(t.c3 == doctest::Approx(0.5 / 1.5));
  adapt_proposals(t, std::nullopt, 0.1);
  CHECK(t.c2 == doctest::Approx(0.5));
}

TEST_CASE("no adaptation after burn-in") {
  ModelContext ctx(toy_data({10, 2, 0, 19}), HyperParams{});
  McmcConfig cfg = short_config();
  cfg.burnin = 0;
  cfg.iters = 600;
  cfg.c1 = 3.0;
  cfg.c2 = 4.0;
  cfg.adapt_interval = 10;
  const PosteriorSamples out = run_chains(ctx, cfg);
  CHECK(out.final_tuning[0].c1 == 3.0);
  CHECK(out.final_tuning[0].c2 == 4.0);

  cfg.burnin = 300;
  const PosteriorSamples adapted = run_chains(ctx, cfg);
  CHECK((adapted.final_tuning[0].c1 != 3.0 || adapted.final_tuning[0].c2 != 4.0));
}

TEST_CASE("seed determinism and chain ordering") {
  ModelContext ctx(toy_data({15, 2, 3, 20}), HyperParams{});
  McmcConfig cfg;
  cfg.burnin = 100;
  cfg.iters = 300;
  cfg.thin = 3;
  cfg.seed = 42;
  const PosteriorSamples a = run_chains(ctx, cfg);
  const PosteriorSamples b = run_chains(ctx, cfg);
  CHECK(a.draws.rows() == 100);
  CHECK(a.draws == b.draws);
  cfg.chains = 3;
  const PosteriorSamples m = run_chains(ctx, cfg);
  CHECK(m.draws.rows() == 300);
  CHECK(m.draws.topRows(100) == a.draws);
  CHECK(m.chain[150] == 1);
  cfg.seed = 43;
  CHECK(run_chains(ctx, cfg).draws != m.draws);

  for (PriorFamily f : {PriorFamily::kVague, PriorFamily::kPC}) {
    HyperParams h;
    h.family = f;
    ModelContext bctx(toy_data({15, 2, 3, 20}), h);
    cfg.chains = 1;
    CHECK(run_chains(bctx, cfg).draws == run_chains(bctx, cfg).draws);
  }
}

TEST_CASE("spatial cache stays coherent") {
  ModelContext ctx(toy_data({14, 3, 2, 21}), HyperParams{});
  McmcConfig cfg = short_config();
  ChainState s = initial_state(ctx, cfg);
  RandomStream rs(16);
  TuningState t{20.0, 0.8, 0.5};
  int moves = 0;
  for (int it = 0; it < 300; ++it) {
    SweepStats st;
    const double rho = s.rho;
    const Eigen::VectorXd phi = s.phi.phi;
    sweep(ctx, s, rs, t, cfg, st);
    if (s.rho != rho || s.phi.phi != phi) ++moves;
    const SpatialCache fresh = ctx.make_cache(s.rho);
    CHECK((fresh.sigma - s.cache.sigma).cwiseAbs().maxCoeff() < 1e-10);
    const prior::PriorShapeScale ss = ctx.matcher().match(s.phi, fresh.terms);
    CHECK(std::abs(ss.alpha - s.ss.alpha) < 1e-10 * ss.alpha);
    CHECK(std::abs(ss.beta - s.ss.beta) < 1e-10 * ss.beta);
  }
  CHECK(moves > 50);
}

TEST_CASE("no-data run recovers the phi and rho priors") {
  HyperParams h;
  h.a0 = 3.0;
  h.b0 = 2.0;
  ModelContext ctx(toy_data({8, 1, 0, 22}), h, false);
  McmcConfig cfg;
  cfg.burnin = 2000;
  cfg.iters = 200000;
  cfg.thin = 20;
  cfg.seed = 5;
  cfg.c1 = 5.0;
  cfg.c2 = 1.0;
  const PosteriorSamples out = run_chains(ctx, cfg);
  std::vector<double> phi1, log_rho;
  const Eigen::VectorXd p = out.values("phi_1"), r = out.values("rho");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    phi1.push_back(p[i]);
    log_rho.push_back(std::log(r[i]));
  }
  CHECK(inference::ks_distance(phi1, [](double v) { return v; }) < 0.03);
  const boost::math::normal_distribution<> nd(-2.0, 1.0);
  CHECK(inference::ks_distance(log_rho, [&](double v) { return boost::math::cdf(nd, v); }) < 0.03);
}

TEST_CASE("PC prior tail calibration") {
  HyperParams h;
  h.family = PriorFamily::kPC;
  h.pc_alpha = 0.05;
  h.pc_rho0 = 0.01;
  h.pc_sigma0 = 10.0;
  RandomStream rs(17);
  const int n = 100000;
  std::vector<double> below, above;
  for (int i = 0; i < n; ++i) {
    below.push_back(dist::inverse_gamma(rs, 1.0, h.pc_rho_scale()) < h.pc_rho0 ? 1.0 : 0.0);
    above.push_back(dist::gamma_rate(rs, 1.0, h.pc_sigma_rate()) > h.pc_sigma0 ? 1.0 : 0.0);
  }
  const auto a = mean_se(below), b = mean_se(above);
  CHECK(std::abs(a.mean - 0.05) < 3.0 * a.se);
  CHECK(std::abs(b.mean - 0.05) < 3.0 * b.se);
}

TEST_CASE("vague no-data run recovers the spatial variance prior") {
  HyperParams h;
  h.family = PriorFamily::kVague;
  ModelContext ctx(toy_data({4, 1, 0, 23}), h, false);
  McmcConfig cfg;
  cfg.burnin = 1000;
  cfg.iters = 1000000;
  cfg.thin = 100;
  cfg.seed = 6;
  cfg.fix_rho = true;
  const PosteriorSamples out = run_chains(ctx, cfg);
  const Eigen::VectorXd v = out.values("sigma_theta_sq");
  std::vector<double> d(v.data(), v.data() + v.size());
  const boost::math::inverse_gamma_distribution<> ig(0.1, 0.1);
  CHECK(inference::ks_distance(d, [&](double x) { return boost::math::cdf(ig, x); }) < 0.03);
}

TEST_CASE("sampler errors are reported with context") {
  ModelContext ctx(toy_data({6, 1, 0, 24}), HyperParams{});
  McmcConfig cfg;
  cfg.thin = 0;
  CHECK_THROWS_AS(run_chains(ctx, cfg), Error);
  HyperParams bad;
  bad.xi = Eigen::VectorXd::Ones(5);
  CHECK_THROWS_AS(ModelContext(toy_data({6, 1, 0, 24}), bad), Error);
}
