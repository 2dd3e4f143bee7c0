#include <doctest.h>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <vector>

#include "r2d2/distributions.hpp"
#include "r2d2/error.hpp"
#include "r2d2/inference.hpp"
#include "r2d2/prior.hpp"
#include "test_support.hpp"

using namespace r2d2;
using namespace r2d2::prior;

namespace {

Eigen::MatrixXd no_cols(Eigen::Index n) { return Eigen::MatrixXd(n, 0); }

VarianceSplit spatial_only() {
  VarianceSplit v = VarianceSplit::uniform(ShareLayout{0, false, true});
  return v;
}

spatial::Locations random_locations(int n, RandomStream& rs) {
  spatial::Locations l;
  l.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    l.coords(i, 0) = rs.uniform();
    l.coords(i, 1) = rs.uniform();
  }
  return l;
}

Eigen::MatrixXd standardized_normals(int n, int p, RandomStream& rs) {
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rs.normal();
  Standardization st;
  Eigen::Index bad = -1;
  REQUIRE(standardize_columns(x, st, bad));
  return x;
}

GroupIndex cyclic_groups(int n, int levels) {
  GroupIndex g;
  g.levels = levels;
  for (int i = 0; i < n; ++i) g.level.push_back(i % levels);
  return g;
}

}  // namespace

TEST_CASE("moment_match without covariates") {
  const PriorShapeScale id = moment_match(no_cols(3), no_cols(3), Eigen::MatrixXd::Identity(3, 3), spatial_only());
  CHECK(id.mu_S == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.sigma2_S == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.alpha == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.beta == doctest::Approx(1.0).epsilon(1e-12));

  const Eigen::MatrixXd cs = spatial::correlation_from_distances(spatial::CorrelationKernel::compound_symmetry(0.5),
                                                                 Eigen::MatrixXd::Zero(3, 3));
  const PriorShapeScale half = moment_match(no_cols(3), no_cols(3), cs, spatial_only());
  CHECK(half.mu_S == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(half.sigma2_S == doctest::Approx(0.25).epsilon(1e-12));

  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(3, 3);
  try {
    moment_match(no_cols(3), no_cols(3), one, spatial_only());
    FAIL("expected degenerate prior");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDegeneratePrior);
  }
}

TEST_CASE("closed forms") {
  auto [m0, v0] = closed_form_cs(0.0, 101);
  CHECK(m0 == doctest::Approx(1.0));
  CHECK(v0 == doctest::Approx(0.02));
  auto [m1, v1] = closed_form_cs(0.5, 101);
  CHECK(m1 == doctest::Approx(0.5));
  CHECK(v1 == doctest::Approx(0.005));
  auto [m2, v2] = closed_form_cs(0.9, 11);
  CHECK(m2 == doctest::Approx(0.1));
  CHECK(v2 == doctest::Approx(0.002));
  CHECK_THROWS_AS(closed_form_cs(1.0, 10), Error);

  CHECK(closed_form_blocked_cs(0.3, 12, 1) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(closed_form_blocked_cs(0.5, 10, 2) == doctest::Approx(7.0 / 9.0).epsilon(1e-14));
  CHECK(closed_form_blocked_cs(0.0, 12, 3) == 1.0);
}

TEST_CASE("generic path agrees with the closed forms") {
  RandomStream rs(3);
  for (int n : {10, 50}) {
    for (double rho : {0.0, 0.2, 0.5, 0.9}) {
      const Eigen::MatrixXd zero_d = Eigen::MatrixXd::Zero(n, n);
      const Eigen::MatrixXd cs =
          spatial::correlation_from_distances(spatial::CorrelationKernel::compound_symmetry(rho), zero_d);
      const PriorShapeScale g = moment_match(no_cols(n), no_cols(n), cs, spatial_only());
      const auto [mu, s2] = closed_form_cs(rho, n);
      CHECK(std::abs(g.mu_S - mu) < 1e-10);
      CHECK(std::abs(g.sigma2_S - s2) < 1e-10);

      const Eigen::MatrixXd bcs = spatial::correlation_from_distances(
          spatial::CorrelationKernel::blocked_compound_symmetry(rho, 2), zero_d);
      CHECK(std::abs(moment_match(no_cols(n), no_cols(n), bcs, spatial_only()).mu_S -
                     closed_form_blocked_cs(rho, n, 2)) < 1e-10);

      if (rho > 0.0) {
        const spatial::Locations l = random_locations(n, rs);
        const Eigen::MatrixXd ex = spatial::correlation_matrix(spatial::CorrelationKernel::exponential(rho), l);
        CHECK(std::abs(moment_match(no_cols(n), no_cols(n), ex, spatial_only()).mu_S - pairwise_mean_identity(ex)) <
              1e-10);
      }
    }
  }
}

TEST_CASE("shape and scale are consistent with the moments") {
  RandomStream rs(4);
  for (int rep = 0; rep < 20; ++rep) {
    const double mu = 0.1 + 2.0 * rs.uniform();
    const double s2 = 0.001 + rs.uniform();
    const PriorShapeScale s = PriorShapeScale::from_moments(mu, s2);
    CHECK(std::abs(s.alpha * s.beta - mu) < 1e-10);
    CHECK(std::abs(s.alpha * s.beta * s.beta - s2) < 1e-10);
  }
  CHECK_THROWS_AS(PriorShapeScale::from_moments(1e-9, 1.0), Error);
  CHECK_THROWS_AS(PriorShapeScale::from_moments(1.0, 1e-13), Error);
}

TEST_CASE("moment matcher agrees with the dense assembly") {
  RandomStream rs(5);
  const int n = 40, p = 4, levels = 5;
  const Eigen::MatrixXd x = standardized_normals(n, p, rs);
  const GroupIndex g = cyclic_groups(n, levels);
  const spatial::Locations l = random_locations(n, rs);
  const Eigen::MatrixXd sigma = spatial::correlation_matrix(spatial::CorrelationKernel::exponential(0.3), l);
  for (bool equal : {true, false}) {
    for (bool grouped : {false, true}) {
      const ShareLayout layout{p, grouped, equal};
      const GroupIndex gi = grouped ? g : GroupIndex{};
      const MomentMatcher m(x, gi, layout);
      VarianceSplit phi{layout, dist::dirichlet_sample(rs, Eigen::VectorXd::Constant(layout.size(), 2.0))};
      phi.phi /= phi.phi.sum();
      const PriorShapeScale fast = m.match(phi, m.spatial_terms(sigma));
      const PriorShapeScale dense = moment_match(x, grouped ? g.indicator() : no_cols(n), sigma, phi);
      CHECK(std::abs(fast.mu_S - dense.mu_S) < 1e-10);
      CHECK(std::abs(fast.sigma2_S - dense.sigma2_S) < 1e-10);
    }
  }
}

TEST_CASE("variance split validation") {
  const ShareLayout layout{3, true, false};
  CHECK(layout.size() == 5);
  VarianceSplit v{layout, Eigen::VectorXd::Constant(5, 0.2)};
  CHECK_NOTHROW(v.validate());
  CHECK(v.coefficient_weights().size() == 3);
  v.phi[0] = 0.3;
  CHECK_THROWS_AS(v.validate(), Error);
  const ShareLayout eq{4, false, true};
  VarianceSplit e{eq, Eigen::Vector2d(0.5, 0.5)};
  CHECK(e.coefficient_weights().isApproxToConstant(0.125));
}

TEST_CASE("w prior sampler") {
  RandomStream rs(6);
  const R2Hyper h{2.0, 3.0};
  const PriorShapeScale ss = PriorShapeScale::from_moments(1.0, 1.0);
  std::vector<double> ws, wss, sv;
  for (int i = 0; i < 100000; ++i) {
    const WPriorDraw d = w_prior_sample(rs, h, ss);
    CHECK(d.w == d.u * d.v);
    // 1/V plays the role of the gamma-distributed S.
    wss.push_back(d.w / d.v);
    sv.push_back(1.0 / d.v);
  }
  CHECK(inference::ks_distance(wss, [](double v) { return dist::gbp_cdf(v, {2, 3, 1, 1}); }) < 0.02);
  const boost::math::gamma_distribution<> s_dist(ss.alpha, ss.beta);
  CHECK(inference::ks_distance(sv, [&](double v) { return boost::math::cdf(s_dist, v); }) < 0.02);
}

TEST_CASE("w prior moments") {
  PriorShapeScale ss;
  ss.alpha = 6.63;
  ss.beta = 0.14;
  const WMoments m = w_prior_moments({4.0, 4.0}, ss);
  CHECK(m.mean == doctest::Approx(4.0 / (0.14 * 5.63 * 3.0)).epsilon(1e-12));
  CHECK(std::abs(m.mean - 1.70) < 0.02);
  CHECK(std::abs(m.variance - 3.68) < 0.05);

  RandomStream rs(7);
  std::vector<double> w;
  for (int i = 0; i < 100000; ++i) w.push_back(w_prior_sample(rs, {4.0, 4.0}, ss).w);
  const auto ms = testing::mean_se(w);
  CHECK(std::abs(ms.mean - m.mean) < 3.0 * ms.se);

  CHECK(std::isinf(w_prior_moments({1.0, 1.0}, ss).mean));
  PriorShapeScale s2;
  s2.alpha = 2.5;
  s2.beta = 1.0;
  const WMoments f = w_prior_moments({1.0, 2.0}, s2);
  CHECK(std::isfinite(f.mean));
  CHECK(std::isinf(f.variance));
}

TEST_CASE("w prior has a mode at zero when a < 1") {
  RandomStream rs(8);
  PriorShapeScale ss;
  ss.alpha = 5.0;
  ss.beta = 0.2;
  std::vector<double> w;
  for (int i = 0; i < 100000; ++i) w.push_back(w_prior_sample(rs, {0.5, 0.5}, ss).w);
  const double h = 0.02;
  auto kde = [&](double x) {
    double acc = 0.0;
    for (double v : w) {
      const double a = (x - v) / h, b = (x + v) / h;
      acc += std::exp(-0.5 * a * a) + std::exp(-0.5 * b * b);
    }
    return acc;
  };
  double prev = kde(0.02);
  for (double x = 0.04; x <= 0.3001; x += 0.02) {
    const double cur = kde(x);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("marginal variance identity") {
  RandomStream rs(9);
  const int n = 30, p = 3;
  const Eigen::MatrixXd x = standardized_normals(n, p, rs);
  const GroupIndex g = cyclic_groups(n, 4);
  const Eigen::MatrixXd z = g.indicator();
  const Eigen::MatrixXd sigma =
      spatial::correlation_matrix(spatial::CorrelationKernel::matern(1.5, 0.2), random_locations(n, rs));
  const ShareLayout layout{p, true, false};
  VarianceSplit phi{layout, Eigen::VectorXd(5)};
  phi.phi << 0.1, 0.2, 0.3, 0.15, 0.25;
  const double s2 = 1.7, w = 0.6;
  Eigen::MatrixXd cov = phi.spatial_weight() * sigma + phi.group_weight() * z * z.transpose();
  cov += x * phi.coefficient_weights().asDiagonal() * x.transpose();
  cov *= s2 * w;
  const double dense = cov.trace() / n;
  CHECK(std::abs(average_marginal_variance(x, z, sigma, phi, s2, w) - dense) < 1e-10);
  CHECK(std::abs(dense - s2 * w) < 1e-10);
}

TEST_CASE("prior predictive R2") {
  RandomStream rs(10);
  const int n = 100;
  PredictiveDesign d;
  d.x = standardized_normals(n, 5, rs);
  d.distances = spatial::distance_matrix(random_locations(n, rs));
  d.kernel = spatial::CorrelationKernel::exponential(0.5);
  PredictiveOptions o;
  o.fixed_phi = Eigen::Vector2d(0.5, 0.5);
  o.n_draws = 10000;

  SUBCASE("zero W") {
    PredictiveOptions z = o;
    z.w_override = 0.0;
    z.n_draws = 200;
    for (double r : prior_r2_simulate(rs, {1, 1}, d, z).r2) CHECK(r == 0.0);
  }
  SUBCASE("calibration") {
    for (auto [a, b] : {std::pair{1.0, 1.0}, std::pair{1.0, 4.0}}) {
      const PredictiveDraws dr = prior_r2_simulate(rs, {a, b}, d, o);
      const auto ms = testing::mean_se(dr.r2);
      CHECK(std::abs(ms.mean - a / (a + b)) < 0.02);
      const boost::math::beta_distribution<> bd(a, b);
      CHECK(inference::ks_distance(dr.r2, [&](double v) { return boost::math::cdf(bd, v); }) < 0.05);
    }
  }
  SUBCASE("invariant to the noise variance") {
    PredictiveOptions small = o, large = o;
    small.n_draws = large.n_draws = 500;
    large.sigma_sq = 3.7;
    RandomStream r1(77), r2(77);
    const auto s = prior_r2_simulate(r1, {1, 1}, d, small);
    const auto l = prior_r2_simulate(r2, {1, 1}, d, large);
    for (std::size_t i = 0; i < s.r2.size(); ++i) CHECK(std::abs(s.r2[i] - l.r2[i]) < 1e-12);
  }
}
