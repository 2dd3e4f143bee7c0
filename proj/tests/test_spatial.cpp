#include <doctest.h>

#include <cmath>

#include "r2d2/error.hpp"
#include "r2d2/random.hpp"
#include "r2d2/spatial.hpp"

using namespace r2d2;
using namespace r2d2::spatial;

namespace {

Locations random_locations(int n, std::uint64_t seed) {
  RandomStream rs(seed);
  Locations l;
  l.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    l.coords(i, 0) = rs.uniform();
    l.coords(i, 1) = rs.uniform();
  }
  return l;
}

Eigen::MatrixXd dense_p(Eigen::Index n) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  p.array() -= 1.0 / static_cast<double>(n);
  return p / static_cast<double>(n - 1);
}

Eigen::MatrixXd random_spd(int n, std::uint64_t seed) {
  RandomStream rs(seed);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rs.normal();
  Eigen::MatrixXd b = a * a.transpose();
  b.diagonal().array() += 1.0;
  return b;
}

}  // namespace

TEST_CASE("distance matrix") {
  Locations l;
  l.coords.resize(3, 2);
  l.coords << 0, 0, 3, 4, 3, 4;
  const Eigen::MatrixXd d = distance_matrix(l);
  CHECK(d(0, 1) == 5.0);
  CHECK(d(1, 2) == 0.0);
  CHECK(d.diagonal().isZero(0.0));
  const Eigen::MatrixXd r = distance_matrix(random_locations(10, 1));
  CHECK((r - r.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("correlation matrix values") {
  Locations l;
  l.coords.resize(2, 2);
  l.coords << 0, 0, 0.3, 0.4;
  const Eigen::MatrixXd e = correlation_matrix(CorrelationKernel::exponential(0.5), l);
  CHECK(std::abs(e(0, 1) - std::exp(-1.0)) < 1e-12);

  const Eigen::MatrixXd cs = correlation_matrix(CorrelationKernel::compound_symmetry(0.0), random_locations(7, 2));
  CHECK(cs.isIdentity(0.0));

  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
  expected << 1, .5, 0, 0, .5, 1, 0, 0, 0, 0, 1, .5, 0, 0, .5, 1;
  const Eigen::MatrixXd bcs = correlation_matrix(CorrelationKernel::blocked_compound_symmetry(0.5, 2), random_locations(4, 3));
  CHECK((bcs - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matern closed forms") {
  const double d = 0.37, rho = 0.2, t = d / rho;
  CHECK(CorrelationKernel::matern(0.5, rho).at_distance(d) == doctest::Approx(std::exp(-t)).epsilon(1e-14));
  CHECK(CorrelationKernel::matern(1.5, rho).at_distance(d) ==
        doctest::Approx((1 + std::sqrt(3.0) * t) * std::exp(-std::sqrt(3.0) * t)).epsilon(1e-14));
  CHECK(CorrelationKernel::matern(2.5, rho).at_distance(d) ==
        doctest::Approx((1 + std::sqrt(5.0) * t + 5.0 * t * t / 3.0) * std::exp(-std::sqrt(5.0) * t)).epsilon(1e-14));
  CHECK_THROWS_AS(CorrelationKernel::matern(1.0, rho), Error);
}

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(CorrelationKernel::exponential(0.0), Error);
  CHECK_THROWS_AS(CorrelationKernel::compound_symmetry(1.5), Error);
  CHECK_THROWS_AS(CorrelationKernel::blocked_compound_symmetry(0.5, 0), Error);
  CHECK_NOTHROW(CorrelationKernel::compound_symmetry(1.0));
}

TEST_CASE("correlation matrices are exactly symmetric with unit diagonal") {
  const Locations l = random_locations(25, 4);
  for (const auto& k : {CorrelationKernel::exponential(0.3), CorrelationKernel::matern(1.5, 0.1),
                        CorrelationKernel::matern(2.5, 0.4), CorrelationKernel::compound_symmetry(0.3),
                        CorrelationKernel::blocked_compound_symmetry(0.7, 5)}) {
    const Eigen::MatrixXd s = correlation_matrix(k, l);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.diagonal().array() == 1.0).all());
  }
}

TEST_CASE("center_apply") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Constant(5, 1, 3.0);
  CHECK(center_apply(c).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd m(2, 1);
  m << 0, 2;
  const Eigen::MatrixXd pm = center_apply(m);
  CHECK(pm(0, 0) == doctest::Approx(-1.0));
  CHECK(pm(1, 0) == doctest::Approx(1.0));

  RandomStream rs(5);
  Eigen::MatrixXd r(20, 3);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rs.normal();
  CHECK((center_apply(r) - dense_p(20) * r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((center_apply(center_apply(r)) - center_apply(r) / 19.0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("trace_pair") {
  const TracePair id = trace_pair(Eigen::MatrixXd::Identity(3, 3));
  CHECK(id.trace == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(id.trace_sq == doctest::Approx(0.5).epsilon(1e-14));

  const TracePair ones = trace_pair(Eigen::MatrixXd::Ones(6, 6));
  CHECK(std::abs(ones.trace) < 1e-14);
  CHECK(std::abs(ones.trace_sq) < 1e-14);

  const Eigen::MatrixXd b = random_spd(30, 6);
  const Eigen::MatrixXd p = dense_p(30);
  const double t = (p * b).trace();
  const double t2 = (p * b * p * b).trace();
  const TracePair fast = trace_pair(b);
  CHECK(std::abs(fast.trace - t) < 1e-8 * std::abs(t));
  CHECK(std::abs(fast.trace_sq - t2) < 1e-8 * std::abs(t2));
  const TracePair eig = trace_pair_eigen(b);
  CHECK(std::abs(eig.trace - t) < 1e-8 * std::abs(t));
  CHECK(std::abs(eig.trace_sq - t2) < 1e-8 * std::abs(t2));
}

TEST_CASE("pairwise-sum identity on the generic trace path") {
  for (int n : {10, 50}) {
    const Locations l = random_locations(n, 7 + n);
    const Eigen::MatrixXd s = correlation_matrix(CorrelationKernel::exponential(0.25), l);
    double pair_sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) pair_sum += s(i, j);
    const double expected = 1.0 - 2.0 / (n * (n - 1.0)) * pair_sum;
    CHECK(std::abs(trace_pair(s).trace - expected) < 1e-10);
  }
}
