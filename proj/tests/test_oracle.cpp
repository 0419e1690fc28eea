#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gtfd/data.hpp"
#include "gtfd/oracle.hpp"

using namespace gtfd;
using namespace gtfd::oracle;

TEST_CASE("empirical w1 basics") {
  Empirical1D a = Empirical1D::from_samples({0});
  Empirical1D b = Empirical1D::from_samples({1});
  CHECK(w1_empirical(a, a) == 0.0);
  CHECK(w1_empirical(a, b) == 1.0);
  Empirical1D c = Empirical1D::from_samples({1, 0});
  Empirical1D d = Empirical1D::from_samples({2, 1});
  CHECK(w1_empirical(c, d) == doctest::Approx(1.0));
  CHECK_THROWS(w1_empirical(a, c));
}

TEST_CASE("empirical w1 is exact on constant shifts") {
  Rng rng(1);
  std::vector<double> s(1000);
  for (double& v : s) v = rng.normal() * 3 + 1;
  std::vector<double> t = s;
  for (double& v : t) v += -2.75;
  double w = w1_empirical(Empirical1D::from_samples(s), Empirical1D::from_samples(t));
  CHECK(w == doctest::Approx(2.75).epsilon(1e-12));
}

TEST_CASE("gaussian w1: identity, scale and translation") {
  CHECK(w1_gaussian(0, 1, 0, 1) == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(w1_gaussian(0, 1, 0, 2) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-6));
  CHECK(w1_gaussian(0, 1, 1, 1) == doctest::Approx(1.0).epsilon(1e-8));
  // general case: both mean and std differ; cross-check against a large
  // empirical draw
  Rng rng(2);
  int64_t n = 200000;
  std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
  for (double& v : a) v = 0.3 + 0.8 * rng.normal();
  for (double& v : b) v = -0.4 + 1.7 * rng.normal();
  double emp = w1_empirical(Empirical1D::from_samples(a), Empirical1D::from_samples(b));
  double quad = w1_gaussian(0.3, 0.8, -0.4, 1.7);
  CHECK(std::fabs(emp - quad) < 3.0 / std::sqrt(static_cast<double>(n)) + 0.01);
}

TEST_CASE("linear factors at sigma 0 and 1") {
  LinearFactors f0 = linear_factors(0.0);
  CHECK(f0.g1 == doctest::Approx(1.0));
  CHECK(f0.g2 == doctest::Approx(1.0));
  CHECK(f0.map == doctest::Approx(1.0));
  LinearFactors f1 = linear_factors(1.0);
  CHECK(f1.g1 == doctest::Approx(0.70711).epsilon(1e-4));
  CHECK(f1.g2 == doctest::Approx(0.29289).epsilon(1e-4));
  CHECK(f1.map == doctest::Approx(0.5));
}

TEST_CASE("factor ordering g2 <= map <= g1 across sigma") {
  for (double s = 0.1; s <= 3.0; s += 0.1) {
    LinearFactors f = linear_factors(s);
    CHECK(f.g2 <= f.map + 1e-12);
    CHECK(f.map <= f.g1 + 1e-12);
  }
}

TEST_CASE("brute-force argmin matches the closed forms") {
  for (double s : {0.25, 0.5, 1.0, 2.0}) {
    LinearFactors f = linear_factors(s);
    CHECK(std::fabs(linear_argmin(LinearObjective::obs1, s) - f.g1) <= 1.5e-3);
    CHECK(std::fabs(linear_argmin(LinearObjective::obs2, s) - f.g2) <= 1.5e-3);
  }
  CHECK(std::fabs(linear_argmin(LinearObjective::obs1, 0.0) - 1.0) <= 1.5e-3);
}

TEST_CASE("convolution identity: dirac, positive and negative controls") {
  std::vector<double> y(20000, 0.0), eta(20000, 1.0), yd(20000, 1.0);
  CHECK(convolution_identity_check(y, eta, yd) == doctest::Approx(0.0).epsilon(1e-9));

  Rng rng(3);
  int64_t n = 100000;
  std::vector<double> gy(static_cast<size_t>(n)), ge(static_cast<size_t>(n)),
      gyd(static_cast<size_t>(n)), bad(static_cast<size_t>(n));
  for (double& v : gy) v = rng.normal();
  for (double& v : ge) v = rng.normal();
  for (int64_t i = 0; i < n; ++i)
    gyd[static_cast<size_t>(i)] = rng.normal() + rng.normal();  // independent draws
  for (double& v : bad) v = rng.normal();  // N(0,1) instead of N(0,2)
  CHECK(convolution_identity_check(gy, ge, gyd) < 0.05);
  CHECK(convolution_identity_check(gy, ge, bad) > 0.1);
}

TEST_CASE("empirical matches quadrature within the consistency band") {
  Rng rng(4);
  for (int64_t n : {1000, 10000}) {
    std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = 0.5 + 1.5 * rng.normal();
    double emp = w1_empirical(Empirical1D::from_samples(a), Empirical1D::from_samples(b));
    double quad = w1_gaussian(0, 1, 0.5, 1.5);
    CHECK(std::fabs(emp - quad) < 3.0 / std::sqrt(static_cast<double>(n)));
  }
}
