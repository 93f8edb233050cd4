#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sicm/timescale.hpp"
#include "sicm/types.hpp"

using namespace sicm;

TEST_CASE("grid values") {
  TimeGrid g(100);
  CHECK(g.t_of(0) == 0);
  CHECK(g.t_of(1) == doctest::Approx(0.5));
  CHECK(g.t_of(2) == doctest::Approx(5.0 / 6));
  CHECK(g.m_of(0.4) == 0);
  CHECK(g.m_of(0.5) == 1);
  CHECK(g.a_of(0.9) == doctest::Approx(5.0 / 6));
  for (int k = 1; k <= 100; ++k) CHECK(g.t_of(k) - g.t_of(k - 1) == doctest::Approx(1.0 / (k + 1)).epsilon(1e-12));
  CHECK_THROWS_AS(g.m_of(g.t_n() + 1e-9), RangeError);
  CHECK_THROWS_AS(g.m_of(-1e-9), RangeError);
  CHECK_THROWS_AS(g.t_of(101), RangeError);
}

TEST_CASE("psi_e at breakpoints") {
  TimeGrid g(100);
  CHECK(g.psi_e(0) == 2);
  CHECK(g.psi_e(0.5) == 3);
  for (int k = 0; k <= 10; ++k) CHECK(g.psi_e(g.t_of(k)) == k + 2);
  CHECK_THROWS_AS(g.psi_e(g.t_n()), RangeError);
}

TEST_CASE("psi_e integrates to n") {
  for (std::int64_t n : {1, 7, 1000, 100000}) CHECK(TimeGrid(n).psi_integral() == doctest::Approx(n).epsilon(1e-12));
}

TEST_CASE("psi_limit_gap") {
  CHECK(psi_limit_gap(1000, 0.0) == doctest::Approx(2.0 / 1000));
  CHECK(psi_limit_gap(10000, 3.0) < psi_limit_gap(100, 3.0));
  CHECK(psi_limit_gap(1000000, 5.0) <= 1e-3);
  for (double t : {0.5, 1.0, 2.0}) {
    double big = psi_limit_gap(1000000, t);
    CHECK(big < 1e-4);
    CHECK(big < psi_limit_gap(100000, t));
  }
  CHECK_THROWS_AS(psi_limit_gap(10, 100.0), RangeError);
}

TEST_CASE("psi_limit_gap matches a dense scan from below") {
  // the exact supremum dominates every sampled value and is attained near one of them
  const std::int64_t n = 200;
  TimeGrid g(n);
  const double t = 2.0;
  double scan = 0;
  for (int i = 0; i <= 200000; ++i) {
    double s = t * i / 200000.0;
    double v = std::abs(static_cast<double>(g.psi_e(std::min(g.t_n() - s, std::nextafter(g.t_n(), 0.0)))) / n -
                        std::exp(-s));
    scan = std::max(scan, v);
  }
  double exact = psi_limit_gap(g, t);
  CHECK(exact >= scan - 1e-12);
  CHECK(exact - scan <= 1e-4);
}

TEST_CASE("harmonic brackets") {
  CHECK_FALSE(harmonic_bracket_violation(1000000).has_value());
}
