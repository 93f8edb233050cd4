#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "common.hpp"
#include "sicm/rng.hpp"
#include "sicm/simulate.hpp"

using namespace sicm;
using sicm::testing::qsd3;
using sicm::testing::uniform2;

namespace {

// P(a <= Bin(n, 1/2) <= b), exact in double via the Pascal row
double binomial_half(int n, int a, int b) {
  std::vector<double> row{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (std::size_t k = 0; k < row.size(); ++k) {
      next[k] += 0.5 * row[k];
      next[k + 1] += 0.5 * row[k];
    }
    row.swap(next);
  }
  double s = 0;
  for (int k = std::max(0, a); k <= std::min(n, b); ++k) s += row[k];
  return s;
}

ChainRun from_states(std::vector<int> states, int d) {
  ChainRun r;
  r.states = std::move(states);
  r.n = static_cast<std::int64_t>(r.states.size()) - 1;
  r.final_empirical = ProbVec::Zero(d);
  for (int x : r.states) r.final_empirical(x) += 1.0 / r.states.size();
  return r;
}

}  // namespace

TEST_CASE("philox4x64-10 known answers") {
  using A = Philox4x64::Block;
  auto a = Philox4x64::bijection(A{0, 0, 0, 0}, {0, 0});
  CHECK(a == A{0x16554d9eca36314cULL, 0xdb20fe9d672d0fdcULL, 0xd7e772cee186176bULL, 0x7e68b68aec7ba23bULL});
  auto b = Philox4x64::bijection(A{1, 2, 3, 4}, {5, 6});
  CHECK(b == A{0xa39b5519339fe354ULL, 0xaceb1228efc25196ULL, 0xa0a2e3c25aa5f4fcULL, 0x08d0cfa9332720dfULL});
  auto c = Philox4x64::bijection(A{~0ULL, 0, 7, 0}, {0xdeadbeefULL, 12345});
  CHECK(c == A{0x6b9b5092b922234dULL, 0xed0c00dc3f1aff92ULL, 0xd93238b18b694ebaULL, 0x5d9d3ef3f73a4ef8ULL});
}

TEST_CASE("philox streams are distinct and uniforms lie in [0,1)") {
  Philox4x64 a(1, 0, 0), b(1, 1, 0), c(1, 0, 1);
  bool differ_rep = false, differ_sub = false;
  for (int i = 0; i < 8; ++i) {
    auto x = a(), y = b(), z = c();
    differ_rep = differ_rep || x != y;
    differ_sub = differ_sub || x != z;
  }
  CHECK(differ_rep);
  CHECK(differ_sub);
  Philox4x64 u(7);
  double mean = 0;
  for (int i = 0; i < 100000; ++i) {
    double v = u.uniform();
    CHECK((v >= 0 && v < 1));
    mean += v / 100000;
  }
  CHECK(std::abs(mean - 0.5) < 0.01);
}

TEST_CASE("sample_row inverse cdf") {
  Eigen::VectorXd p(3);
  p << 0.2, 0.0, 0.8;
  CHECK(sample_row(p, 0.0) == 0);
  CHECK(sample_row(p, 0.1999) == 0);
  CHECK(sample_row(p, 0.2) == 2);
  CHECK(sample_row(p, 0.999999999) == 2);
}

TEST_CASE("run_chain basics") {
  auto u = uniform2();
  auto r = run_chain(u, 0, 100000, 42);
  CHECK(l1((r.final_empirical - uniform(2)).eval()) <= 0.05);
  auto one = run_chain(u, 1, 1, 3);
  ProbVec want = ProbVec::Zero(2);
  want(1) += 0.5;
  want(one.states[1]) += 0.5;
  CHECK(l1((one.final_empirical - want).eval()) == 0);
  for (std::size_t i = 0; i < r.path_steps.size(); ++i) {
    // entries are multiples of 1/(k+1)
    const double k1 = static_cast<double>(r.path_steps[i] + 1);
    for (int z = 0; z < 2; ++z) {
      double c = r.empirical_path[i](z) * k1;
      CHECK(std::abs(c - std::round(c)) < 1e-9);
    }
  }
  CHECK(r.path_steps.size() == 1000);
  CHECK(r.path_steps.back() == 100000);
}

TEST_CASE("run_chain is reproducible") {
  auto q = qsd3();
  auto a = run_chain(q, 0, 50000, 9), b = run_chain(q, 0, 50000, 9), c = run_chain(q, 0, 50000, 10);
  CHECK(a.states == b.states);
  CHECK(a.states != c.states);
  CHECK(final_empirical(q, 0, 50000, 9, 0) == a.final_empirical);
}

TEST_CASE("recursive empirical update equals the count average") {
  auto q = qsd3();
  auto r = run_chain(q, 1, 1000000, 5);
  ProbVec L = vertex(2, r.states[0]);
  for (std::size_t k = 1; k < r.states.size(); ++k) L += (vertex(2, r.states[k]) - L) / static_cast<double>(k + 1);
  CHECK(l1((L - r.final_empirical).eval()) <= 1e-12);
  const double n1 = static_cast<double>(r.n + 1);
  for (int z = 0; z < 2; ++z) CHECK(std::abs(r.final_empirical(z) * n1 - std::round(r.final_empirical(z) * n1)) < 1e-6);
}

TEST_CASE("qsd chain converges to the fixed point") {
  auto q = qsd3();
  ProbVec pi = fixed_point(q).pi;
  int good = 0;
  for (std::uint64_t s = 1; s <= 10; ++s)
    if (l1((final_empirical(q, 0, 1000000, s, 0) - pi).eval()) <= 0.02) ++good;
  CHECK(good >= 9);
}

TEST_CASE("transitions stay on A_+") {
  auto models = sicm::testing::example_models();
  for (const auto& [name, model] : models) {
    INFO(name);
    auto r = run_chain(model, 0, 20000, 3);
    bool ok = true;
    for (std::size_t k = 0; k + 1 < r.states.size(); ++k) ok = ok && model.adjacency.has(r.states[k], r.states[k + 1]);
    CHECK(ok);
  }
}

TEST_CASE("pair_empirical") {
  std::vector<int> alt;
  for (int k = 0; k <= 100; ++k) alt.push_back(k % 2);
  auto p = pair_empirical(from_states(alt, 2));
  CHECK(std::abs(p(0, 1) - 0.5) <= 0.02);
  CHECK(std::abs(p(1, 0) - 0.5) <= 0.02);
  CHECK(p(0, 0) == 0);
  auto c = pair_empirical(from_states(std::vector<int>(50, 1), 2));
  CHECK(c(1, 1) == 1.0);
  CHECK(c.sum() == 1.0);
  auto q = qsd3();
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto r = run_chain(q, static_cast<int>(s % 2), 37 + static_cast<std::int64_t>(s), s);
    auto pm = pair_empirical(r);
    CHECK(l1((first_marginal(pm) - second_marginal(pm)).eval()) <= 2.0 / r.n + 1e-15);
  }
  CHECK_THROWS_AS(pair_empirical(from_states({0}, 2)), ValidationError);
}

TEST_CASE("never-control schedule reproduces run_chain") {
  auto q = qsd3();
  auto plain = run_chain(q, 0, 20000, 77);
  auto ctl = run_controlled(q, ControlSchedule::never(2), 0, 20000, 77);
  CHECK(ctl.states == plain.states);
  CHECK(ctl.realized_cost == 0);
  CHECK(ctl.phase_log.size() == 1);
  CHECK(ctl.phase_log[0].phase == Phase::fallback);
}

TEST_CASE("wilson interval") {
  auto [lo, hi] = wilson_interval(0, 1000000);
  CHECK(lo == 0);
  const double z2 = 1.959963984540054 * 1.959963984540054;
  CHECK(hi == doctest::Approx(z2 / (1e6 + z2)).epsilon(1e-12));
  auto [a, b] = wilson_interval(50, 100);
  CHECK(a < 0.5);
  CHECK(b > 0.5);
  CHECK((a + b) / 2 == doctest::Approx(0.5));
}

TEST_CASE("mc_hit_probability against the binomial oracle") {
  auto u = uniform2();
  ProbVec t(2);
  t << 0.75, 0.25;
  // L counts X_0 = 0 plus Bin(20, 1/2) hits of state 0; the ball holds counts 15 and 16 of 21
  double exact = binomial_half(20, 14, 15);
  auto h = mc_hit_probability(u, t, 0.1, 20, 100000, 1);
  CHECK(exact >= h.ci_lo);
  CHECK(exact <= h.ci_hi);
  REQUIRE(h.slope.has_value());
  CHECK(*h.slope == doctest::Approx(-std::log(h.p_hat) / 20));
  auto all = mc_hit_probability(u, t, 2.0, 50, 1000, 2);
  CHECK(all.p_hat == 1.0);
  auto q = qsd3();
  auto near = mc_hit_probability(q, fixed_point(q).pi, 0.2, 5000, 200, 3);
  CHECK(near.p_hat >= 0.95);
}

TEST_CASE("mc_hit_probability is independent of the thread count") {
  auto u = uniform2();
  ProbVec t(2);
  t << 0.6, 0.4;
  auto a = mc_hit_probability(u, t, 0.1, 40, 5000, 8, 0, 1);
  auto b = mc_hit_probability(u, t, 0.1, 40, 5000, 8, 0, 7);
  CHECK(a.hits == b.hits);
}
