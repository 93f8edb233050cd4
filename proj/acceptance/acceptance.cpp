// acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "common.hpp"
#include "sicm/construct.hpp"
#include "sicm/rate.hpp"
#include "sicm/simulate.hpp"
#include "sicm/timescale.hpp"

using namespace sicm;
using sicm::testing::example_models;
using sicm::testing::qsd3;
using sicm::testing::random_interior;
using sicm::testing::random_polya;
using sicm::testing::uniform2;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

void note(Verdict& v, bool ok, const std::string& what) {
  if (!ok) v.pass = false;
  if (!v.detail.empty()) v.detail += "; ";
  v.detail += (ok ? "" : "VIOLATED ") + what;
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ProbVec pv(std::initializer_list<double> xs) {
  ProbVec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// R(gamma || m ⊗ G) over the one free entry gamma(0,0) of a 2x2 measure with marginals m
double dv_grid_2x2(const ProbVec& m, const Eigen::MatrixXd& g, int points) {
  const double lo = std::max(0.0, m(0) - m(1)), hi = m(0);
  auto term = [](double p, double q) { return p > 0 ? p * std::log(p / q) : 0.0; };
  double best = kInf;
  for (int i = 0; i <= points; ++i) {
    double a = lo + (hi - lo) * i / points;
    double b = m(0) - a, c = m(0) - a, e = m(1) - m(0) + a;
    double r = term(a, m(0) * g(0, 0)) + term(b, m(0) * g(0, 1)) + term(c, m(1) * g(1, 0)) + term(e, m(1) * g(1, 1));
    best = std::min(best, r);
  }
  return best;
}

Verdict criterion1() {
  Verdict v;
  auto u = uniform2();
  for (auto m : {pv({0.6, 0.4}), pv({0.75, 0.25}), pv({0.9, 0.1})}) {
    double dv = dv_rate(m, u, &u.adjacency);
    double grid = dv_grid_2x2(m, eval_kernel(u, m), 1000000);
    auto cert = rate_upper(m, u, u.adjacency, 8.0, 160);
    note(v, std::abs(cert.value - dv) <= 5e-3,
         "m0=" + fmt("%.2f", m(0)) + " |rate-dv|=" + fmt("%.2e", std::abs(cert.value - dv)));
    note(v, std::abs(dv - grid) <= 1e-5, "|dv-grid|=" + fmt("%.1e", std::abs(dv - grid)));
  }
  return v;
}

Verdict criterion2() {
  Verdict v;
  auto q = qsd3();
  int feasible = 0;
  double worst = -kInf;
  for (int i = 0; i <= 14; ++i) {
    ProbVec m = pv({i / 14.0, 1 - i / 14.0});
    if (!pstar_feasible(m, q.adjacency).feasible) continue;
    ++feasible;
    double dv = dv_rate(m, q, &q.adjacency);
    auto cert = rate_upper(m, q, q.adjacency, 8.0, 80);
    worst = std::max(worst, cert.value - dv);
    if (!(cert.value <= dv + 1e-3)) note(v, false, "m0=" + fmt("%.4f", m(0)) + " rate-dv=" + fmt("%.2e", cert.value - dv));
  }
  note(v, feasible > 0, std::to_string(feasible) + "/15 feasible grid points");
  note(v, true, "max(rate-dv)=" + fmt("%.2e", worst));
  return v;
}

// plain damped iteration m <- (m + m G(m)) / 2
ProbVec power_oracle(const ModelSpec& model) {
  ProbVec m = uniform(model.d);
  for (int it = 0; it < 2000000; ++it) {
    ProbVec next = 0.5 * m + 0.5 * (m.transpose() * eval_kernel(model, m)).transpose();
    next /= next.sum();
    double step = l1((next - m).eval());
    m = next;
    if (step < 1e-15) break;
  }
  return m;
}

ProbVec perron_left(const Eigen::MatrixXd& p) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(p.rows(), 1.0 / p.rows());
  for (int it = 0; it < 1000000; ++it) {
    Eigen::RowVectorXd w = v * p;
    w /= w.sum();
    double step = (w - v).lpNorm<1>();
    v = w;
    if (step < 1e-16) break;
  }
  return v.transpose();
}

Verdict criterion3() {
  Verdict v;
  for (const auto& [name, model] : example_models()) {
    ProbVec pi = fixed_point(model).pi;
    ProbVec oracle = name == "qsd" ? perron_left(model.base) : power_oracle(model);
    double err = l1((pi - oracle).eval());
    auto cert = rate_upper(pi, model, model.adjacency, 8.0, 80);
    note(v, err <= 1e-8 && cert.value <= 1e-3,
         name + ": |pi-oracle|=" + fmt("%.1e", err) + " rate=" + fmt("%.1e", cert.value));
  }
  return v;
}

Verdict criterion4() {
  Verdict v;
  double big = psi_limit_gap(1000000, 5.0), small = psi_limit_gap(10000, 5.0);
  note(v, big <= 1e-3, "gap(1e6,5)=" + fmt("%.3e", big));
  note(v, big < small, "gap(1e4,5)=" + fmt("%.3e", small));
  auto bad = harmonic_bracket_violation(1000000);
  note(v, !bad, bad ? "bracket fails at n=" + std::to_string(*bad) : "brackets hold for 2<=n<=1e6");
  return v;
}

// log P(Bin(n,1/2) in [a,b]) by log-sum-exp over exact log binomial coefficients
double log_binomial_half(int n, int a, int b) {
  double top = -kInf;
  std::vector<double> terms;
  for (int k = a; k <= b; ++k) {
    double t = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0);
    terms.push_back(t);
    top = std::max(top, t);
  }
  double s = 0;
  for (double t : terms) s += std::exp(t - top);
  return top + std::log(s);
}

Verdict criterion5() {
  Verdict v;
  auto u = uniform2();
  const ProbVec target = pv({0.75, 0.25});
  const double radius = 0.01;
  const int n = 200;
  const std::int64_t reps = 1000000;
  // L^{n+1} has X_0 = 0 plus Bin(n, 1/2) further visits to state 0; the ball is |c/(n+1) - 0.75| <= radius/2
  int a = n + 1, b = -1;
  for (int c = 0; c <= n + 1; ++c)
    if (std::abs(2.0 * (c / (n + 1.0) - 0.75)) <= radius + 1e-12) {
      a = std::min(a, c - 1);
      b = std::max(b, c - 1);
    }
  const double logp = log_binomial_half(n, a, b);
  const double oracle_slope = -logp / n;
  auto h = mc_hit_probability(u, target, radius, n, reps, 20240601);
  const double slope_lo = -std::log(h.ci_hi) / n;
  const double slope_hi = h.ci_lo > 0 ? -std::log(h.ci_lo) / n : kInf;
  note(v, oracle_slope >= 0.10 && oracle_slope <= 0.17,
       "exact p=" + fmt("%.3e", std::exp(logp)) + " oracle slope=" + fmt("%.4f", oracle_slope));
  note(v, oracle_slope >= slope_lo && oracle_slope <= slope_hi,
       "Wilson slope range [" + fmt("%.4f", slope_lo) + ", " + fmt("%.4g", slope_hi) + "]");
  if (h.slope) {
    note(v, *h.slope >= 0.10 && *h.slope <= 0.17, "MC slope=" + fmt("%.4f", *h.slope));
  } else {
    note(v, false, "MC slope undefined: " + std::to_string(h.hits) + " hits in 1e6 reps (expected " +
                       fmt("%.1e", std::exp(logp) * reps) + ")");
  }
  return v;
}

Verdict criterion6() {
  Verdict v;
  auto u = uniform2();
  const ProbVec m = pv({0.75, 0.25});
  Eigen::MatrixXd ka(2, 2), kb(2, 2);
  ka << 0.7, 0.3, 0.7, 0.3;
  kb << 0.8, 0.2, 0.8, 0.2;
  auto path = path_from_kernels(2.0, {ka, kb});
  ScheduleConfig cfg;
  cfg.eps0 = 0.05;
  cfg.eps1 = 0.05;
  auto s = build_schedule(path, m, u, fixed_point(u).pi, cfg);
  const double cost = discretized_cost(path, propagate(m, path), u);
  const auto& k = s.constants;
  int close = 0, tight = 0;
  double mean = 0;
  for (int seed = 1; seed <= 100; ++seed) {
    auto r = run_controlled(u, s, 0, 100000, static_cast<std::uint64_t>(seed));
    double gap = l1((r.final_empirical - s.target).eval());
    if (gap <= k.d3 * s.eps0) ++close;
    if (gap <= s.eps0) ++tight;
    mean += r.realized_cost / 100;
  }
  const double bound = cost + k.C1 * s.eps1 + (s.l0 + 1) * (k.A1 * s.eps0 + k.B1 * s.eps1) + 0.05;
  note(v, close >= 90, std::to_string(close) + "/100 within d3*eps0=" + fmt("%.3g", k.d3 * s.eps0) + " (" +
                           std::to_string(tight) + "/100 within eps0)");
  note(v, mean <= bound, "mean cost=" + fmt("%.4f", mean) + " path cost=" + fmt("%.4f", cost) +
                             " bound=" + fmt("%.4g", bound));
  return v;
}

Verdict criterion7() {
  Verdict v;
  std::mt19937_64 gen(4242);
  std::normal_distribution<double> nrm(0, 1);
  int done = 0, ok = 0;
  double worst = 0;
  for (int t = 0; t < 500 && done < 20; ++t) {
    auto model = random_polya(3, gen);
    ProbVec m = random_interior(3, gen, 0.1);
    RateObjective obj(model, AdjacencySpec::full(3), m, 1.0, 10, RateOptions{});
    Eigen::VectorXd theta(obj.size());
    for (int i = 0; i < theta.size(); ++i) theta(i) = nrm(gen);
    Eigen::VectorXd g;
    if (!std::isfinite(obj(theta, &g))) continue;
    Eigen::VectorXd fd(theta.size());
    for (int i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd a = theta, b = theta;
      a(i) += 1e-5;
      b(i) -= 1e-5;
      fd(i) = (obj(a) - obj(b)) / 2e-5;
    }
    double rel = (g - fd).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>();
    worst = std::max(worst, rel);
    if (rel <= 1e-4) ++ok;
    ++done;
  }
  note(v, done == 20 && ok == 20,
       std::to_string(ok) + "/" + std::to_string(done) + " instances, worst relative error " + fmt("%.2e", worst));
  return v;
}

// m in the cone of cycle vertex sets, by Caratheodory subsets and exact linear solves
bool cone_oracle(const ProbVec& m, const Eigen::MatrixXi& a) {
  const int d = static_cast<int>(m.size());
  std::vector<Eigen::VectorXd> gens;
  for (int x = 0; x < d; ++x)
    if (a(x, x)) gens.push_back(vertex(d, x));
  for (int x = 0; x < d; ++x)
    for (int y = x + 1; y < d; ++y)
      if (a(x, y) && a(y, x)) gens.push_back(vertex(d, x) + vertex(d, y));
  if (d == 3 && ((a(0, 1) && a(1, 2) && a(2, 0)) || (a(0, 2) && a(2, 1) && a(1, 0))))
    gens.push_back(Eigen::VectorXd::Ones(3));
  const int g = static_cast<int>(gens.size());
  for (int mask = 1; mask < (1 << g); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < g; ++i)
      if (mask >> i & 1) idx.push_back(i);
    if (static_cast<int>(idx.size()) > d) continue;
    Eigen::MatrixXd V(d, idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) V.col(j) = gens[idx[j]];
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(V);
    if (qr.rank() < static_cast<int>(idx.size())) continue;
    Eigen::VectorXd w = qr.solve(m);
    if ((V * w - m).lpNorm<Eigen::Infinity>() <= 1e-12 && w.minCoeff() >= -1e-12) return true;
  }
  return false;
}

Verdict criterion8() {
  Verdict v;
  std::mt19937_64 gen(808);
  const std::vector<ProbVec> boundary{pv({1, 0, 0}), pv({0, 1, 0}), pv({0, 0, 1}), pv({0.5, 0.5, 0}),
                                      pv({0.5, 0, 0.5}), pv({0, 0.5, 0.5}), pv({1.0 / 3, 1.0 / 3, 1.0 / 3}),
                                      pv({0.25, 0.25, 0.5})};
  int graphs = 0, checks = 0, agree = 0, yes = 0;
  for (int bits = 0; bits < 512; ++bits) {
    Eigen::MatrixXi a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = bits >> i & 1;
    if (!strongly_connected(a)) continue;
    ++graphs;
    auto adj = AdjacencySpec::from_matrix(a);
    for (int r = 0; r < 20; ++r) {
      ProbVec m = r < 12 ? random_interior(3, gen, 0.0) : boundary[(r - 12 + bits) % boundary.size()];
      bool got = pstar_feasible(m, adj).feasible, want = cone_oracle(m, a);
      ++checks;
      if (got == want) ++agree;
      if (want) ++yes;
    }
  }
  Eigen::MatrixXi cyc(2, 2);
  cyc << 0, 1, 1, 0;
  bool two = pstar_feasible(pv({0.3, 0.7}), AdjacencySpec::from_matrix(cyc)).feasible;
  note(v, agree == checks, std::to_string(agree) + "/" + std::to_string(checks) + " agree over " +
                               std::to_string(graphs) + " irreducible graphs (" + std::to_string(yes) + " feasible)");
  note(v, !two, "2-cycle m=(0.3,0.7) infeasible");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> suite{
      {"dv reduction on the uniform model", criterion1},
      {"upper bound below dv on the qsd grid", criterion2},
      {"rate vanishes at the fixed point", criterion3},
      {"timescale asymptotics", criterion4},
      {"empirical decay probe", criterion5},
      {"construction verification", criterion6},
      {"rate objective gradient", criterion7},
      {"feasibility against the cycle-cone oracle", criterion8},
  };
  int failed = 0;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = suite[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failed;
    std::printf("%s criterion %zu (%s): %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", i + 1, suite[i].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(suite.size()) - failed, suite.size());
  return failed == 0 ? 0 : 1;
}
