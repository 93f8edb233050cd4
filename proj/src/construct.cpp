#include "sicm/construct.hpp"

#include <algorithm>
#include <cstdio>

#include "sicm/rng.hpp"
#include "sicm/timescale.hpp"

namespace sicm {

namespace {

void check_fixed_point(const ModelSpec& model, const ProbVec& pistar) {
  if (pistar.size() != model.d || !on_simplex(pistar))
    throw ValidationError("pistar must be a point of the simplex");
  double r = l1((pistar.transpose() * eval_kernel(model, pistar)).transpose() - pistar);
  if (r > 1e-8) throw ValidationError("pistar must be a fixed point of the model within 1e-8");
}

std::vector<PairMeasure> pairs_of(const ControlPath& path) {
  std::vector<PairMeasure> out;
  for (int j = 0; j < path.N; ++j) out.push_back(path.pair_control(j));
  return out;
}

// largest k in (0, 1] with pred(k), assuming pred holds on (0, k*] for some k*
template <typename Pred>
double largest_satisfying(Pred pred) {
  double hi = 1.0;
  if (pred(hi)) return hi;
  double lo = 0.5;
  int halvings = 0;
  while (!pred(lo)) {
    hi = lo;
    lo *= 0.5;
    if (++halvings > 1000) return 0.0;
  }
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (pred(mid) ? lo : hi) = mid;
  }
  return lo;
}

// integral over [s0, s1] of |[s, s+kappa] ∩ [a, b]|, b may be +inf
double overlap_integral(double s0, double s1, double kappa, double a, double b) {
  auto o = [&](double s) { return std::max(0.0, std::min(s + kappa, b) - std::max(s, a)); };
  std::vector<double> pts{s0, s1};
  for (double p : {a - kappa, a, b - kappa, b})
    if (std::isfinite(p) && p > s0 && p < s1) pts.push_back(p);
  std::sort(pts.begin(), pts.end());
  double s = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += 0.5 * (pts[i + 1] - pts[i]) * (o(pts[i]) + o(pts[i + 1]));
  return s;
}

std::int64_t quantile_index(std::vector<std::int64_t>& v, double eps1) {
  std::sort(v.begin(), v.end());
  auto idx = static_cast<std::size_t>(std::ceil((1 - eps1) * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

}  // namespace

double delta0_fixed_point(const ModelSpec& model, const ProbVec& pistar) {
  Eigen::MatrixXd g = eval_kernel(model, pistar);
  double best = kInf;
  for (auto [x, y] : model.adjacency.plus) best = std::min(best, pistar(x) * g(x, y));
  return best;
}

ControlPath mix_with_fixed_point(const ControlPath& path, const ProbVec& pistar, const ModelSpec& model,
                                 double kappa) {
  if (!(kappa > 0 && kappa <= 1)) throw ValidationError("mix_with_fixed_point: kappa in (0,1]");
  check_fixed_point(model, pistar);
  PairMeasure fixed = pistar.asDiagonal() * eval_kernel(model, pistar);
  auto pairs = pairs_of(path);
  for (auto& q : pairs) q = (1 - kappa) * q + kappa * fixed;
  return path_from_pairs(path.T, pairs, path.flow);
}

ControlPath mollify(const ControlPath& path, double kappa, int refine) {
  if (!(kappa > 0 && kappa < path.T)) throw ValidationError("mollify: kappa in (0,T)");
  if (refine < 1) throw ValidationError("mollify: refine >= 1");
  const double h = path.h(), hf = h / refine;
  const int n_out = path.N * refine;
  auto src = pairs_of(path);
  std::vector<PairMeasure> out;
  out.reserve(n_out);
  for (int i = 0; i < n_out; ++i) {
    double s0 = i * hf, s1 = (i + 1) * hf;
    int j_lo = std::min(path.N - 1, static_cast<int>(std::floor(s0 / h)));
    int j_hi = std::min(path.N - 1, static_cast<int>(std::floor((s1 + kappa) / h)));
    PairMeasure q = PairMeasure::Zero(src[0].rows(), src[0].cols());
    double total = 0;
    for (int j = j_lo; j <= j_hi; ++j) {
      double b = j == path.N - 1 ? kInf : (j + 1) * h;
      double w = overlap_integral(s0, s1, kappa, j * h, b);
      q += w * src[j];
      total += w;
    }
    out.push_back(q / total);
  }
  return path_from_pairs(path.T, out, path.flow);
}

ControlPath piecewise_const(const ControlPath& path, double c) {
  if (!(c > 0)) throw ValidationError("piecewise_const: c > 0");
  const double h = path.h();
  const double up = c / h, down = h / c;
  ControlPath out;
  out.T = path.T;
  out.flow = path.flow;
  auto whole = [](double v) { return std::abs(v - std::round(v)) <= 1e-9 * std::max(1.0, v); };
  if (up >= 1 - 1e-9 && whole(up)) {
    const int k = static_cast<int>(std::round(up));
    out.N = path.N;
    for (int i = 0; i < path.N; ++i) {
      int src = (i / k) * k;
      out.kernels.push_back(path.kernels[src]);
      out.stationary.push_back(path.stationary[src]);
    }
  } else if (whole(down)) {
    // blocks of length h/k inside step j all sample step j, so the control is unchanged
    return path;
  } else {
    throw ValidationError("piecewise_const: c must be a multiple or a divisor of h");
  }
  return out;
}

ControlPath time_reverse(const ControlPath& path) {
  ControlPath out = path;
  out.flow = path.flow == Flow::forward ? Flow::reversed : Flow::forward;
  std::reverse(out.kernels.begin(), out.kernels.end());
  std::reverse(out.stationary.begin(), out.stationary.end());
  return out;
}

double time_lipschitz(const ControlPath& path) {
  double best = 0;
  for (int j = 0; j + 1 < path.N; ++j)
    best = std::max(best, l1((path.pair_control(j + 1) - path.pair_control(j)).eval()) / path.h());
  return best;
}

double choose_kappa1(double eps, int d, double delta0_fixed, double dist_to_fixed) {
  if (!(eps > 0) || !(delta0_fixed > 0)) throw ValidationError("choose_kappa1: eps > 0 and delta0 > 0");
  return largest_satisfying([&](double k) {
    double lhs = (2 * k * (1 - k) + k * k) * d * (std::abs(std::log(k / 2)) + std::abs(std::log(delta0_fixed)));
    return lhs <= eps / 2 && k * dist_to_fixed <= eps / 2;
  });
}

double choose_kappa2(double eps, double T, double lipschitz, const PipelineKappas& k) {
  const double dm1 = k.kappa1 * k.kappa1 * k.delta0_fixed;
  return largest_satisfying([&](double x) {
    bool a = 3 * x * std::exp(T) <= std::min({eps / 2, eps / (2 * k.c1), k.delta / 2});
    bool b = 2 * k.c1 * lipschitz * x + x * (std::exp(1 - T) + 1) * std::abs(std::log(dm1)) < eps / 2;
    return a && b;
  });
}

double choose_kappa3(double eps, double T, double h, double lipschitz, double lip_time, const PipelineKappas& k) {
  double cbar = largest_satisfying([&](double x) {
    bool a = lip_time * x * T * std::exp(T) <= std::min({eps / 2, eps / (4 * k.c1), k.delta / 4});
    bool b = 2 * x * (2 * lipschitz + lip_time) * (2 * std::abs(std::log(k.c1)) + k.c1) + 4 * x * k.c1 * lipschitz <=
             eps;
    return a && b;
  });
  cbar = std::min(cbar, h);
  return h / std::ceil(h / cbar - 1e-12);
}

ScheduleConstants schedule_constants(double c, int l0, double delta, double delta0A) {
  ScheduleConstants k;
  k.b1 = 4 + c;
  k.d1 = std::exp(c) * (12 + c);
  k.d2 = 6;
  k.d3 = k.d1 + l0 * k.b1 * std::exp(c);
  k.d4 = std::pow(2.0, l0) * (3 + k.d2);
  k.delta1 = delta * delta0A / 8;
  k.A1 = std::abs(std::log(k.delta1)) + (2 + k.d3) / k.delta1;
  k.B1 = 2 * k.d4 / k.delta1;
  k.C1 = std::abs(std::log(k.delta1)) * (l0 + 3.0) * (l0 + 3.0);
  return k;
}

BetaBlock make_beta(const PairMeasure& beta) {
  if ((beta.array() < 0).any() || std::abs(beta.sum() - 1) > 1e-10)
    throw ValidationError("beta must be a probability on pairs");
  BetaBlock b;
  b.beta = beta;
  b.marginal = first_marginal(beta);
  if (l1((b.marginal - second_marginal(beta)).eval()) > 1e-10)
    throw ValidationError("beta must have equal marginals");
  b.kernel = disintegrate(beta);
  if ((b.marginal.array() <= 0).any() || !strongly_connected((b.kernel.array() > 0).cast<int>().matrix()))
    throw ValidationError("beta kernel must be irreducible with a positive marginal");
  return b;
}

std::int64_t calibrate_k0(const Eigen::MatrixXd& Q, const ProbVec& q, const ScheduleConfig& cfg) {
  const int d = static_cast<int>(q.size());
  const std::int64_t H = cfg.calib_horizon;
  std::vector<std::int64_t> last(cfg.calib_reps, 0);
  for (int r = 0; r < cfg.calib_reps; ++r) {
    Philox4x64 rng(cfg.calib_seed, static_cast<std::uint64_t>(r), 1);
    std::vector<int> state(d);
    std::vector<std::vector<std::int64_t>> counts(d, std::vector<std::int64_t>(d, 0));
    for (int y = 0; y < d; ++y) {
      state[y] = y;
      counts[y][y] = 1;
    }
    Eigen::VectorXd u(d);
    for (std::int64_t m = 1; m <= H; ++m) {
      // m visited points Y_0..Y_{m-1}
      for (int y = 0; y < d; ++y) {
        double dev = 0;
        for (int z = 0; z < d; ++z) dev += std::abs(static_cast<double>(counts[y][z]) / m - q(z));
        if (dev >= cfg.eps0) last[r] = m;
      }
      for (int x = 0; x < d; ++x) u(x) = rng.uniform();
      for (int y = 0; y < d; ++y) {
        state[y] = sample_row(Q.row(state[y]).transpose().eval(), u(state[y]));
        ++counts[y][state[y]];
      }
    }
  }
  std::int64_t e = quantile_index(last, cfg.eps1);
  if (2 * e > H)
    throw ConvergenceError("calibrate_k0: deviation quantile beyond half the calibration horizon",
                           static_cast<double>(e));
  return std::max<std::int64_t>(e + 1, static_cast<std::int64_t>(std::floor(4 / cfg.eps0)) + 1);
}

std::int64_t calibrate_k_star(const std::vector<BetaBlock>& betas, const ScheduleConfig& cfg) {
  if (betas.empty()) throw ValidationError("calibrate_k_star: at least one beta block");
  const int d = static_cast<int>(betas[0].marginal.size());
  const std::int64_t H = cfg.calib_horizon;
  const int R = cfg.calib_reps;
  // identical blocks share their calibration
  std::vector<int> rep_of(betas.size());
  std::vector<int> distinct;
  for (std::size_t j = 0; j < betas.size(); ++j) {
    rep_of[j] = static_cast<int>(j);
    for (int i : distinct)
      if ((betas[i].beta - betas[j].beta).cwiseAbs().maxCoeff() == 0) rep_of[j] = i;
    if (rep_of[j] == static_cast<int>(j)) distinct.push_back(static_cast<int>(j));
  }
  auto run = [&](const BetaBlock& b, int x0, Philox4x64& rng, auto&& visit) {
    std::vector<std::int64_t> counts(d, 0);
    int x = x0 >= 0 ? x0 : sample_row(b.marginal, rng.uniform());
    ++counts[x];
    for (std::int64_t m = 0; m < H; ++m) {
      // m+1 visited points U_0..U_m
      double dev = 0;
      for (int z = 0; z < d; ++z) dev += std::abs(static_cast<double>(counts[z]) / (m + 1) - b.marginal(z));
      visit(m, dev);
      x = sample_row(b.kernel.row(x).transpose().eval(), rng.uniform());
      ++counts[x];
    }
  };
  std::vector<std::int64_t> last(R, 0);
  for (int r = 0; r < R; ++r)
    for (int j : distinct) {
      Philox4x64 rng(cfg.calib_seed, static_cast<std::uint64_t>(r), 2 + static_cast<std::uint64_t>(j));
      run(betas[j], -1, rng, [&](std::int64_t m, double dev) {
        if (dev >= cfg.eps0) last[r] = std::max(last[r], m);
      });
    }
  std::int64_t e = quantile_index(last, cfg.eps1);
  if (2 * e > H)
    throw ConvergenceError("calibrate_k_star: deviation quantile beyond half the calibration horizon",
                           static_cast<double>(e));
  std::vector<double> worst(H, 0.0);
  for (int j : distinct)
    for (int x0 = 0; x0 < d; ++x0) {
      std::vector<double> mean(H, 0.0);
      for (int r = 0; r < R; ++r) {
        Philox4x64 rng(cfg.calib_seed, static_cast<std::uint64_t>(r),
                       1000 + static_cast<std::uint64_t>(j) * d + static_cast<std::uint64_t>(x0));
        run(betas[j], x0, rng, [&](std::int64_t m, double dev) { mean[m] += dev / R; });
      }
      for (std::int64_t m = 0; m < H; ++m) worst[m] = std::max(worst[m], mean[m]);
    }
  for (std::int64_t k = e + 1; k < H; ++k)
    if (worst[k] <= cfg.eps0) return k;
  throw ConvergenceError("calibrate_k_star: mean deviation above eps0 up to the calibration horizon",
                         worst.back());
}

std::int64_t minimum_n(double T, double c, int l0, std::int64_t k0, int r1, double eps0, std::int64_t k_star) {
  const std::int64_t need = k0 + r1 + static_cast<std::int64_t>(std::floor(4 * (r1 + 1) / eps0)) + 1;
  auto ok = [&](std::int64_t n) {
    TimeGrid grid(n);
    if (grid.t_n() - T < 0) return false;
    std::int64_t m0 = grid.m_of(grid.t_n() - T);
    if (m0 <= need || 2.0 / (m0 + 2) > eps0 || m0 * c <= static_cast<double>(k_star)) return false;
    std::int64_t prev = m0;
    for (int j = 1; j <= l0; ++j) {
      std::int64_t mj = grid.m_of(std::min(grid.t_n(), grid.t_n() - T + j * c));
      if (mj <= prev) return false;
      prev = mj;
    }
    return true;
  };
  std::int64_t hi = 2;
  while (!ok(hi)) {
    if (hi > (std::int64_t{1} << 40)) throw ConvergenceError("minimum_n: no n below 2^40", static_cast<double>(hi));
    hi *= 2;
  }
  std::int64_t lo = hi / 2;
  while (hi - lo > 1) {
    std::int64_t mid = lo + (hi - lo) / 2;
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

ControlSchedule build_schedule(const ControlPath& forward, const ProbVec& m, const ModelSpec& model,
                               const ProbVec& pistar, const ScheduleConfig& cfg) {
  const int d = model.d;
  if (forward.flow != Flow::forward) throw ValidationError("build_schedule: path must be a forward path");
  if (m.size() != d || !on_simplex(m)) throw ValidationError("build_schedule: m on the simplex");
  if (!(cfg.eps0 > 0 && cfg.eps0 < 1 && cfg.eps1 > 0 && cfg.eps1 < 1))
    throw ValidationError("build_schedule: eps0, eps1 in (0,1)");
  if (cfg.block_steps < 1) throw ValidationError("build_schedule: block_steps >= 1");
  check_fixed_point(model, pistar);
  if (!model.delta0A) throw ValidationError("build_schedule: model needs a positive delta0A");

  ControlSchedule s;
  s.d = d;
  s.T = forward.T;
  s.eps0 = cfg.eps0;
  s.eps1 = cfg.eps1;
  s.block_start = cfg.block_start;
  s.target = m;
  Trajectory tr = propagate(m, forward);
  if (tr.min_entry <= 0 || !on_simplex(tr.M.back()))
    throw ValidationError("build_schedule: path trajectory must stay in the interior of the simplex");
  s.q = clean_simplex(tr.M.back());
  DvResult dv = dv_solve(s.q, model, &model.adjacency);
  if (!std::isfinite(dv.value)) throw InfeasibleError("build_schedule: no stationary pair control at M(T) on A_+");
  s.Q = disintegrate(dv.ipf.gamma);
  if (!strongly_connected((s.Q.array() > 0).cast<int>().matrix()))
    throw ValidationError("build_schedule: Q must be irreducible");

  ControlPath rev = time_reverse(forward);
  s.c = cfg.block_steps * forward.h();
  s.l0 = static_cast<int>(std::floor(s.T / s.c + 1e-9));
  s.delta = kInf;
  for (int j = 0; j <= s.l0; ++j) {
    int idx = std::min(forward.N - 1, j * cfg.block_steps);
    BetaBlock b = make_beta(rev.pair_control(idx));
    if (l1((b.marginal.transpose() * b.kernel).transpose() - b.marginal) > 1e-10)
      throw ValidationError("build_schedule: beta marginal must be stationary for its kernel");
    for (auto [x, y] : model.adjacency.plus) s.delta = std::min(s.delta, b.beta(x, y));
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y)
        if (b.beta(x, y) > 0 && !model.adjacency.has(x, y))
          throw ValidationError("build_schedule: beta must vanish off A_+");
    s.delta = std::min(s.delta, b.marginal.minCoeff());
    s.betas.push_back(std::move(b));
  }
  if (!(s.delta > 0))
    throw ValidationError("build_schedule: beta blocks must be positive on A_+ (mix with the fixed point first)");
  s.delta0A = *model.delta0A;
  s.constants = schedule_constants(s.c, s.l0, s.delta, s.delta0A);

  s.r1 = cfg.r1 > 0 ? cfg.r1 : 10 * d;
  s.a_star = cfg.a_star > 0 ? cfg.a_star : 1.0 / (2.0 * d * s.r1);
  s.k0 = cfg.k0 ? *cfg.k0 : calibrate_k0(s.Q, s.q, cfg);
  s.k1 = cfg.k1 ? *cfg.k1 : s.k0 + static_cast<std::int64_t>(std::floor(4 * (s.r1 + 1) / s.eps0)) + 1;
  s.k_star = cfg.k_star ? *cfg.k_star : calibrate_k_star(s.betas, cfg);
  s.minimum_n = minimum_n(s.T, s.c, s.l0, s.k0, s.r1, s.eps0, s.k_star);
  return s;
}

nlohmann::json schedule_to_json(const ControlSchedule& s) {
  nlohmann::json j;
  j["controlled"] = s.controlled;
  j["d"] = s.d;
  if (!s.controlled) return j;
  j["r1"] = s.r1;
  j["a_star"] = s.a_star;
  j["k0"] = s.k0;
  j["k1"] = s.k1;
  j["k_star"] = s.k_star;
  j["eps0"] = s.eps0;
  j["eps1"] = s.eps1;
  j["Q"] = matrix_to_json(s.Q);
  j["q"] = matrix_to_json(s.q);
  j["T"] = s.T;
  j["c"] = s.c;
  j["l0"] = s.l0;
  j["minimum_n"] = s.minimum_n;
  j["delta"] = s.delta;
  j["delta0A"] = s.delta0A;
  j["block_start"] = s.block_start == BlockStart::stationary ? "stationary" : "continue";
  j["target"] = matrix_to_json(s.target);
  const auto& k = s.constants;
  j["constants"] = {{"b1", k.b1}, {"d1", k.d1}, {"d2", k.d2}, {"d3", k.d3}, {"d4", k.d4},
                    {"delta1", k.delta1}, {"A1", k.A1}, {"B1", k.B1}, {"C1", k.C1}};
  j["betas"] = nlohmann::json::array();
  for (const auto& b : s.betas)
    j["betas"].push_back({{"beta", matrix_to_json(b.beta)},
                          {"marginal", matrix_to_json(b.marginal)},
                          {"kernel", matrix_to_json(b.kernel)}});
  return j;
}

std::string betas_csv(const ControlSchedule& s) {
  std::string out = "j,x,y,beta,kernel\n";
  char buf[128];
  for (std::size_t j = 0; j < s.betas.size(); ++j)
    for (int x = 0; x < s.d; ++x)
      for (int y = 0; y < s.d; ++y) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.17g,%.17g\n", j, x, y, s.betas[j].beta(x, y),
                      s.betas[j].kernel(x, y));
        out += buf;
      }
  return out;
}

}  // namespace sicm
