#include "sicm/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace sicm {

namespace {

std::int64_t default_thinning(std::int64_t n, std::int64_t thinning) {
  if (thinning > 0) return thinning;
  return std::max<std::int64_t>(1, (n + 999) / 1000);
}

void check_start(const ModelSpec& model, int x0, std::int64_t n) {
  if (x0 < 0 || x0 >= model.d) throw ValidationError("run_chain: x0 must be a state index");
  if (n < 1) throw ValidationError("run_chain: n >= 1");
}

}  // namespace

ChainRun run_chain(const ModelSpec& model, int x0, std::int64_t n, std::uint64_t seed,
                   std::int64_t thinning, std::uint64_t replication) {
  check_start(model, x0, n);
  thinning = default_thinning(n, thinning);
  const int d = model.d;
  ChainRun run;
  run.seed = seed;
  run.n = n;
  run.states.resize(n + 1);
  run.states[0] = x0;
  Philox4x64 rng(seed, replication, 0);
  std::vector<std::int64_t> counts(d, 0);
  counts[x0] = 1;
  ProbVec L(d);
  Eigen::VectorXd row(d);
  int x = x0;
  for (std::int64_t k = 1; k <= n; ++k) {
    // L^k is the average of X_0..X_{k-1}
    for (int z = 0; z < d; ++z) L(z) = static_cast<double>(counts[z]) / static_cast<double>(k);
    kernel_row(model, L, x, row);
    x = sample_row(row, rng.uniform());
    run.states[k] = x;
    ++counts[x];
    if (k % thinning == 0 || k == n) {
      run.path_steps.push_back(k);
      ProbVec e(d);
      for (int z = 0; z < d; ++z) e(z) = static_cast<double>(counts[z]) / static_cast<double>(k + 1);
      run.empirical_path.push_back(e);
    }
  }
  run.final_empirical = run.empirical_path.back();
  return run;
}

ProbVec final_empirical(const ModelSpec& model, int x0, std::int64_t n, std::uint64_t seed,
                        std::uint64_t replication) {
  check_start(model, x0, n);
  const int d = model.d;
  Philox4x64 rng(seed, replication, 0);
  std::vector<std::int64_t> counts(d, 0);
  counts[x0] = 1;
  ProbVec L(d);
  Eigen::VectorXd row(d);
  int x = x0;
  for (std::int64_t k = 1; k <= n; ++k) {
    for (int z = 0; z < d; ++z) L(z) = static_cast<double>(counts[z]) / static_cast<double>(k);
    kernel_row(model, L, x, row);
    x = sample_row(row, rng.uniform());
    ++counts[x];
  }
  for (int z = 0; z < d; ++z) L(z) = static_cast<double>(counts[z]) / static_cast<double>(n + 1);
  return L;
}

PairMeasure pair_empirical(const ChainRun& run) {
  if (run.states.size() < 2) throw ValidationError("pair_empirical: run needs at least 2 states");
  const int d = static_cast<int>(run.final_empirical.size());
  PairMeasure t = PairMeasure::Zero(d, d);
  for (std::size_t k = 0; k + 1 < run.states.size(); ++k) t(run.states[k], run.states[k + 1]) += 1;
  return t / static_cast<double>(run.states.size() - 1);
}

std::pair<double, double> wilson_interval(std::int64_t hits, std::int64_t reps, double z) {
  const double n = static_cast<double>(reps);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  if (hits == 0) return {0.0, std::min(1.0, centre + half)};
  if (hits == reps) return {std::max(0.0, centre - half), 1.0};
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

HitEstimate mc_hit_probability(const ModelSpec& model, const ProbVec& target, double radius,
                               std::int64_t n, std::int64_t reps, std::uint64_t seed, int x0,
                               int threads) {
  if (reps < 1) throw ValidationError("mc_hit_probability: reps >= 1");
  if (target.size() != model.d || !on_simplex(target))
    throw ValidationError("mc_hit_probability: target must be on the simplex");
  if (!(radius >= 0)) throw ValidationError("mc_hit_probability: radius >= 0");
  check_start(model, x0, n);
  if (threads <= 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<int>(std::min<std::int64_t>(threads, reps));
  std::vector<std::int64_t> hits(threads, 0);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::int64_t r = t; r < reps; r += threads) {
        ProbVec L = final_empirical(model, x0, n, seed, static_cast<std::uint64_t>(r));
        if (l1(L - target) <= radius + 1e-12) ++hits[t];
      }
    });
  for (auto& th : pool) th.join();
  HitEstimate h;
  h.reps = reps;
  for (auto v : hits) h.hits += v;
  h.p_hat = static_cast<double>(h.hits) / static_cast<double>(reps);
  std::tie(h.ci_lo, h.ci_hi) = wilson_interval(h.hits, reps);
  if (h.hits > 0) h.slope = -std::log(h.p_hat) / static_cast<double>(n);
  return h;
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::warmup: return "warmup";
    case Phase::q_chain: return "q_chain";
    case Phase::block_start: return "block_start";
    case Phase::block: return "block";
    case Phase::fallback: return "fallback";
  }
  return "?";
}

}  // namespace sicm
