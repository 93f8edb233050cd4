#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sicm/model.hpp"
#include "sicm/rng.hpp"
#include "sicm/schedule.hpp"

namespace sicm {

struct ChainRun {
  std::vector<int> states;  // X_0..X_n
  std::vector<std::int64_t> path_steps;
  std::vector<ProbVec> empirical_path;  // L^{k+1} at the recorded k
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  ProbVec final_empirical;  // L^{n+1}
};

// thinning 0 means ceil(n/1000)
ChainRun run_chain(const ModelSpec& model, int x0, std::int64_t n, std::uint64_t seed,
                   std::int64_t thinning = 0, std::uint64_t replication = 0);

// average of delta_(X_k, X_{k+1}) over the n transitions
PairMeasure pair_empirical(const ChainRun& run);

enum class Phase : std::uint8_t { warmup, q_chain, block_start, block, fallback };
const char* phase_name(Phase p);

struct PhaseSegment {
  Phase phase;
  int block;  // -1 outside the blocks
  std::int64_t first, last;
};

struct ControlledRun : ChainRun {
  std::vector<PhaseSegment> phase_log;
  std::int64_t N1 = 0;        // 0 when the warm-up cap was hit
  std::vector<char> J;         // abort flags J_0..J_{l0+1}
  double realized_cost = 0;
  std::int64_t infinite_cost_step = -1;
};

ControlledRun run_controlled(const ModelSpec& model, const ControlSchedule& schedule, int x0,
                             std::int64_t n, std::uint64_t seed, std::int64_t thinning = 0,
                             std::uint64_t replication = 0);

struct HitEstimate {
  std::int64_t hits = 0, reps = 0;
  double p_hat = 0, ci_lo = 0, ci_hi = 0;
  std::optional<double> slope;
};

std::pair<double, double> wilson_interval(std::int64_t hits, std::int64_t reps,
                                          double z = 1.959963984540054);

// replication r runs on its own stream; threads 0 means hardware concurrency
HitEstimate mc_hit_probability(const ModelSpec& model, const ProbVec& target, double radius,
                               std::int64_t n, std::int64_t reps, std::uint64_t seed, int x0 = 0,
                               int threads = 0);

// final empirical measure only, no state storage
ProbVec final_empirical(const ModelSpec& model, int x0, std::int64_t n, std::uint64_t seed,
                        std::uint64_t replication);

}  // namespace sicm
