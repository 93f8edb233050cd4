#include <algorithm>

#include "sicm/simulate.hpp"
#include "sicm/timescale.hpp"

namespace sicm {

namespace {

class Recorder {
 public:
  Recorder(ControlledRun& run, int d, std::int64_t thinning) : run_(run), d_(d), thin_(thinning) {}

  void tag(std::int64_t k, Phase p, int block) {
    auto& log = run_.phase_log;
    if (!log.empty() && log.back().phase == p && log.back().block == block && log.back().last + 1 == k)
      log.back().last = k;
    else
      log.push_back({p, block, k, k});
  }

  void path(std::int64_t k, const std::vector<std::int64_t>& counts) {
    if (k % thin_ != 0 && k != run_.n) return;
    ProbVec e(d_);
    for (int z = 0; z < d_; ++z) e(z) = static_cast<double>(counts[z]) / static_cast<double>(k + 1);
    run_.path_steps.push_back(k);
    run_.empirical_path.push_back(e);
  }

 private:
  ControlledRun& run_;
  int d_;
  std::int64_t thin_;
};

enum class Mode { warmup, q_chain, blocks, fallback };

}  // namespace

ControlledRun run_controlled(const ModelSpec& model, const ControlSchedule& s, int x0,
                             std::int64_t n, std::uint64_t seed, std::int64_t thinning,
                             std::uint64_t replication) {
  if (x0 < 0 || x0 >= model.d) throw ValidationError("run_controlled: x0 must be a state index");
  if (n < 1) throw ValidationError("run_controlled: n >= 1");
  if (s.d != model.d) throw ValidationError("run_controlled: schedule dimension must equal d");
  if (s.controlled) {
    if (n < s.minimum_n) throw ValidationError("run_controlled: n >= schedule.minimum_n");
    if (static_cast<int>(s.betas.size()) != s.l0 + 1)
      throw ValidationError("run_controlled: schedule needs l0+1 beta blocks");
  }
  if (thinning <= 0) thinning = std::max<std::int64_t>(1, (n + 999) / 1000);

  const int d = model.d;
  ControlledRun run;
  run.seed = seed;
  run.n = n;
  run.states.resize(n + 1);
  run.states[0] = x0;
  run.J.assign(s.controlled ? s.l0 + 2 : 0, 0);
  Recorder rec(run, d, thinning);

  Philox4x64 main_rng(seed, replication, 0), y_rng(seed, replication, 1);
  std::vector<std::int64_t> counts(d, 0);
  counts[x0] = 1;
  ProbVec L(d);
  Eigen::VectorXd row(d), ys(d);

  // block boundaries m_j = m(t_n - T + jc), with the last block running to n
  std::vector<std::int64_t> m;
  if (s.controlled) {
    TimeGrid grid(n);
    for (int j = 0; j <= s.l0; ++j) {
      double t = std::min(grid.t_n(), grid.t_n() - s.T + j * s.c);
      m.push_back(grid.m_of(std::max(0.0, t)));
    }
    m.push_back(n + 1);
    for (std::size_t j = 1; j < m.size(); ++j)
      if (m[j] <= m[j - 1]) throw ValidationError("run_controlled: block starts must increase (n too small for c)");
  }
  const std::int64_t k2_offset = s.k1;
  std::int64_t k2 = 0;

  Mode mode = s.controlled ? Mode::warmup : Mode::fallback;
  int block = 0;
  std::int64_t block_end = 0, ui = 0;
  std::vector<std::int64_t> ucounts(d, 0);
  Philox4x64 u_rng(seed, replication, 2);

  auto charge = [&](std::int64_t k, const Eigen::VectorXd& mu, int prev) {
    kernel_row(model, L, prev, row);
    double r = relative_entropy(mu.transpose(), row.transpose());
    if (!std::isfinite(r) && run.infinite_cost_step < 0) run.infinite_cost_step = k;
    run.realized_cost += r;  // normalized by n at the end
  };
  auto uncontrolled = [&](int prev) {
    kernel_row(model, L, prev, row);
    return sample_row(row, main_rng.uniform());
  };
  auto start_block = [&](std::int64_t k, int prev) {
    const BetaBlock& b = s.betas[block];
    u_rng = Philox4x64(seed, replication, 2 + static_cast<std::uint64_t>(block));
    std::fill(ucounts.begin(), ucounts.end(), 0);
    ui = 0;
    block_end = std::min(m[block + 1], n + 1) - 1;
    Eigen::VectorXd mu = s.block_start == BlockStart::stationary ? Eigen::VectorXd(b.marginal)
                                                                 : Eigen::VectorXd(b.kernel.row(prev).transpose());
    charge(k, mu, prev);
    int x = sample_row(mu, u_rng.uniform());
    rec.tag(k, Phase::block_start, block);
    return x;
  };

  int x = x0;
  for (std::int64_t k = 1; k <= n; ++k) {
    for (int z = 0; z < d; ++z) L(z) = static_cast<double>(counts[z]) / static_cast<double>(k);
    const int prev = x;
    bool check_q = false, check_u = false;
    if (mode == Mode::warmup) {
      if (k > s.r1) {
        mode = Mode::fallback;
      } else {
        x = uncontrolled(prev);
        rec.tag(k, Phase::warmup, -1);
        if (run.N1 == 0 && L.minCoeff() > s.a_star) {
          run.N1 = k;
          k2 = run.N1 + k2_offset;
          mode = Mode::q_chain;
        }
        goto record;
      }
    }
    if (mode == Mode::q_chain) {
      if (k >= m[0]) {
        mode = Mode::blocks;
        block = 0;
      } else {
        // Y_i(x) for every x; the chain follows the coordinate at its current state
        for (int z = 0; z < d; ++z) ys(z) = y_rng.uniform();
        Eigen::VectorXd mu = s.Q.row(prev).transpose();
        charge(k, mu, prev);
        x = sample_row(mu, ys(prev));
        rec.tag(k, Phase::q_chain, -1);
        check_q = k >= k2;
        goto record;
      }
    }
    if (mode == Mode::blocks) {
      if (k == m[block]) {
        x = start_block(k, prev);
        check_u = true;
      } else if (k <= block_end) {
        const BetaBlock& b = s.betas[block];
        Eigen::VectorXd mu = b.kernel.row(prev).transpose();
        charge(k, mu, prev);
        x = sample_row(mu, u_rng.uniform());
        ++ui;
        rec.tag(k, Phase::block, block);
        check_u = true;
      } else {
        mode = Mode::fallback;
      }
      if (mode == Mode::blocks) goto record;
    }
    x = uncontrolled(prev);
    rec.tag(k, Phase::fallback, -1);

  record:
    run.states[k] = x;
    ++counts[x];
    rec.path(k, counts);
    if (check_q) {
      ProbVec e(d);
      for (int z = 0; z < d; ++z) e(z) = static_cast<double>(counts[z]) / static_cast<double>(k + 1);
      if (l1(e - s.q) > 2 * s.eps0) {
        run.J[0] = 1;
        mode = Mode::fallback;
      }
    }
    if (check_u) {
      const BetaBlock& b = s.betas[block];
      ++ucounts[x];
      bool abort = false;
      if (ui >= s.k_star) {
        double dev = 0;
        for (int z = 0; z < d; ++z)
          dev += std::abs(static_cast<double>(ucounts[z]) / static_cast<double>(ui + 1) - b.marginal(z));
        abort = dev > s.eps0;
      }
      if (abort) {
        run.J[block + 1] = 1;
        mode = Mode::fallback;
      } else if (k >= block_end) {
        ++block;
        if (block > s.l0) mode = Mode::fallback;
      }
    }
  }
  ProbVec e(d);
  for (int z = 0; z < d; ++z) e(z) = static_cast<double>(counts[z]) / static_cast<double>(n + 1);
  run.final_empirical = e;
  run.realized_cost /= static_cast<double>(n);
  return run;
}

}  // namespace sicm
