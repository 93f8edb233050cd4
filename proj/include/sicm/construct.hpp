#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "sicm/model.hpp"
#include "sicm/rate.hpp"
#include "sicm/schedule.hpp"

namespace sicm {

// min over A_+ of pi*(x) G(pi*)(x,y)
double delta0_fixed_point(const ModelSpec& model, const ProbVec& pistar);

// eta^kappa = (1-kappa) eta + kappa pi*∘G(pi*) at every step
ControlPath mix_with_fixed_point(const ControlPath& path, const ProbVec& pistar, const ModelSpec& model,
                                 double kappa);

// cell averages of s -> kappa^{-1} int_s^{s+kappa} eta(u) du on a grid refine times finer;
// eta is held at its last value past T
ControlPath mollify(const ControlPath& path, double kappa, int refine = 1);

// hold the control at block starts jc; c must be a multiple or a divisor of h,
// and a divisor returns the path itself
ControlPath piecewise_const(const ControlPath& path, double c);

// reversed block order and flipped flow
ControlPath time_reverse(const ControlPath& path);

// max_j ||eta_{j+1} - eta_j||_1 / h
double time_lipschitz(const ControlPath& path);

struct PipelineKappas {
  double kappa1 = 0, kappa2 = 0, kappa3 = 0;
  double delta0_fixed = 0;  // min over A_+ of pi*∘G(pi*)
  double delta = 0;         // kappa1 delta0_fixed
  double c1 = 0;            // 2 / (delta^2 delta0A)
  double lip_time = 0;      // time-Lipschitz constant of the mollified path
};

// largest kappa1 with (2k(1-k)+k^2) d (|log(k/2)| + |log delta0_fixed|) <= eps/2 and k ||m - pi*||_1 <= eps/2
double choose_kappa1(double eps, int d, double delta0_fixed, double dist_to_fixed);
// largest kappa2 with 3 k e^T <= min(eps/2, eps/(2 c1), delta/2) and
// 2 c1 L_G k + k (e^{1-T} + 1) |log(kappa1^2 delta0_fixed)| < eps/2
double choose_kappa2(double eps, double T, double lipschitz, const PipelineKappas& k);
// largest c with C k T e^T <= min(eps/2, eps/(4 c1), delta/4) and
// 2 k (2 L_G + C)(2 |log c1| + c1) + 4 k c1 L_G <= eps, rounded down to h/j for an integer j
double choose_kappa3(double eps, double T, double h, double lipschitz, double lip_time, const PipelineKappas& k);

struct ScheduleConfig {
  double eps0 = 0.05, eps1 = 0.05;
  int r1 = 0;           // 0 means 10 d
  double a_star = 0;    // 0 means 1/(2 d r1)
  int block_steps = 1;  // path steps per block, c = block_steps h
  std::optional<std::int64_t> k0, k1, k_star;
  int calib_reps = 200;
  std::int64_t calib_horizon = 20000;
  std::uint64_t calib_seed = 12345;
  BlockStart block_start = BlockStart::stationary;
};

// forward path from m; the schedule tracks the time reversal from M(T) back to m
ControlSchedule build_schedule(const ControlPath& forward, const ProbVec& m, const ModelSpec& model,
                               const ProbVec& pistar, const ScheduleConfig& cfg);

// (1-eps1) quantile of the last time the coupled Q chains deviate from q by eps0 or more
std::int64_t calibrate_k0(const Eigen::MatrixXd& Q, const ProbVec& q, const ScheduleConfig& cfg);
// same for the block chains, plus the mean deviation condition from every start state
std::int64_t calibrate_k_star(const std::vector<BetaBlock>& betas, const ScheduleConfig& cfg);

// smallest n with the block-start constraints on m(t_n - T)
std::int64_t minimum_n(double T, double c, int l0, std::int64_t k0, int r1, double eps0, std::int64_t k_star);

nlohmann::json schedule_to_json(const ControlSchedule& s);
// one row per (j, x, y): j,x,y,beta,kernel
std::string betas_csv(const ControlSchedule& s);

}  // namespace sicm
