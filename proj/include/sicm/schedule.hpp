#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sicm/types.hpp"

namespace sicm {

struct BetaBlock {
  PairMeasure beta;
  ProbVec marginal;        // beta_(1)
  Eigen::MatrixXd kernel;  // beta_{2|1}
};

struct ScheduleConstants {
  double b1 = 0, d1 = 0, d2 = 6, d3 = 0, d4 = 0;
  double delta1 = 0, A1 = 0, B1 = 0, C1 = 0;
};

// what the controlled chain does at the first step of each block
enum class BlockStart { stationary, continue_kernel };

struct ControlSchedule {
  bool controlled = true;
  int d = 0;
  int r1 = 0;
  double a_star = 0;
  std::int64_t k0 = 0, k1 = 0, k_star = 0;
  double eps0 = 0.05, eps1 = 0.05;
  Eigen::MatrixXd Q;
  ProbVec q;
  double T = 0, c = 0;
  int l0 = 0;
  std::vector<BetaBlock> betas;  // betas[j], j = 0..l0
  std::int64_t minimum_n = 1;
  double delta = 0;    // floor of the beta blocks
  double delta0A = 0;  // model constant used in the schedule constants
  ScheduleConstants constants;
  BlockStart block_start = BlockStart::stationary;
  ProbVec target;  // end point of the tracked path

  // every step uses the model dynamics
  static ControlSchedule never(int d) {
    ControlSchedule s;
    s.controlled = false;
    s.d = d;
    return s;
  }
};

ScheduleConstants schedule_constants(double c, int l0, double delta, double delta0A);
BetaBlock make_beta(const PairMeasure& beta);

}  // namespace sicm
