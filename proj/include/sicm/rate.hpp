#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sicm/model.hpp"

namespace sicm {

struct Feasibility {
  bool feasible = false;
  PairMeasure witness;  // empty when infeasible
  double flow = 0;
};

// gamma >= 0 on A_+ with both marginals m, by max flow on the bipartite network
Feasibility pstar_feasible(const ProbVec& m, const AdjacencySpec& a);

struct IpfResult {
  PairMeasure gamma;
  Eigen::VectorXd row_scale, col_scale;  // gamma = diag(row) ref diag(col)
  double gap = 0;
  int iterations = 0;
};

// KL projection of reference onto pair measures with both marginals marg
IpfResult ipf_solve(const PairMeasure& reference, const ProbVec& marg, double tol = 1e-13,
                    int max_iter = 200000);
PairMeasure ipf_project(const PairMeasure& reference, const ProbVec& marg, double tol = 1e-13,
                        int max_iter = 200000);

struct DvResult {
  double value = kInf;
  IpfResult ipf;
  Eigen::MatrixXd kernel;  // G(m)
};

// inf R(gamma || m ⊗ G(m)) over gamma with both marginals m; +inf when infeasible
double dv_rate(const ProbVec& m, const ModelSpec& model, const AdjacencySpec* support = nullptr);
DvResult dv_solve(const ProbVec& m, const ModelSpec& model, const AdjacencySpec* support = nullptr);
// gradient of dv_rate in m (defined up to a constant shift); needs m > 0 and a finite value
Eigen::VectorXd dv_gradient(const DvResult& dv, const ProbVec& m, const ModelSpec& model);

// left Perron vector by lazy power iteration
ProbVec stationary_of_kernel(const Eigen::MatrixXd& k, double tol = 1e-13, int max_iter = 10000000);
// same vector by one linear solve with (I - K + 1 u^T)
ProbVec stationary_direct(const Eigen::MatrixXd& k);

enum class Flow { forward, reversed };

struct ControlPath {
  double T = 0;
  int N = 0;
  Flow flow = Flow::forward;
  std::vector<Eigen::MatrixXd> kernels;
  std::vector<ProbVec> stationary;

  double h() const { return N > 0 ? T / N : 0.0; }
  PairMeasure pair_control(int j) const;
};

// kernels must be irreducible; stationary laws are solved for
ControlPath path_from_kernels(double T, const std::vector<Eigen::MatrixXd>& kernels,
                              Flow flow = Flow::forward);
// controls with equal marginals; marginal and disintegration are cached
ControlPath path_from_pairs(double T, const std::vector<PairMeasure>& pairs, Flow flow = Flow::forward);

struct Trajectory {
  std::vector<ProbVec> M;
  double penalty = 0;
  double min_entry = 0;
};

// forward: M_{j+1} = e^h M_j - (e^h - 1) mu_j; reversed: M_{j+1} = e^{-h} M_j + (1 - e^{-h}) mu_j
Trajectory propagate(const ProbVec& m, const ControlPath& path);

// sum_j (e^{-jh} - e^{-(j+1)h}) R(eta_j || mu_j ⊗ G(M_j))
double discretized_cost(const ControlPath& path, const Trajectory& traj, const ModelSpec& model);
// per-step R(eta_j || mu_j ⊗ G(M_j)), undiscounted
std::vector<double> step_costs(const ControlPath& path, const Trajectory& traj, const ModelSpec& model);

struct RateOptions {
  double floor = 1e-6;
  double penalty = 1e4;
  int max_iter = 2000;
  double grad_tol = 1e-9;
  double ipf_tol = 1e-13;
  // warm start, one kernel per step
  std::vector<Eigen::MatrixXd> initial_kernels;
};

struct RateCertificate {
  double value = kInf;
  double head_cost = kInf, tail_bound = kInf, terminal_dv = kInf;
  double T = 0;
  int N = 0;
  ControlPath path;
  Trajectory trajectory;
  int iterations = 0;
  double grad_norm = 0;
  bool stalled = false;
  bool feasible = false;
  std::string source;  // "optimized" or "constant"
};

// objective over the logits on A_+ for all steps
class RateObjective {
 public:
  RateObjective(const ModelSpec& model, const AdjacencySpec& a, const ProbVec& m, double T, int N,
                const RateOptions& opts);

  int size() const { return N_ * static_cast<int>(a_.plus.size()); }
  // J(theta); fills grad when given and the value is finite
  double operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad = nullptr) const;
  ControlPath path(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd logits_from_kernels(const std::vector<Eigen::MatrixXd>& kernels) const;
  Eigen::MatrixXd kernel(const Eigen::VectorXd& theta, int j) const;

 private:
  const ModelSpec& model_;
  AdjacencySpec a_;
  ProbVec m_;
  double T_;
  int N_;
  RateOptions opts_;
  std::vector<int> row_count_;
  std::vector<std::vector<int>> row_edges_;  // indices into a_.plus by row
};

RateCertificate rate_upper(const ProbVec& m, const ModelSpec& model, const AdjacencySpec& a, double T,
                           int N, const RateOptions& opts = {});

// re-evaluate discretized_cost + e^{-T} DV_A(M_N) on a certificate
double certificate_value(const RateCertificate& cert, const ModelSpec& model, const AdjacencySpec& a);

double terminal_tail_report(double T, double floor);

}  // namespace sicm
