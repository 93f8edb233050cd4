#include "sicm/rate.hpp"

namespace sicm {

PairMeasure ControlPath::pair_control(int j) const { return stationary[j].asDiagonal() * kernels[j]; }

ControlPath path_from_kernels(double T, const std::vector<Eigen::MatrixXd>& kernels, Flow flow) {
  if (!(T > 0)) throw ValidationError("control path: T > 0");
  if (kernels.empty()) throw ValidationError("control path: N >= 1");
  ControlPath p;
  p.T = T;
  p.N = static_cast<int>(kernels.size());
  p.flow = flow;
  p.kernels = kernels;
  for (const auto& k : kernels) p.stationary.push_back(stationary_of_kernel(k));
  return p;
}

ControlPath path_from_pairs(double T, const std::vector<PairMeasure>& pairs, Flow flow) {
  if (!(T > 0)) throw ValidationError("control path: T > 0");
  if (pairs.empty()) throw ValidationError("control path: N >= 1");
  ControlPath p;
  p.T = T;
  p.N = static_cast<int>(pairs.size());
  p.flow = flow;
  for (const auto& q : pairs) {
    if ((q.array() < 0).any() || std::abs(q.sum() - 1) > 1e-10)
      throw ValidationError("control path: controls must be probability measures on pairs");
    ProbVec mu = first_marginal(q);
    if (l1((mu - second_marginal(q)).eval()) > 1e-10)
      throw ValidationError("control path: controls must have equal marginals");
    p.stationary.push_back(mu);
    p.kernels.push_back(disintegrate(q));
  }
  return p;
}

Trajectory propagate(const ProbVec& m, const ControlPath& path) {
  Trajectory tr;
  tr.M.reserve(path.N + 1);
  tr.M.push_back(m);
  const double h = path.h();
  const double eh = path.flow == Flow::forward ? std::exp(h) : std::exp(-h);
  for (int j = 0; j < path.N; ++j) {
    // both flows are exact over a step with constant control
    tr.M.push_back(eh * tr.M[j] + (1 - eh) * path.stationary[j]);
  }
  tr.min_entry = kInf;
  for (const auto& v : tr.M) {
    tr.min_entry = std::min(tr.min_entry, v.minCoeff());
    tr.penalty += v.cwiseMin(0.0).squaredNorm();
  }
  return tr;
}

namespace {

// discount weight of step j over [jh, (j+1)h] against e^{-s}, or e^{-T} e^{s} when reversed
double step_weight(const ControlPath& path, int j) {
  const double h = path.h();
  int i = path.flow == Flow::forward ? j : path.N - 1 - j;
  return std::exp(-i * h) - std::exp(-(i + 1) * h);
}

}  // namespace

std::vector<double> step_costs(const ControlPath& path, const Trajectory& traj, const ModelSpec& model) {
  std::vector<double> c(path.N);
  for (int j = 0; j < path.N; ++j)
    c[j] = row_entropy(path.stationary[j], path.kernels[j], affine_kernel(model, traj.M[j]));
  return c;
}

double discretized_cost(const ControlPath& path, const Trajectory& traj, const ModelSpec& model) {
  auto c = step_costs(path, traj, model);
  double s = 0;
  for (int j = 0; j < path.N; ++j) {
    if (!std::isfinite(c[j])) return kInf;
    s += step_weight(path, j) * c[j];
  }
  return s;
}

}  // namespace sicm
