#include <algorithm>

#include "sicm/rate.hpp"

namespace sicm {

RateObjective::RateObjective(const ModelSpec& model, const AdjacencySpec& a, const ProbVec& m, double T, int N,
                             const RateOptions& opts)
    : model_(model), a_(a), m_(m), T_(T), N_(N), opts_(opts) {
  const int d = model.d;
  if (a.dim() != d) throw ValidationError("rate_upper: A must be d x d");
  if (!a.irreducible) throw ValidationError("rate_upper: A irreducible");
  if (!(T > 0)) throw ValidationError("rate_upper: T > 0");
  if (N < 1) throw ValidationError("rate_upper: N >= 1");
  row_count_.assign(d, 0);
  row_edges_.assign(d, {});
  for (int e = 0; e < static_cast<int>(a.plus.size()); ++e) {
    ++row_count_[a.plus[e].first];
    row_edges_[a.plus[e].first].push_back(e);
  }
  for (int x = 0; x < d; ++x)
    if (!(opts.floor >= 0 && opts.floor * row_count_[x] < 1))
      throw ValidationError("rate_upper: floor * (row size of A) < 1");
}

Eigen::MatrixXd RateObjective::kernel(const Eigen::VectorXd& theta, int j) const {
  const int d = model_.d;
  const int E = static_cast<int>(a_.plus.size());
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(d, d);
  for (int x = 0; x < d; ++x) {
    const auto& edges = row_edges_[x];
    double top = -kInf;
    for (int e : edges) top = std::max(top, theta(j * E + e));
    double z = 0;
    for (int e : edges) z += std::exp(theta(j * E + e) - top);
    const double scale = 1 - opts_.floor * row_count_[x];
    for (int e : edges) k(x, a_.plus[e].second) = opts_.floor + scale * std::exp(theta(j * E + e) - top) / z;
  }
  return k;
}

Eigen::VectorXd RateObjective::logits_from_kernels(const std::vector<Eigen::MatrixXd>& kernels) const {
  if (static_cast<int>(kernels.size()) != N_) throw ValidationError("rate_upper: one initial kernel per step");
  const int E = static_cast<int>(a_.plus.size());
  Eigen::VectorXd theta(size());
  for (int j = 0; j < N_; ++j)
    for (int e = 0; e < E; ++e) {
      auto [x, y] = a_.plus[e];
      double p = (kernels[j](x, y) - opts_.floor) / (1 - opts_.floor * row_count_[x]);
      theta(j * E + e) = std::log(std::max(p, 1e-300));
    }
  return theta;
}

ControlPath RateObjective::path(const Eigen::VectorXd& theta) const {
  ControlPath p;
  p.T = T_;
  p.N = N_;
  p.flow = Flow::forward;
  for (int j = 0; j < N_; ++j) {
    p.kernels.push_back(kernel(theta, j));
    p.stationary.push_back(stationary_direct(p.kernels.back()));
  }
  return p;
}

double RateObjective::operator()(const Eigen::VectorXd& theta, Eigen::VectorXd* grad) const {
  const int d = model_.d;
  const int E = static_cast<int>(a_.plus.size());
  ControlPath p = path(theta);
  Trajectory tr = propagate(m_, p);
  const ProbVec& last = tr.M.back();
  if (last.minCoeff() <= 0) return kInf;
  for (int j = 0; j < N_; ++j) {
    Eigen::MatrixXd g = affine_kernel(model_, tr.M[j]);
    for (auto [x, y] : a_.plus)
      if (g(x, y) <= 0) return kInf;
  }
  std::vector<double> costs = step_costs(p, tr, model_);
  const double h = p.h(), eh = std::exp(h);
  std::vector<double> w(N_);
  double head = 0;
  for (int j = 0; j < N_; ++j) {
    w[j] = std::exp(-j * h) - std::exp(-(j + 1) * h);
    head += w[j] * costs[j];
  }
  DvResult dv = dv_solve(last, model_, &a_);
  if (!std::isfinite(dv.value)) return kInf;
  const double value = head + std::exp(-T_) * dv.value + opts_.penalty * tr.penalty;
  if (!grad) return value;

  // adjoint sweep; lambda holds dJ/dM_{j+1}
  grad->setZero(size());
  Eigen::VectorXd lambda = std::exp(-T_) * dv_gradient(dv, last, model_) +
                           2 * opts_.penalty * last.cwiseMin(0.0);
  Eigen::VectorXd kappa(d), gmu(d), v(d);
  Eigen::MatrixXd gk(d, d);
  for (int j = N_ - 1; j >= 0; --j) {
    const Eigen::MatrixXd& k = p.kernels[j];
    const ProbVec& mu = p.stationary[j];
    Eigen::MatrixXd g = affine_kernel(model_, tr.M[j]);
    Eigen::VectorXd next = eh * lambda + 2 * opts_.penalty * tr.M[j].cwiseMin(0.0);
    kappa.setZero();
    gk.setZero();
    for (auto [x, y] : a_.plus) {
      double r = std::log(k(x, y) / g(x, y));
      kappa(x) += k(x, y) * r;
      gk(x, y) = w[j] * mu(x) * (r + 1);
      double gg = -w[j] * mu(x) * k(x, y) / g(x, y);
      for (int z = 0; z < d; ++z) next(z) += gg * model_.tensor[z](x, y);
    }
    gmu = w[j] * kappa - (eh - 1) * lambda;
    // d mu = mu dK (I - K + 1 mu^T)^{-1}
    Eigen::MatrixXd sys = Eigen::MatrixXd::Identity(d, d) - k + Eigen::VectorXd::Ones(d) * mu.transpose();
    v = sys.partialPivLu().solve(gmu);
    for (auto [x, y] : a_.plus) gk(x, y) += mu(x) * v(y);
    for (int x = 0; x < d; ++x) {
      const double scale = 1 - opts_.floor * row_count_[x];
      double mean = 0;
      for (int e : row_edges_[x]) {
        int y = a_.plus[e].second;
        mean += (k(x, y) - opts_.floor) / scale * gk(x, y);
      }
      for (int e : row_edges_[x]) {
        int y = a_.plus[e].second;
        (*grad)(j * E + e) = (k(x, y) - opts_.floor) * (gk(x, y) - mean);
      }
    }
    lambda = next;
  }
  return value;
}

namespace {

RateCertificate certify(const ControlPath& path, const ProbVec& m, const ModelSpec& model,
                        const AdjacencySpec& a) {
  RateCertificate c;
  c.T = path.T;
  c.N = path.N;
  c.path = path;
  c.trajectory = propagate(m, path);
  c.head_cost = discretized_cost(path, c.trajectory, model);
  const ProbVec& last = c.trajectory.M.back();
  c.feasible = c.trajectory.min_entry >= -1e-8 && on_simplex(last);
  if (!c.feasible) return c;
  c.terminal_dv = dv_rate(clean_simplex(last), model, &a);
  c.tail_bound = std::exp(-path.T) * c.terminal_dv;
  c.value = c.head_cost + c.tail_bound;
  return c;
}

}  // namespace

RateCertificate rate_upper(const ProbVec& m, const ModelSpec& model, const AdjacencySpec& a, double T, int N,
                           const RateOptions& opts) {
  if (m.size() != model.d) throw ValidationError("rate_upper: dimension of m must equal d");
  if (!on_simplex(m)) throw ValidationError("rate_upper: m on the simplex");
  RateObjective obj(model, a, m, T, N, opts);
  RateCertificate none;
  none.T = T;
  none.N = N;
  if (!pstar_feasible(m, a).feasible) return none;
  DvResult dv0 = dv_solve(m, model, &a);
  if (!std::isfinite(dv0.value)) return none;

  // constant control at the DV minimizer keeps M at m
  RateCertificate best = certify(path_from_pairs(T, std::vector<PairMeasure>(N, dv0.ipf.gamma)), m, model, a);
  best.source = "constant";

  std::vector<Eigen::MatrixXd> init = opts.initial_kernels;
  if (init.empty()) {
    Eigen::MatrixXd k0 = disintegrate(dv0.ipf.gamma);
    for (int x = 0; x < model.d; ++x)
      if (m(x) <= 0)
        for (int y = 0; y < model.d; ++y) k0(x, y) = a.has(x, y) ? 1.0 : 0.0;
    k0 = disintegrate(k0);
    init.assign(N, k0);
  }
  Eigen::VectorXd theta = obj.logits_from_kernels(init);
  Eigen::VectorXd grad;
  double f = obj(theta, &grad);
  if (!std::isfinite(f)) return best;

  double step = 1.0;
  int it = 0, flat = 0;
  bool stalled = false;
  Eigen::VectorXd trial_grad;
  for (; it < opts.max_iter; ++it) {
    const double gn2 = grad.squaredNorm();
    if (std::sqrt(gn2) <= opts.grad_tol) break;
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings) {
      Eigen::VectorXd trial = theta - step * grad;
      double ft = obj(trial, &trial_grad);
      if (std::isfinite(ft) && ft <= f - 1e-4 * step * gn2) {
        flat = f - ft <= 1e-15 * std::max(1.0, std::abs(f)) ? flat + 1 : 0;
        theta = std::move(trial);
        grad = trial_grad;
        f = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    if (flat >= 20) break;
    step = std::min(step * 2, 1e8);
  }
  RateCertificate opt = certify(obj.path(theta), m, model, a);
  opt.source = "optimized";
  opt.iterations = it;
  opt.grad_norm = grad.norm();
  opt.stalled = stalled;
  if (opt.feasible && opt.value < best.value) return opt;
  best.iterations = it;
  best.grad_norm = grad.norm();
  best.stalled = stalled;
  return best;
}

double certificate_value(const RateCertificate& cert, const ModelSpec& model, const AdjacencySpec& a) {
  Trajectory tr = propagate(cert.trajectory.M.front(), cert.path);
  double head = discretized_cost(cert.path, tr, model);
  return head + std::exp(-cert.T) * dv_rate(clean_simplex(tr.M.back()), model, &a);
}

double terminal_tail_report(double T, double floor) {
  if (!(T > 0)) throw ValidationError("terminal_tail_report: T > 0");
  if (!(floor > 0 && floor < 1)) throw ValidationError("terminal_tail_report: floor in (0,1)");
  return std::exp(1 - T) * std::abs(std::log(floor));
}

}  // namespace sicm
