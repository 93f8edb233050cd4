#include <algorithm>
#include <deque>

#include "sicm/rate.hpp"

namespace sicm {

Feasibility pstar_feasible(const ProbVec& m, const AdjacencySpec& a) {
  const int d = a.dim();
  if (m.size() != d) throw ValidationError("pstar_feasible: dimension of m must equal d");
  if (!on_simplex(m)) throw ValidationError("pstar_feasible: m on the simplex");
  // source 0, rows 1..d, columns d+1..2d, sink 2d+1
  const int V = 2 * d + 2, src = 0, snk = 2 * d + 1;
  Eigen::MatrixXd cap = Eigen::MatrixXd::Zero(V, V);
  for (int x = 0; x < d; ++x) {
    cap(src, 1 + x) = std::max(0.0, m(x));
    cap(1 + d + x, snk) = std::max(0.0, m(x));
  }
  for (auto [x, y] : a.plus) cap(1 + x, 1 + d + y) = 1.0;
  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(V, V);
  constexpr double eps = 1e-15;
  double total = 0;
  // Edmonds-Karp
  for (;;) {
    std::vector<int> parent(V, -1);
    parent[src] = src;
    std::deque<int> queue{src};
    while (!queue.empty() && parent[snk] < 0) {
      int u = queue.front();
      queue.pop_front();
      for (int v = 0; v < V; ++v)
        if (parent[v] < 0 && cap(u, v) - flow(u, v) > eps) {
          parent[v] = u;
          queue.push_back(v);
        }
    }
    if (parent[snk] < 0) break;
    double push = kInf;
    for (int v = snk; v != src; v = parent[v]) push = std::min(push, cap(parent[v], v) - flow(parent[v], v));
    for (int v = snk; v != src; v = parent[v]) {
      flow(parent[v], v) += push;
      flow(v, parent[v]) -= push;
    }
    total += push;
  }
  Feasibility f;
  f.flow = total;
  f.feasible = std::abs(total - 1.0) <= 1e-10;
  if (f.feasible) {
    f.witness = PairMeasure::Zero(d, d);
    for (auto [x, y] : a.plus) f.witness(x, y) = std::max(0.0, flow(1 + x, 1 + d + y));
    f.witness /= f.witness.sum();
  }
  return f;
}

IpfResult ipf_solve(const PairMeasure& reference, const ProbVec& marg, double tol, int max_iter) {
  const int d = static_cast<int>(marg.size());
  if (reference.rows() != d || reference.cols() != d)
    throw ValidationError("ipf_project: reference must be d x d");
  if ((reference.array() < 0).any()) throw ValidationError("ipf_project: reference must be nonnegative");
  if (!on_simplex(marg)) throw ValidationError("ipf_project: marg on the simplex");
  if (!pstar_feasible(marg, AdjacencySpec::support_of(reference)).feasible)
    throw InfeasibleError("ipf_project: no pair measure on supp(reference) has both marginals marg");
  IpfResult r;
  r.gamma = reference;
  r.row_scale = Eigen::VectorXd::Ones(d);
  r.col_scale = Eigen::VectorXd::Ones(d);
  auto gap = [&] {
    return l1((first_marginal(r.gamma) - marg).eval()) + l1((second_marginal(r.gamma) - marg).eval());
  };
  r.gap = gap();
  for (int it = 0; it < max_iter && r.gap > tol; ++it) {
    for (int x = 0; x < d; ++x) {
      double s = r.gamma.row(x).sum();
      double f = s > 0 ? marg(x) / s : 0.0;
      r.gamma.row(x) *= f;
      r.row_scale(x) *= f;
    }
    for (int y = 0; y < d; ++y) {
      double s = r.gamma.col(y).sum();
      double f = s > 0 ? marg(y) / s : 0.0;
      r.gamma.col(y) *= f;
      r.col_scale(y) *= f;
    }
    r.iterations = it + 1;
    r.gap = gap();
  }
  if (r.gap > tol)
    throw ConvergenceError("ipf_project: marginal gap " + std::to_string(r.gap) + " above tol after max_iter",
                           r.gap);
  return r;
}

PairMeasure ipf_project(const PairMeasure& reference, const ProbVec& marg, double tol, int max_iter) {
  return ipf_solve(reference, marg, tol, max_iter).gamma;
}

DvResult dv_solve(const ProbVec& m, const ModelSpec& model, const AdjacencySpec* support) {
  if (m.size() != model.d) throw ValidationError("dv_rate: dimension of m must equal d");
  if (!on_simplex(m)) throw ValidationError("dv_rate: m on the simplex");
  DvResult r;
  r.kernel = eval_kernel(model, m);
  PairMeasure ref = m.asDiagonal() * r.kernel;
  if (support)
    for (int x = 0; x < model.d; ++x)
      for (int y = 0; y < model.d; ++y)
        if (!support->has(x, y)) ref(x, y) = 0;
  ref = ref.cwiseMax(0.0);
  if (!pstar_feasible(m, AdjacencySpec::support_of(ref)).feasible) return r;
  r.ipf = ipf_solve(ref, m);
  r.value = relative_entropy(r.ipf.gamma, ref);
  return r;
}

double dv_rate(const ProbVec& m, const ModelSpec& model, const AdjacencySpec* support) {
  return dv_solve(m, model, support).value;
}

Eigen::VectorXd dv_gradient(const DvResult& dv, const ProbVec& m, const ModelSpec& model) {
  const int d = model.d;
  if (!std::isfinite(dv.value)) throw ValidationError("dv_gradient: finite value");
  if ((m.array() <= 0).any()) throw ValidationError("dv_gradient: m > 0");
  Eigen::VectorXd g(d);
  const auto& a = dv.ipf.row_scale;
  const auto& b = dv.ipf.col_scale;
  for (int z = 0; z < d; ++z) {
    double s = std::log(a(z)) + std::log(b(z));
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) {
        double gam = dv.ipf.gamma(x, y);
        if (gam > 0) s -= gam * model.tensor[z](x, y) / dv.kernel(x, y);
      }
    g(z) = s;
  }
  return g;
}

ProbVec stationary_of_kernel(const Eigen::MatrixXd& k, double tol, int max_iter) {
  const int d = static_cast<int>(k.rows());
  if (k.cols() != d || d == 0) throw ValidationError("stationary_of_kernel: K must be square");
  if ((k.array() < 0).any()) throw ValidationError("stationary_of_kernel: K must be nonnegative");
  for (int x = 0; x < d; ++x)
    if (std::abs(k.row(x).sum() - 1) > 1e-10) throw ValidationError("stationary_of_kernel: K row-stochastic");
  if (!strongly_connected((k.array() > 0).cast<int>().matrix()))
    throw ValidationError("stationary_of_kernel: K must be irreducible");
  // the lazy chain (I+K)/2 has the same invariant law and is aperiodic
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(d, 1.0 / d);
  double res = kInf;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::RowVectorXd next = mu * k;
    res = (next - mu).lpNorm<1>();
    if (res <= tol) return clean_simplex(mu.transpose().eval());
    mu = 0.5 * (mu + next);
    mu /= mu.sum();
  }
  throw ConvergenceError("stationary_of_kernel: residual above tol after max_iter", res);
}

ProbVec stationary_direct(const Eigen::MatrixXd& k) {
  const int d = static_cast<int>(k.rows());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d) - k + Eigen::MatrixXd::Ones(d, d);
  ProbVec mu = a.transpose().partialPivLu().solve(Eigen::VectorXd::Ones(d));
  return mu;
}

}  // namespace sicm
