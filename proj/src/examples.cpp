#include <algorithm>
#include <set>

#include "sicm/model.hpp"

namespace sicm {

namespace {

using nlohmann::json;

void require_keys(const json& p, const std::vector<std::string>& allowed, const std::string& kind) {
  if (!p.is_object()) throw ValidationError(kind + ": params must be an object");
  for (auto it = p.begin(); it != p.end(); ++it)
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ValidationError(kind + ": unknown param '" + it.key() + "'");
}

const json& need(const json& p, const char* key, const std::string& kind) {
  if (!p.contains(key)) throw ValidationError(kind + ": missing param '" + key + "'");
  return p[key];
}

void check_stochastic(const Eigen::MatrixXd& k, const std::string& what) {
  if ((k.array() < 0).any()) throw ValidationError(what + " must be nonnegative");
  for (int x = 0; x < k.rows(); ++x)
    if (std::abs(k.row(x).sum() - 1.0) > 1e-10)
      throw ValidationError(what + " must be row-stochastic (row " + std::to_string(x) + ")");
}

Eigen::MatrixXi support(const Eigen::MatrixXd& k) { return (k.array() > 0).cast<int>().matrix(); }

std::vector<Eigen::MatrixXd> kernel_list(const json& j, int d, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != d)
    throw ValidationError(what + ": expected a list of " + std::to_string(d) + " kernels");
  std::vector<Eigen::MatrixXd> out;
  for (int z = 0; z < d; ++z) {
    Eigen::MatrixXd m = nested_matrix(j[z], what.c_str());
    if (m.rows() != d || m.cols() != d) throw ValidationError(what + ": kernels must be d x d");
    check_stochastic(m, what + "[" + std::to_string(z) + "]");
    out.push_back(m);
  }
  return out;
}

// P over {0} ∪ Δ° with 0 absorbing; G(m)(x,y) = P(x,y) + P(x,0) m_y
ModelSpec build_qsd(const json& p) {
  require_keys(p, {"P"}, "qsd");
  Eigen::MatrixXd P = nested_matrix(need(p, "P", "qsd"), "P");
  if (P.rows() != P.cols() || P.rows() < 3) throw ValidationError("qsd: P must be square with d+1 >= 3 states");
  check_stochastic(P.bottomRows(P.rows() - 1), "qsd: P restricted to transient rows");
  const int d = static_cast<int>(P.rows()) - 1;
  Eigen::MatrixXd Po = P.bottomRightCorner(d, d);
  Eigen::VectorXd out = P.col(0).tail(d);
  if (!(out.array() > 0).any()) throw ValidationError("qsd: some P(x,0) > 0 (absorption reachable)");
  if (!strongly_connected(support(Po))) throw ValidationError("qsd: P° must be irreducible");
  std::vector<Eigen::MatrixXd> T(d, Eigen::MatrixXd::Zero(d, d));
  for (int z = 0; z < d; ++z) T[z].col(z) = out;
  Eigen::MatrixXi a(d, d);
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y) a(x, y) = (Po(x, y) + out(x) > 0) ? 1 : 0;
  return make_model(Po, T, AdjacencySpec::from_matrix(a), "qsd", p);
}

// G(m) = sum_z m_z M^z
ModelSpec build_polya(const json& p) {
  require_keys(p, {"M"}, "polya");
  const json& mj = need(p, "M", "polya");
  if (!mj.is_array() || mj.empty()) throw ValidationError("polya: M must be a list of kernels");
  const int d = static_cast<int>(mj.size());
  auto M = kernel_list(mj, d, "polya: M");
  Eigen::MatrixXi a = support(M[0]);
  for (int z = 1; z < d; ++z)
    if (support(M[z]) != a) throw ValidationError("polya: all M^z must share the support A_+");
  if (!strongly_connected(a)) throw ValidationError("polya: A must be irreducible");
  return make_model(Eigen::MatrixXd::Zero(d, d), M, AdjacencySpec::from_matrix(a), "polya", p);
}

// G(m)(x,y) = (mM)(y), A all ones
ModelSpec build_row_independent(const json& p) {
  require_keys(p, {"M"}, "row-independent");
  Eigen::MatrixXd M = nested_matrix(need(p, "M", "row-independent"), "M");
  if (M.rows() != M.cols() || M.rows() < 2) throw ValidationError("row-independent: M must be square, d >= 2");
  check_stochastic(M, "row-independent: M");
  if (!strongly_connected(support(M))) throw ValidationError("row-independent: M must be irreducible");
  const int d = static_cast<int>(M.rows());
  std::vector<Eigen::MatrixXd> T(d);
  for (int z = 0; z < d; ++z) T[z] = Eigen::VectorXd::Ones(d) * M.row(z);
  return make_model(Eigen::MatrixXd::Zero(d, d), T, AdjacencySpec::full(d), "row-independent", p);
}

// G(m)(x,y) = P(x,y) + P(x,0) (m M^x)(y) with P(x,y) = (1-α_x)Q(x,y) + θ α_x q_y, P(x,0) = α_x(1-θ)
ModelSpec build_pagerank(const json& p) {
  require_keys(p, {"links", "Q", "alpha", "theta", "q", "M"}, "pagerank");
  Eigen::MatrixXd Q;
  if (p.contains("links")) {
    Eigen::MatrixXd v = nested_matrix(p["links"], "links");
    if ((v.array() < 0).any()) throw ValidationError("pagerank: link counts must be nonnegative");
    Q = v;
    for (int x = 0; x < Q.rows(); ++x) {
      double s = Q.row(x).sum();
      if (s <= 0) throw ValidationError("pagerank: every page needs an outgoing link");
      Q.row(x) /= s;
    }
  } else {
    Q = nested_matrix(need(p, "Q", "pagerank"), "Q");
    check_stochastic(Q, "pagerank: Q");
  }
  if (Q.rows() != Q.cols() || Q.rows() < 2) throw ValidationError("pagerank: Q must be square, d >= 2");
  const int d = static_cast<int>(Q.rows());
  Eigen::VectorXd alpha(d);
  const json& aj = need(p, "alpha", "pagerank");
  if (aj.is_number()) alpha.setConstant(aj.get<double>());
  else alpha = vector_from_json(aj, "alpha");
  if (alpha.size() != d || (alpha.array() <= 0).any() || (alpha.array() >= 1).any())
    throw ValidationError("pagerank: damping factors alpha_x in (0,1)");
  double theta = need(p, "theta", "pagerank").get<double>();
  if (!(theta > 0 && theta <= 1)) throw ValidationError("pagerank: theta in (0,1]");
  Eigen::VectorXd q = p.contains("q") ? vector_from_json(p["q"], "q") : Eigen::VectorXd(uniform(d));
  if (q.size() != d || (q.array() <= 0).any() || std::abs(q.sum() - 1) > 1e-10)
    throw ValidationError("pagerank: q must be a strictly positive probability vector");
  auto M = kernel_list(need(p, "M", "pagerank"), d, "pagerank: M");
  for (int x = 0; x < d; ++x)
    if (!strongly_connected(support(M[x]))) throw ValidationError("pagerank: every M^x must be irreducible");
  Eigen::MatrixXd P(d, d);
  Eigen::VectorXd out(d);
  for (int x = 0; x < d; ++x) {
    P.row(x) = (1 - alpha(x)) * Q.row(x) + theta * alpha(x) * q.transpose();
    out(x) = alpha(x) * (1 - theta);
  }
  std::vector<Eigen::MatrixXd> T(d, Eigen::MatrixXd::Zero(d, d));
  for (int z = 0; z < d; ++z)
    for (int x = 0; x < d; ++x) T[z].row(x) = out(x) * M[x].row(z);
  Eigen::MatrixXi a(d, d);
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y) a(x, y) = (P(x, y) + out(x) > 0) ? 1 : 0;
  if (!strongly_connected(support(P)) && !strongly_connected(a))
    throw ValidationError("pagerank: A must be irreducible");
  return make_model(P, T, AdjacencySpec::from_matrix(a), "pagerank", p);
}

// states are directed edges z = (z1,z2); see edge_states for the ordering
ModelSpec build_edge_reinforced(const json& p) {
  require_keys(p, {"vertices", "edges", "delta"}, "edge-reinforced");
  const int ell = need(p, "vertices", "edge-reinforced").get<int>();
  double delta = need(p, "delta", "edge-reinforced").get<double>();
  if (!(delta > 0 && delta < 1)) throw ValidationError("edge-reinforced: delta in (0,1)");
  if (ell < 2) throw ValidationError("edge-reinforced: at least two vertices");
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(ell, ell);
  for (const auto& e : need(p, "edges", "edge-reinforced")) {
    if (!e.is_array() || e.size() != 2) throw ValidationError("edge-reinforced: edges are pairs");
    int u = e[0].get<int>(), v = e[1].get<int>();
    if (u < 0 || v < 0 || u >= ell || v >= ell) throw ValidationError("edge-reinforced: vertex out of range");
    if (u == v) throw ValidationError("edge-reinforced: the graph has no self-loops");
    adj(u, v) = adj(v, u) = 1;
  }
  if (!strongly_connected(adj)) throw ValidationError("edge-reinforced: graph must be connected");
  std::vector<std::pair<int, int>> st;
  for (int u = 0; u < ell; ++u)
    for (int v = 0; v < ell; ++v)
      if (adj(u, v)) st.emplace_back(u, v);
  const int d = static_cast<int>(st.size());
  Eigen::VectorXi deg = adj.rowwise().sum();
  auto idx = [&](int u, int v) {
    return static_cast<int>(std::find(st.begin(), st.end(), std::make_pair(u, v)) - st.begin());
  };
  Eigen::MatrixXi A = Eigen::MatrixXi::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) A(i, j) = st[i].second == st[j].first ? 1 : 0;
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(d, d);
  std::vector<Eigen::MatrixXd> T(d, Eigen::MatrixXd::Zero(d, d));
  for (int i = 0; i < d; ++i) {
    const double dz = deg(st[i].second);
    for (int j = 0; j < d; ++j) {
      if (!A(i, j)) continue;
      B(i, j) = 1.0 / dz;
      for (int w = 0; w < d; ++w) {
        int wr = idx(st[w].second, st[w].first);
        double reinforce = 0.5 * delta * ((w == j) + (wr == j));
        double mass = 0.5 * delta / dz * (A(i, w) + A(i, wr));
        T[w](i, j) = reinforce - mass;
      }
    }
  }
  ModelSpec m = make_model(B, T, AdjacencySpec::from_matrix(A), "edge-reinforced", p);
  return m;
}

}  // namespace

ModelSpec build_example(const std::string& kind, const nlohmann::json& params) {
  if (kind == "qsd") return build_qsd(params);
  if (kind == "polya") return build_polya(params);
  if (kind == "row-independent") return build_row_independent(params);
  if (kind == "pagerank") return build_pagerank(params);
  if (kind == "edge-reinforced") return build_edge_reinforced(params);
  throw ValidationError("build_example: kind must be one of qsd, polya, row-independent, pagerank, "
                        "edge-reinforced");
}

}  // namespace sicm
