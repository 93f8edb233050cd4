#include "sicm/model.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "sicm/rng.hpp"

namespace sicm {

bool strongly_connected(const Eigen::MatrixXi& a) {
  const int d = static_cast<int>(a.rows());
  if (d == 0) return false;
  auto reach = [&](bool transpose) {
    std::vector<char> seen(d, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      int x = stack.back();
      stack.pop_back();
      for (int y = 0; y < d; ++y) {
        int e = transpose ? a(y, x) : a(x, y);
        if (e && !seen[y]) {
          seen[y] = 1;
          stack.push_back(y);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
  };
  return reach(false) && reach(true);
}

AdjacencySpec AdjacencySpec::from_matrix(const Eigen::MatrixXi& a) {
  if (a.rows() != a.cols()) throw ValidationError("adjacency: matrix must be square");
  AdjacencySpec s;
  s.a = a;
  for (int x = 0; x < a.rows(); ++x)
    for (int y = 0; y < a.cols(); ++y) {
      if (a(x, y) != 0 && a(x, y) != 1)
        throw ValidationError("adjacency: entries must be 0 or 1");
      if (a(x, y)) s.plus.emplace_back(x, y);
    }
  s.irreducible = strongly_connected(a);
  return s;
}

AdjacencySpec AdjacencySpec::full(int d) {
  return from_matrix(Eigen::MatrixXi::Ones(d, d));
}

AdjacencySpec AdjacencySpec::support_of(const Eigen::MatrixXd& q, double tol) {
  return from_matrix((q.array() > tol).cast<int>().matrix());
}

namespace {

std::string at(int x, int y) {
  std::ostringstream os;
  os << "(" << x << "," << y << ")";
  return os.str();
}

}  // namespace

void validate_model(const ModelSpec& model) {
  const int d = model.d;
  if (d < 2) throw ValidationError("model: d >= 2");
  if (model.base.rows() != d || model.base.cols() != d)
    throw ValidationError("model: base must be d x d");
  if (static_cast<int>(model.tensor.size()) != d)
    throw ValidationError("model: tensor must have d slices");
  for (const auto& t : model.tensor)
    if (t.rows() != d || t.cols() != d) throw ValidationError("model: tensor slices must be d x d");
  if (model.adjacency.dim() != d) throw ValidationError("model: adjacency must be d x d");
  for (int z = 0; z < d; ++z) {
    Eigen::MatrixXd v = model.vertex_kernel(z);
    if ((v.array() < -1e-12).any())
      throw ValidationError("model: vertex kernel B+T(z) must be nonnegative, z=" + std::to_string(z));
    for (int x = 0; x < d; ++x)
      if (std::abs(v.row(x).sum() - 1.0) > 1e-10)
        throw ValidationError("model: vertex kernel B+T(z) must be row-stochastic, z=" +
                              std::to_string(z) + " row " + std::to_string(x));
  }
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y) {
      if (model.adjacency.has(x, y)) continue;
      bool bad = model.base(x, y) != 0;
      for (int z = 0; z < d && !bad; ++z) bad = model.tensor[z](x, y) != 0;
      if (bad) throw ValidationError("model: G must vanish off the adjacency at " + at(x, y));
    }
  if (model.lipschitz_bound + 1e-12 < lipschitz_constant(model))
    throw ValidationError("model: lipschitz_bound below the tight constant");
}

double lipschitz_constant(const ModelSpec& model) {
  double best = 0;
  for (int z = 0; z < model.d; ++z)
    for (int w = z + 1; w < model.d; ++w)
      best = std::max(best, 0.5 * (model.tensor[z] - model.tensor[w]).cwiseAbs().sum());
  return best;
}

double delta0A_vertex_min(const ModelSpec& model) {
  double best = kInf;
  for (auto [x, y] : model.adjacency.plus)
    for (int z = 0; z < model.d; ++z)
      best = std::min(best, model.base(x, y) + model.tensor[z](x, y));
  return model.adjacency.plus.empty() ? 0.0 : best;
}

// G(m)(x,y) = sum_z m_z V_z(x,y) >= (sum_z V_z(x,y)) min_z m_z, with equality at the uniform m
double delta0A_maximal(const ModelSpec& model) {
  double best = kInf;
  for (auto [x, y] : model.adjacency.plus) {
    double s = 0;
    for (int z = 0; z < model.d; ++z) s += model.base(x, y) + model.tensor[z](x, y);
    best = std::min(best, s);
  }
  return model.adjacency.plus.empty() ? 0.0 : best;
}

ModelSpec make_model(Eigen::MatrixXd base, std::vector<Eigen::MatrixXd> tensor,
                     const AdjacencySpec& adjacency, std::string kind, nlohmann::json params) {
  ModelSpec m;
  m.d = static_cast<int>(base.rows());
  m.base = std::move(base);
  m.tensor = std::move(tensor);
  m.adjacency = adjacency;
  m.kind = std::move(kind);
  m.params = std::move(params);
  m.lipschitz_bound = kInf;
  validate_model(m);
  m.lipschitz_bound = lipschitz_constant(m);
  double dm = delta0A_maximal(m);
  if (dm > 0) m.delta0A = dm;
  return m;
}

Eigen::MatrixXd affine_kernel(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& m) {
  Eigen::MatrixXd k = model.base;
  for (int z = 0; z < model.d; ++z)
    if (m(z) != 0) k.noalias() += m(z) * model.tensor[z];
  return k;
}

Eigen::MatrixXd eval_kernel(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& m) {
  if (m.size() != model.d) throw ValidationError("eval_kernel: dimension of m must equal d");
  Eigen::MatrixXd k = affine_kernel(model, m);
  for (int x = 0; x < model.d; ++x)
    for (int y = 0; y < model.d; ++y)
      if (k(x, y) < 0 && k(x, y) >= -kSimplexTol) k(x, y) = 0;
  return k;
}

void kernel_row(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& m, int x,
                Eigen::Ref<Eigen::VectorXd> out) {
  out = model.base.row(x).transpose();
  for (int z = 0; z < model.d; ++z)
    if (m(z) != 0) out.noalias() += m(z) * model.tensor[z].row(x).transpose();
  for (int y = 0; y < model.d; ++y)
    if (out(y) < 0) out(y) = 0;
}

FixedPointResult fixed_point(const ModelSpec& model, double alpha, double tol, int max_iter) {
  if (!(alpha > 0 && alpha <= 1)) throw ValidationError("fixed_point: damping in (0,1]");
  if (!(tol > 0)) throw ValidationError("fixed_point: tol > 0");
  FixedPointResult r;
  ProbVec m = uniform(model.d);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd k = eval_kernel(model, m);
    ProbVec mg = (m.transpose() * k).transpose();
    double res = l1(mg - m);
    r.residuals.push_back(res);
    if (res <= tol) {
      r.pi = m;
      r.residual = res;
      r.iterations = it;
      r.positive = (m.array() > 0).all();
      return r;
    }
    m = clean_simplex(((1 - alpha) * m + alpha * mg).eval());
  }
  throw ConvergenceError("fixed_point: no convergence within max_iter, residual " +
                             std::to_string(r.residuals.back()),
                         r.residuals.back());
}

namespace {

using Bits = std::uint64_t;

// boolean d x d matrices as d row bitsets
struct BoolMat {
  std::vector<Bits> row;
};

BoolMat support(const Eigen::MatrixXd& k) {
  BoolMat b;
  b.row.assign(k.rows(), 0);
  for (int x = 0; x < k.rows(); ++x)
    for (int y = 0; y < k.cols(); ++y)
      if (k(x, y) > 0) b.row[x] |= Bits{1} << y;
  return b;
}

BoolMat mul(const BoolMat& a, const BoolMat& b) {
  BoolMat c;
  c.row.assign(a.row.size(), 0);
  for (std::size_t x = 0; x < a.row.size(); ++x)
    for (std::size_t z = 0; z < a.row.size(); ++z)
      if (a.row[x] >> z & 1) c.row[x] |= b.row[z];
  return c;
}

}  // namespace

int product_positivity(const ModelSpec& model, int kmax) {
  const int d = model.d;
  const Bits full = d == 64 ? ~Bits{0} : (Bits{1} << d) - 1;
  std::vector<BoolMat> v;
  for (int z = 0; z < d; ++z) v.push_back(support(model.vertex_kernel(z)));
  auto is_full = [&](const BoolMat& s) {
    return std::all_of(s.row.begin(), s.row.end(), [&](Bits r) { return r == full; });
  };
  for (int k = 1; k <= kmax; ++k) {
    // depth-first over tuples; a prefix whose running sum is already positive covers all extensions
    std::function<bool(const BoolMat&, const BoolMat&, int)> ok = [&](const BoolMat& prod,
                                                                     const BoolMat& sum, int depth) {
      if (is_full(sum)) return true;
      if (depth == k) return false;
      for (int z = 0; z < d; ++z) {
        BoolMat p = depth == 0 ? v[z] : mul(prod, v[z]);
        BoolMat s = sum;
        for (int x = 0; x < d; ++x) s.row[x] |= p.row[x];
        if (!ok(p, s, depth + 1)) return false;
      }
      return true;
    };
    BoolMat zero;
    zero.row.assign(d, 0);
    if (ok(zero, zero, 0)) return k;
  }
  return 0;
}

AssumptionReport check_assumptions(const ModelSpec& model, std::uint64_t seed) {
  AssumptionReport r;
  r.lipschitz = lipschitz_constant(model);
  r.delta0A_vertex = delta0A_vertex_min(model);
  r.delta0A_max = delta0A_maximal(model);
  r.irreducible = model.adjacency.irreducible;

  auto holds_at = [&](const ProbVec& m, double delta) {
    Eigen::MatrixXd k = eval_kernel(model, m);
    double mn = m.minCoeff();
    for (auto [x, y] : model.adjacency.plus)
      if (k(x, y) < delta * mn - 1e-12) return false;
    return true;
  };
  // affinity reduces the bound to the vertices and the uniform point; random points double-check it
  Philox4x64 rng(seed);
  bool vert = r.delta0A_vertex > 0, mx = r.delta0A_max > 0;
  for (int z = 0; z < model.d; ++z) {
    vert = vert && holds_at(vertex(model.d, z), r.delta0A_vertex);
    mx = mx && holds_at(vertex(model.d, z), r.delta0A_max);
  }
  vert = vert && holds_at(uniform(model.d), r.delta0A_vertex);
  mx = mx && holds_at(uniform(model.d), r.delta0A_max);
  bool random_ok = true;
  for (int i = 0; i < 1000; ++i) {
    ProbVec m(model.d);
    for (int z = 0; z < model.d; ++z) m(z) = -std::log(1.0 - rng.uniform());
    m /= m.sum();
    bool a = holds_at(m, r.delta0A_vertex), b = holds_at(m, r.delta0A_max);
    vert = vert && a;
    mx = mx && b;
    random_ok = random_ok && (r.delta0A_max <= 0 || b);
  }
  r.delta0A_vertex_holds = vert;
  r.delta0A_max_holds = mx;
  r.delta0A_random_ok = random_ok;

  if (model.d <= 8) {
    r.product_attempted = true;
    r.product_min_k = product_positivity(model, model.d);
    r.product_positive = r.product_min_k > 0;
  }
  return r;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json a = nlohmann::json::array();
  for (int x = 0; x < m.rows(); ++x)
    for (int y = 0; y < m.cols(); ++y) a.push_back(m(x, y));
  return a;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int rows, int cols, const char* name) {
  if (!j.is_array()) throw ValidationError(std::string(name) + ": expected an array");
  // accept row-major flat arrays and nested arrays
  if (!j.empty() && j[0].is_array()) {
    Eigen::MatrixXd m = nested_matrix(j, name);
    if (m.rows() != rows || m.cols() != cols)
      throw ValidationError(std::string(name) + ": wrong shape");
    return m;
  }
  if (static_cast<int>(j.size()) != rows * cols)
    throw ValidationError(std::string(name) + ": expected " + std::to_string(rows * cols) +
                          " entries");
  Eigen::MatrixXd m(rows, cols);
  for (int x = 0; x < rows; ++x)
    for (int y = 0; y < cols; ++y) {
      const auto& v = j[x * cols + y];
      if (!v.is_number()) throw ValidationError(std::string(name) + ": entries must be numbers");
      m(x, y) = v.get<double>();
    }
  return m;
}

Eigen::MatrixXd nested_matrix(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ValidationError(std::string(name) + ": expected a nested array");
  const int rows = static_cast<int>(j.size()), cols = static_cast<int>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (int x = 0; x < rows; ++x) {
    if (!j[x].is_array() || static_cast<int>(j[x].size()) != cols)
      throw ValidationError(std::string(name) + ": ragged rows");
    for (int y = 0; y < cols; ++y) {
      if (!j[x][y].is_number()) throw ValidationError(std::string(name) + ": entries must be numbers");
      m(x, y) = j[x][y].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* name) {
  if (!j.is_array() || j.empty()) throw ValidationError(std::string(name) + ": expected a nonempty array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(std::string(name) + ": entries must be numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

nlohmann::json to_json(const ModelSpec& model) {
  nlohmann::json j;
  j["d"] = model.d;
  j["kind"] = model.kind;
  j["params"] = model.params;
  j["base"] = matrix_to_json(model.base);
  nlohmann::json t = nlohmann::json::array();
  for (const auto& s : model.tensor)
    for (int x = 0; x < model.d; ++x)
      for (int y = 0; y < model.d; ++y) t.push_back(s(x, y));
  j["tensor"] = t;
  j["adjacency"] = matrix_to_json(model.adjacency.a.cast<double>());
  j["lipschitz_bound"] = model.lipschitz_bound;
  if (model.delta0A) j["delta0A"] = *model.delta0A;
  return j;
}

ModelSpec model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("model: expected an object");
  static const std::vector<std::string> known{"d",        "kind",    "params",
                                              "base",     "tensor",  "adjacency",
                                              "lipschitz_bound", "delta0A"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw ValidationError("model: unknown key '" + it.key() + "'");
  std::string kind = j.value("kind", std::string("explicit"));
  if (!j.contains("base")) {
    if (kind == "explicit") throw ValidationError("model: explicit model needs base/tensor/adjacency");
    return build_example(kind, j.value("params", nlohmann::json::object()));
  }
  if (!j.contains("d") || !j["d"].is_number_integer()) throw ValidationError("model: d must be an integer");
  const int d = j["d"].get<int>();
  if (d < 2) throw ValidationError("model: d >= 2");
  Eigen::MatrixXd base = matrix_from_json(j["base"], d, d, "base");
  if (!j.contains("tensor")) throw ValidationError("model: tensor missing");
  Eigen::MatrixXd flat = matrix_from_json(j["tensor"], d * d, d, "tensor");
  std::vector<Eigen::MatrixXd> tensor(d, Eigen::MatrixXd(d, d));
  for (int z = 0; z < d; ++z)
    for (int x = 0; x < d; ++x)
      for (int y = 0; y < d; ++y) tensor[z](x, y) = flat(z * d + x, y);
  Eigen::MatrixXi a;
  if (j.contains("adjacency")) {
    Eigen::MatrixXd ad = matrix_from_json(j["adjacency"], d, d, "adjacency");
    a = ad.cast<int>();
  } else {
    Eigen::MatrixXd s = base.cwiseAbs();
    for (const auto& t : tensor) s += t.cwiseAbs();
    a = (s.array() > 0).cast<int>().matrix();
  }
  ModelSpec m = make_model(base, tensor, AdjacencySpec::from_matrix(a), kind,
                           j.value("params", nlohmann::json::object()));
  if (j.contains("lipschitz_bound")) {
    double lb = j["lipschitz_bound"].get<double>();
    if (lb + 1e-12 < m.lipschitz_bound) throw ValidationError("model: lipschitz_bound below the tight constant");
    m.lipschitz_bound = lb;
  }
  if (j.contains("delta0A")) m.delta0A = j["delta0A"].get<double>();
  return m;
}

}  // namespace sicm
