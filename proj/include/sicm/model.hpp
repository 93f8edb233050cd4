#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sicm/types.hpp"

namespace sicm {

struct AdjacencySpec {
  Eigen::MatrixXi a;
  std::vector<std::pair<int, int>> plus;
  bool irreducible = false;

  static AdjacencySpec from_matrix(const Eigen::MatrixXi& a);
  static AdjacencySpec full(int d);
  // support of a nonnegative matrix
  static AdjacencySpec support_of(const Eigen::MatrixXd& q, double tol = 0.0);
  int dim() const { return static_cast<int>(a.rows()); }
  bool has(int x, int y) const { return a(x, y) != 0; }
};

bool strongly_connected(const Eigen::MatrixXi& a);

// G(m)(x,y) = base(x,y) + sum_z m(z) tensor[z](x,y)
struct ModelSpec {
  int d = 0;
  Eigen::MatrixXd base;
  std::vector<Eigen::MatrixXd> tensor;
  AdjacencySpec adjacency;
  double lipschitz_bound = 0;
  std::optional<double> delta0A;
  std::string kind = "explicit";
  nlohmann::json params = nlohmann::json::object();

  // kernel at the vertex e_z
  Eigen::MatrixXd vertex_kernel(int z) const { return base + tensor[z]; }
};

// throws ValidationError naming the violated invariant
void validate_model(const ModelSpec& model);

ModelSpec make_model(Eigen::MatrixXd base, std::vector<Eigen::MatrixXd> tensor,
                     const AdjacencySpec& adjacency, std::string kind = "explicit",
                     nlohmann::json params = nlohmann::json::object());

Eigen::MatrixXd eval_kernel(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& m);
// no simplex checks; used inside the optimizer where m may leave the simplex slightly
Eigen::MatrixXd affine_kernel(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& m);
// row x of G(m), O(d^2)
void kernel_row(const ModelSpec& model, const Eigen::Ref<const Eigen::VectorXd>& m, int x,
                Eigen::Ref<Eigen::VectorXd> out);

ModelSpec build_example(const std::string& kind, const nlohmann::json& params);

struct FixedPointResult {
  ProbVec pi;
  double residual = 0;
  int iterations = 0;
  bool positive = false;
  std::vector<double> residuals;
};

FixedPointResult fixed_point(const ModelSpec& model, double alpha = 1.0, double tol = 1e-12,
                             int max_iter = 100000);

struct AssumptionReport {
  double lipschitz = 0;
  // vertex-minimum candidate and the maximal constant valid for an affine map
  double delta0A_vertex = 0;
  bool delta0A_vertex_holds = false;
  double delta0A_max = 0;
  bool delta0A_max_holds = false;
  bool delta0A_random_ok = false;
  bool product_attempted = false;
  bool product_positive = false;
  int product_min_k = 0;
  bool irreducible = false;
};

AssumptionReport check_assumptions(const ModelSpec& model, std::uint64_t seed = 1);

// smallest K <= kmax with sum_{j<=K} G(m_1)...G(m_j) > 0 over all vertex tuples; 0 if none
int product_positivity(const ModelSpec& model, int kmax);

double lipschitz_constant(const ModelSpec& model);
double delta0A_vertex_min(const ModelSpec& model);
double delta0A_maximal(const ModelSpec& model);

nlohmann::json to_json(const ModelSpec& model);
ModelSpec model_from_json(const nlohmann::json& j);

// matrix helpers shared by serialization code
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int rows, int cols, const char* name);
Eigen::MatrixXd nested_matrix(const nlohmann::json& j, const char* name);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* name);

}  // namespace sicm
