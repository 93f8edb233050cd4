#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "common.hpp"
#include "sicm/model.hpp"

using namespace sicm;
using sicm::testing::example_models;
using sicm::testing::qsd3;

namespace {

// normalized left Perron vector by plain power iteration
ProbVec perron_left(const Eigen::MatrixXd& p) {
  Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(p.rows(), 1.0 / p.rows());
  for (int i = 0; i < 100000; ++i) {
    Eigen::RowVectorXd w = v * p;
    w /= w.sum();
    if ((w - v).lpNorm<1>() < 1e-15) return w.transpose();
    v = w;
  }
  return v.transpose();
}

}  // namespace

TEST_CASE("eval_kernel examples") {
  auto q = qsd3();
  ProbVec m(2);
  m << 0.5, 0.5;
  Eigen::MatrixXd want(2, 2);
  want << 0.4, 0.6, 0.8, 0.2;
  CHECK((eval_kernel(q, m) - want).cwiseAbs().maxCoeff() < 1e-15);
  for (int z = 0; z < 2; ++z) CHECK((eval_kernel(q, vertex(2, z)) - q.vertex_kernel(z)).norm() < 1e-15);

  Eigen::MatrixXd b(2, 2);
  b << 0.3, 0.7, 0.6, 0.4;
  auto flat = make_model(b, {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)}, AdjacencySpec::full(2));
  CHECK((eval_kernel(flat, uniform(2)) - b).norm() == 0);
  CHECK_THROWS_AS(eval_kernel(flat, uniform(3)), ValidationError);
}

TEST_CASE("builders compile to the affine form") {
  auto q = qsd3();
  Eigen::MatrixXd po(2, 2);
  po << 0.3, 0.5, 0.6, 0.0;
  CHECK((q.base - po).norm() == 0);
  for (int z = 0; z < 2; ++z)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) CHECK(q.tensor[z](x, y) == (y == z ? (x == 0 ? 0.2 : 0.4) : 0.0));

  auto ri = build_example("row-independent", {{"M", {{0, 1}, {1, 0}}}});
  CHECK(ri.base.norm() == 0);
  for (int z = 0; z < 2; ++z)
    for (int x = 0; x < 2; ++x)
      for (int y = 0; y < 2; ++y) CHECK(ri.tensor[z](x, y) == (z == y ? 0.0 : 1.0));

  auto er = build_example("edge-reinforced", {{"vertices", 3}, {"edges", {{0, 1}, {1, 2}, {0, 2}}}, {"delta", 0.5}});
  CHECK(er.d == 6);
  // directed edges in lexicographic order: 01 02 10 12 20 21
  const int ends[6][2] = {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(er.adjacency.has(i, j) == (ends[i][1] == ends[j][0]));
}

TEST_CASE("builders reject violated assumptions") {
  CHECK_THROWS_AS(build_example("qsd", {{"P", {{1, 0, 0}, {0, 1, 0}, {0.5, 0, 0.5}}}}), ValidationError);
  CHECK_THROWS_AS(build_example("edge-reinforced", {{"vertices", 2}, {"edges", {{0, 0}, {0, 1}}}, {"delta", 0.5}}),
                  ValidationError);
  CHECK_THROWS_AS(build_example("edge-reinforced", {{"vertices", 3}, {"edges", {{0, 1}}}, {"delta", 0.5}}),
                  ValidationError);
  CHECK_THROWS_AS(build_example("row-independent", {{"M", {{0.5, 0.6}, {0.5, 0.5}}}}), ValidationError);
  CHECK_THROWS_AS(build_example("polya", {{"M", {{{0.5, 0.5}, {0.5, 0.5}}, {{1, 0}, {0.5, 0.5}}}}}), ValidationError);
  CHECK_THROWS_AS(build_example("qsd", {{"P", {{1, 0, 0}, {0.2, 0.3, 0.5}, {0.4, 0.6, 0}}}, {"extra", 1}}),
                  ValidationError);
  CHECK_THROWS_AS(build_example("nope", nlohmann::json::object()), ValidationError);
}

TEST_CASE("kernels are stochastic, affine and Lipschitz on random points") {
  std::mt19937_64 gen(9);
  for (const auto& [name, model] : example_models()) {
    INFO(name);
    const int d = model.d;
    const double L = lipschitz_constant(model);
    double worst_row = 0, worst_aff = 0, worst_lip = -kInf;
    for (int i = 0; i < 1000; ++i) {
      ProbVec a = sicm::testing::random_interior(d, gen, 0.0), b = sicm::testing::random_interior(d, gen, 0.0);
      Eigen::MatrixXd ka = eval_kernel(model, a), kb = eval_kernel(model, b);
      for (int x = 0; x < d; ++x) worst_row = std::max(worst_row, std::abs(ka.row(x).sum() - 1));
      for (int x = 0; x < d; ++x)
        for (int y = 0; y < d; ++y)
          if (!model.adjacency.has(x, y)) CHECK(ka(x, y) == 0);
      double k = std::uniform_real_distribution<double>(0, 1)(gen);
      Eigen::MatrixXd mix = eval_kernel(model, (k * a + (1 - k) * b).eval());
      worst_aff = std::max(worst_aff, (mix - (k * ka + (1 - k) * kb)).cwiseAbs().maxCoeff());
      worst_lip = std::max(worst_lip, (ka - kb).cwiseAbs().sum() - L * l1((a - b).eval()));
    }
    CHECK(worst_row <= 1e-12);
    CHECK(worst_aff <= 1e-12);
    CHECK(worst_lip <= 1e-12);
  }
}

TEST_CASE("fixed point of the qsd model is the left Perron vector of P°") {
  auto q = qsd3();
  auto fp = fixed_point(q);
  ProbVec oracle = perron_left(q.base);
  CHECK(l1((fp.pi - oracle).eval()) <= 1e-8);
  CHECK(fp.pi(0) == doctest::Approx(0.590).epsilon(1e-3));
  CHECK(fp.residual <= 1e-10);
  CHECK(fp.positive);
  for (double a : {0.3, 0.7}) CHECK(l1((fixed_point(q, a).pi - fp.pi).eval()) <= 1e-8);
  // monotone after a short burn-in
  for (std::size_t i = 5; i + 1 < fp.residuals.size(); ++i) CHECK(fp.residuals[i + 1] <= fp.residuals[i] * (1 + 1e-9));
}

TEST_CASE("fixed point examples") {
  Eigen::MatrixXd b(3, 3);
  b << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  std::vector<Eigen::MatrixXd> zero(3, Eigen::MatrixXd::Zero(3, 3));
  auto ds = make_model(b, zero, AdjacencySpec::full(3));
  CHECK(l1((fixed_point(ds).pi - uniform(3)).eval()) <= 1e-12);
  auto ri = build_example("row-independent", {{"M", {{0, 1}, {1, 0}}}});
  CHECK(l1((fixed_point(ri).pi - uniform(2)).eval()) <= 1e-12);
  for (const auto& [name, model] : example_models()) {
    INFO(name);
    auto fp = fixed_point(model);
    CHECK(fp.residual <= 1e-12);
  }
}

TEST_CASE("check_assumptions") {
  Eigen::MatrixXd b(2, 2);
  b << 0.3, 0.7, 0.6, 0.4;
  auto flat = make_model(b, {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)}, AdjacencySpec::full(2));
  CHECK(check_assumptions(flat).lipschitz == 0);

  auto q = check_assumptions(qsd3());
  CHECK(q.product_attempted);
  CHECK(q.product_positive);
  CHECK(q.product_min_k == 2);
  CHECK(q.irreducible);
  // P°(2,2) = 0 pins the vertex candidate to zero; the maximal constant is positive
  CHECK(q.delta0A_vertex == 0);
  CHECK(q.delta0A_max > 0);
  CHECK(q.delta0A_max_holds);
  CHECK(q.delta0A_random_ok);

  Eigen::MatrixXi cyc(2, 2);
  cyc << 0, 1, 1, 0;
  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  auto two = make_model(swap, {Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2)},
                        AdjacencySpec::from_matrix(cyc));
  auto r = check_assumptions(two);
  CHECK(r.delta0A_vertex == 1.0);
  CHECK(r.delta0A_vertex_holds);
  CHECK(r.product_min_k == 2);
}

TEST_CASE("model json round trip") {
  for (const auto& [name, model] : example_models()) {
    INFO(name);
    auto j = to_json(model);
    auto back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.d == model.d);
    CHECK((back.base - model.base).norm() == 0);
    for (int z = 0; z < model.d; ++z) CHECK((back.tensor[z] - model.tensor[z]).norm() == 0);
    CHECK(back.adjacency.a == model.adjacency.a);
  }
  auto j = to_json(qsd3());
  j["bogus"] = 1;
  CHECK_THROWS_AS(model_from_json(j), ValidationError);
  nlohmann::json by_kind = {{"kind", "qsd"}, {"params", {{"P", {{1, 0, 0}, {0.2, 0.3, 0.5}, {0.4, 0.6, 0}}}}}};
  CHECK((model_from_json(by_kind).base - qsd3().base).norm() == 0);
}
