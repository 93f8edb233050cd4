#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sicm/model.hpp"

namespace sicm::testing {

inline ModelSpec uniform2() {
  return build_example("row-independent", {{"M", {{0.5, 0.5}, {0.5, 0.5}}}});
}

inline ModelSpec qsd3() {
  return build_example("qsd", {{"P", {{1, 0, 0}, {0.2, 0.3, 0.5}, {0.4, 0.6, 0}}}});
}

// one instance per builder, d <= 6
inline std::vector<std::pair<std::string, ModelSpec>> example_models() {
  using nlohmann::json;
  json cyc = {{0.1, 0.6, 0.3}, {0.3, 0.1, 0.6}, {0.6, 0.3, 0.1}};
  json lazy = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
  json flat = {{0.2, 0.4, 0.4}, {0.4, 0.2, 0.4}, {0.4, 0.4, 0.2}};
  return {
      {"qsd", qsd3()},
      {"polya", build_example("polya", {{"M", {{{0.7, 0.2, 0.1}, {0.2, 0.6, 0.2}, {0.1, 0.3, 0.6}},
                                                {{0.3, 0.3, 0.4}, {0.5, 0.25, 0.25}, {0.2, 0.2, 0.6}},
                                                {{0.4, 0.4, 0.2}, {0.1, 0.8, 0.1}, {0.3, 0.3, 0.4}}}}})},
      {"row-independent", build_example("row-independent", {{"M", cyc}})},
      {"pagerank", build_example("pagerank", {{"links", {{0, 1, 1}, {1, 0, 0}, {1, 1, 0}}},
                                              {"alpha", 0.3},
                                              {"theta", 0.5},
                                              {"M", {lazy, flat, cyc}}})},
      {"edge-reinforced",
       build_example("edge-reinforced", {{"vertices", 3}, {"edges", {{0, 1}, {1, 2}, {0, 2}}}, {"delta", 0.5}})},
  };
}

inline Eigen::MatrixXd random_kernel(int d, std::mt19937_64& gen, double lo = 0.05) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  Eigen::MatrixXd k(d, d);
  for (int x = 0; x < d; ++x)
    for (int y = 0; y < d; ++y) k(x, y) = u(gen);
  for (int x = 0; x < d; ++x) k.row(x) /= k.row(x).sum();
  return k;
}

// G(m) = sum_z m_z M^z with positive random M^z
inline ModelSpec random_polya(int d, std::mt19937_64& gen) {
  nlohmann::json ms = nlohmann::json::array();
  for (int z = 0; z < d; ++z) {
    Eigen::MatrixXd k = random_kernel(d, gen);
    nlohmann::json rows = nlohmann::json::array();
    for (int x = 0; x < d; ++x) {
      nlohmann::json row = nlohmann::json::array();
      for (int y = 0; y < d; ++y) row.push_back(k(x, y));
      rows.push_back(row);
    }
    ms.push_back(rows);
  }
  return build_example("polya", {{"M", ms}});
}

inline ProbVec random_interior(int d, std::mt19937_64& gen, double lo = 0.05) {
  std::exponential_distribution<double> e(1.0);
  ProbVec m(d);
  for (int z = 0; z < d; ++z) m(z) = e(gen);
  m /= m.sum();
  m = (1 - d * lo) * m + ProbVec::Constant(d, lo);
  return m;
}

}  // namespace sicm::testing
