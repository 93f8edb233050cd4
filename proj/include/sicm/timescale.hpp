#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace sicm {

// t_k = sum_{j=1}^k 1/(j+1), k = 0..n
class TimeGrid {
 public:
  explicit TimeGrid(std::int64_t n);

  std::int64_t n() const { return n_; }
  double t_of(std::int64_t k) const;
  // largest k <= n with t_k <= s
  std::int64_t m_of(double s) const;
  double a_of(double s) const { return t_of(m_of(s)); }
  std::int64_t psi_e(double t) const;
  double t_n() const { return t_.back(); }
  // sum_{k<n} (k+2)(t_{k+1} - t_k); equals n
  double psi_integral() const;

 private:
  std::int64_t n_;
  std::vector<double> t_;
};

// sup_{s in [0,t]} |psi_e(t_n - s)/n - e^{-s}|, exact over breakpoints
double psi_limit_gap(std::int64_t n, double t);
double psi_limit_gap(const TimeGrid& grid, double t);

// first n in [2, n_max] violating gamma + 1/(2(n+1)) < H_n - log n < gamma + 1/(2(n-1))
std::optional<std::int64_t> harmonic_bracket_violation(std::int64_t n_max);

}  // namespace sicm
