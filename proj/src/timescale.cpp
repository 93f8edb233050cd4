#include "sicm/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sicm/types.hpp"

namespace sicm {

namespace {

struct Kahan {
  double sum = 0, c = 0;
  void add(double v) {
    double y = v - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

TimeGrid::TimeGrid(std::int64_t n) : n_(n) {
  if (n < 1) throw ValidationError("TimeGrid: n >= 1");
  t_.resize(n + 1);
  Kahan k;
  t_[0] = 0;
  for (std::int64_t j = 1; j <= n; ++j) {
    k.add(1.0 / static_cast<double>(j + 1));
    t_[j] = k.sum;
  }
}

double TimeGrid::t_of(std::int64_t k) const {
  if (k < 0 || k > n_) throw RangeError("t_of: 0 <= k <= n");
  return t_[k];
}

std::int64_t TimeGrid::m_of(double s) const {
  if (!(s >= 0) || s > t_.back()) throw RangeError("m_of: 0 <= s <= t_n");
  auto it = std::upper_bound(t_.begin(), t_.end(), s);
  return static_cast<std::int64_t>(it - t_.begin()) - 1;
}

std::int64_t TimeGrid::psi_e(double t) const {
  if (!(t >= 0) || t >= t_.back()) throw RangeError("psi_e: 0 <= t < t_n");
  return m_of(t) + 2;
}

double TimeGrid::psi_integral() const {
  Kahan k;
  for (std::int64_t j = 0; j < n_; ++j)
    k.add(static_cast<double>(j + 2) * (t_[j + 1] - t_[j]));
  return k.sum;
}

double psi_limit_gap(const TimeGrid& grid, double t) {
  const double tn = grid.t_n();
  if (!(t >= 0)) throw RangeError("psi_limit_gap: t >= 0");
  if (t >= tn) throw RangeError("psi_limit_gap: t < t_n");
  const double n = static_cast<double>(grid.n());
  // at s = 0 the argument is t_n itself, where psi = n + 2
  double best = std::abs((n + 2) / n - 1.0);
  // psi(t_n - s) = k + 2 for s in (t_n - t_{k+1}, t_n - t_k]
  const std::int64_t kmin = grid.m_of(tn - t);
  for (std::int64_t k = grid.n() - 1; k >= kmin; --k) {
    const double v = static_cast<double>(k + 2) / n;
    const double lo = std::max(0.0, tn - grid.t_of(k + 1));
    const double hi = std::min(t, tn - grid.t_of(k));
    if (hi < lo) continue;
    best = std::max({best, std::abs(v - std::exp(-lo)), std::abs(v - std::exp(-hi))});
  }
  return best;
}

double psi_limit_gap(std::int64_t n, double t) { return psi_limit_gap(TimeGrid(n), t); }

std::optional<std::int64_t> harmonic_bracket_violation(std::int64_t n_max) {
  constexpr double g = std::numbers::egamma;
  Kahan h;
  h.add(1.0);
  for (std::int64_t n = 2; n <= n_max; ++n) {
    h.add(1.0 / static_cast<double>(n));
    const double v = h.sum - std::log(static_cast<double>(n));
    const double nn = static_cast<double>(n);
    if (!(g + 1.0 / (2 * (nn + 1)) < v && v < g + 1.0 / (2 * (nn - 1)))) return n;
  }
  return std::nullopt;
}

}  // namespace sicm
