#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sicm {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// point of the simplex over the state space
using ProbVec = Vec<double>;
// probability on pairs of states, q(x,y)
using PairMeasure = Mat<double>;

constexpr double kSimplexTol = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

// errors carry the name of the violated precondition in what()
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct RangeError : ValidationError {
  using ValidationError::ValidationError;
};
struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};
struct InfeasibleError : Error {
  using Error::Error;
};

inline ProbVec uniform(int d) { return ProbVec::Constant(d, 1.0 / d); }

inline ProbVec vertex(int d, int z) {
  ProbVec e = ProbVec::Zero(d);
  e(z) = 1.0;
  return e;
}

template <typename Derived>
double l1(const Eigen::MatrixBase<Derived>& v) {
  return v.template lpNorm<1>();
}

template <typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& p, double tol = 1e-10) {
  if (p.size() == 0) return false;
  if ((p.array() < -tol).any()) return false;
  return std::abs(p.sum() - 1.0) <= tol;
}

// clamp [-1e-12, 0) to zero and renormalize
template <typename Derived>
typename Derived::PlainObject clean_simplex(const Eigen::MatrixBase<Derived>& p) {
  typename Derived::PlainObject q = p;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (q(i) < 0 && q(i) >= -kSimplexTol) q(i) = 0;
  q /= q.sum();
  return q;
}

template <typename Derived>
Vec<typename Derived::Scalar> first_marginal(const Eigen::MatrixBase<Derived>& q) {
  return q.rowwise().sum();
}

template <typename Derived>
Vec<typename Derived::Scalar> second_marginal(const Eigen::MatrixBase<Derived>& q) {
  return q.colwise().sum().transpose();
}

// rows with zero mass are left as zero rows
template <typename Derived>
Mat<typename Derived::Scalar> disintegrate(const Eigen::MatrixBase<Derived>& q) {
  Mat<typename Derived::Scalar> k = q;
  for (Eigen::Index x = 0; x < q.rows(); ++x) {
    auto s = q.row(x).sum();
    if (s > 0) k.row(x) /= s;
  }
  return k;
}

// R(p || r) with 0 log 0 = 0; +inf when p is not absolutely continuous
template <typename DerivedP, typename DerivedR>
double relative_entropy(const Eigen::MatrixBase<DerivedP>& p,
                        const Eigen::MatrixBase<DerivedR>& r) {
  double s = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      double a = p(i, j);
      if (a <= 0) continue;
      double b = r(i, j);
      if (b <= 0) return kInf;
      s += a * std::log(a / b);
    }
  return s < 0 ? 0.0 : s;
}

// sum over x of mu(x) R(K(x,.) || G(x,.))
template <typename DerivedM, typename DerivedK, typename DerivedG>
double row_entropy(const Eigen::MatrixBase<DerivedM>& mu,
                   const Eigen::MatrixBase<DerivedK>& k,
                   const Eigen::MatrixBase<DerivedG>& g) {
  double s = 0;
  for (Eigen::Index x = 0; x < k.rows(); ++x) {
    if (mu(x) <= 0) continue;
    double r = relative_entropy(k.row(x), g.row(x));
    if (!std::isfinite(r)) return kInf;
    s += mu(x) * r;
  }
  return s;
}

}  // namespace sicm
