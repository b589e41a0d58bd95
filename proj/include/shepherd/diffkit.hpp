// Copyright 2026 The Shepherd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Forward-mode differentiation with multi-lane tangents.
//
// A Dual<Lanes> carries a value and one directional derivative per lane.
// Lanes is either a compile-time count (matrix-game mechanisms have 5
// parameters) or Eigen::Dynamic (the redistribution MLP has 420). A dynamic
// Dual with an empty tangent array is a constant: every operation treats the
// missing lanes as zeros, so constants never pay for a tangent allocation.
//
// Dual is registered with Eigen::NumTraits, so Eigen::Matrix<Dual<L>, ...>
// works for sums, products and coefficient-wise expressions. Linear solves go
// through lifted_solve(), which factorizes the value part once and reuses the
// factorization for every tangent lane.
//
// There is no tape and no global state; everything is a value type.

#ifndef SHEPHERD_DIFFKIT_HPP_
#define SHEPHERD_DIFFKIT_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "shepherd/errors.hpp"

namespace shepherd {

template <int Lanes>
class Dual {
 public:
  using Tangent = Eigen::Array<double, Lanes, 1>;
  static constexpr bool kDynamic = (Lanes == Eigen::Dynamic);

  Dual() : Dual(0.0) {}
  // Implicit on purpose: Eigen builds Scalar(0) and Scalar(1) literals.
  Dual(double value) : value_(value) {  // NOLINT
    if constexpr (!kDynamic) tangent_.setZero();
  }
  Dual(double value, Tangent tangent)
      : value_(value), tangent_(std::move(tangent)) {}

  // Independent variable with a unit tangent in `lane`.
  static Dual variable(double value, Eigen::Index lane,
                       Eigen::Index lanes = Lanes) {
    Tangent t = Tangent::Zero(lanes);
    t[lane] = 1.0;
    return Dual(value, std::move(t));
  }

  double value() const { return value_; }
  const Tangent& tangent() const { return tangent_; }
  double tangent(Eigen::Index lane) const {
    if constexpr (kDynamic) {
      if (tangent_.size() == 0) return 0.0;
    }
    return tangent_[lane];
  }
  Eigen::Index lanes() const { return tangent_.size(); }

  Dual& operator+=(const Dual& o) {
    value_ += o.value_;
    tangent_ = combine(1.0, tangent_, 1.0, o.tangent_);
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value_ -= o.value_;
    tangent_ = combine(1.0, tangent_, -1.0, o.tangent_);
    return *this;
  }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator-(const Dual& a) { return Dual(-a.value_, scale(-1.0, a.tangent_)); }
  friend Dual operator+(const Dual& a) { return a; }

  friend Dual operator+(const Dual& a, const Dual& b) {
    return Dual(a.value_ + b.value_, combine(1.0, a.tangent_, 1.0, b.tangent_));
  }
  friend Dual operator-(const Dual& a, const Dual& b) {
    return Dual(a.value_ - b.value_, combine(1.0, a.tangent_, -1.0, b.tangent_));
  }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return Dual(a.value_ * b.value_,
                combine(b.value_, a.tangent_, a.value_, b.tangent_));
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    if (b.value_ == 0.0) throw DomainError("diffkit: division by zero");
    const double q = a.value_ / b.value_;
    return Dual(q, combine(1.0 / b.value_, a.tangent_, -q / b.value_, b.tangent_));
  }

  friend Dual operator+(const Dual& a, double b) { return Dual(a.value_ + b, a.tangent_); }
  friend Dual operator+(double a, const Dual& b) { return Dual(a + b.value_, b.tangent_); }
  friend Dual operator-(const Dual& a, double b) { return Dual(a.value_ - b, a.tangent_); }
  friend Dual operator-(double a, const Dual& b) {
    return Dual(a - b.value_, scale(-1.0, b.tangent_));
  }
  friend Dual operator*(const Dual& a, double b) { return Dual(a.value_ * b, scale(b, a.tangent_)); }
  friend Dual operator*(double a, const Dual& b) { return Dual(a * b.value_, scale(a, b.tangent_)); }
  friend Dual operator/(const Dual& a, double b) {
    if (b == 0.0) throw DomainError("diffkit: division by zero");
    return Dual(a.value_ / b, scale(1.0 / b, a.tangent_));
  }
  friend Dual operator/(double a, const Dual& b) { return Dual(a) / b; }

  // Comparisons look at the value part only.
  friend bool operator<(const Dual& a, const Dual& b) { return a.value_ < b.value_; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.value_ > b.value_; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.value_ <= b.value_; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.value_ >= b.value_; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.value_ == b.value_; }
  friend bool operator!=(const Dual& a, const Dual& b) { return a.value_ != b.value_; }

  // Unary map with known derivative: f(x) with f'(x) = slope.
  Dual apply(double fvalue, double slope) const {
    return Dual(fvalue, scale(slope, tangent_));
  }

 private:
  static Tangent scale(double alpha, const Tangent& x) {
    if constexpr (kDynamic) {
      if (x.size() == 0) return Tangent();
    }
    return alpha * x;
  }

  static Tangent combine(double alpha, const Tangent& x, double beta,
                         const Tangent& y) {
    if constexpr (kDynamic) {
      if (x.size() == 0) return scale(beta, y);
      if (y.size() == 0) return scale(alpha, x);
      if (x.size() != y.size())
        throw DomainError("diffkit: tangent lane count mismatch");
    }
    return alpha * x + beta * y;
  }

  double value_;
  Tangent tangent_;
};

using DualX = Dual<Eigen::Dynamic>;

template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Value extraction works uniformly on doubles and duals.
inline double value_of(double x) { return x; }
template <int L>
double value_of(const Dual<L>& x) {
  return x.value();
}

// ---------------------------------------------------------------------------
// Elementwise kernels. Each has a double overload so templated code can call
// them unqualified with either scalar type.

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

template <int L>
Dual<L> sigmoid(const Dual<L>& x) {
  const double s = sigmoid(x.value());
  return x.apply(s, s * (1.0 - s));
}

template <int L>
Dual<L> exp(const Dual<L>& x) {
  const double e = std::exp(x.value());
  return x.apply(e, e);
}

template <int L>
Dual<L> log(const Dual<L>& x) {
  if (!(x.value() > 0.0)) throw DomainError("diffkit: log of non-positive value");
  return x.apply(std::log(x.value()), 1.0 / x.value());
}

template <int L>
Dual<L> tanh(const Dual<L>& x) {
  const double t = std::tanh(x.value());
  return x.apply(t, 1.0 - t * t);
}

template <int L>
Dual<L> sqrt(const Dual<L>& x) {
  if (!(x.value() > 0.0)) throw DomainError("diffkit: sqrt at non-positive value");
  const double r = std::sqrt(x.value());
  return x.apply(r, 0.5 / r);
}

template <int L>
Dual<L> abs(const Dual<L>& x) {
  return x.value() < 0.0 ? -x : x;
}

// Projection onto [lo, hi]; the derivative is zero where the bound is active.
inline double clamp(double x, double lo, double hi) { return std::clamp(x, lo, hi); }

template <int L>
Dual<L> clamp(const Dual<L>& x, double lo, double hi) {
  if (x.value() < lo) return Dual<L>(lo);
  if (x.value() > hi) return Dual<L>(hi);
  return x;
}

template <int L>
bool isfinite(const Dual<L>& x) {
  return std::isfinite(x.value()) && x.tangent().allFinite();
}

// ---------------------------------------------------------------------------
// Seeding and extraction helpers.

// One independent variable per entry of `x`, lane i seeded on entry i.
template <int L>
VecX<Dual<L>> make_variables(const Eigen::VectorXd& x) {
  if constexpr (L != Eigen::Dynamic) {
    if (x.size() != L) throw DomainError("diffkit: variable count != lane count");
  }
  VecX<Dual<L>> out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out[i] = Dual<L>::variable(x[i], i, x.size());
  return out;
}

template <int L>
Eigen::VectorXd gradient_of(const Dual<L>& y, Eigen::Index lanes) {
  Eigen::VectorXd g(lanes);
  for (Eigen::Index i = 0; i < lanes; ++i) g[i] = y.tangent(i);
  return g;
}

template <class Derived>
auto values_of(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return m.unaryExpr([](const Scalar& s) { return value_of(s); }).eval();
}

// ---------------------------------------------------------------------------
// Linear solves.

namespace detail {

template <int N, int K>
void check_residual(const Eigen::Matrix<double, N, N>& a,
                    const Eigen::Matrix<double, N, K>& x,
                    const Eigen::Matrix<double, N, K>& b, double tol) {
  const double scale = 1.0 + b.cwiseAbs().maxCoeff();
  const double residual = (a * x - b).cwiseAbs().maxCoeff();
  if (!std::isfinite(residual) || !x.allFinite() || residual > tol * scale) {
    throw NumericalError("linear solve failed: residual " +
                         std::to_string(residual) + " exceeds " +
                         std::to_string(tol * scale));
  }
}

}  // namespace detail

inline constexpr double kSolveResidualTolerance = 1e-8;

// Dense solve with partial pivoting and a residual check.
template <int N, int K>
Eigen::Matrix<double, N, K> solve_checked(const Eigen::Matrix<double, N, N>& a,
                                          const Eigen::Matrix<double, N, K>& b) {
  Eigen::PartialPivLU<Eigen::Matrix<double, N, N>> lu(a);
  Eigen::Matrix<double, N, K> x = lu.solve(b);
  detail::check_residual<N, K>(a, x, b, kSolveResidualTolerance);
  return x;
}

// Solves A X = B where both sides carry tangents. The value part is solved
// directly; lane l of the tangent solves A dX = dB - dA X.
template <int L, int N, int K>
Eigen::Matrix<Dual<L>, N, K> lifted_solve(const Eigen::Matrix<Dual<L>, N, N>& a,
                                          const Eigen::Matrix<Dual<L>, N, K>& b) {
  using ValueMat = Eigen::Matrix<double, N, N>;
  using ValueRhs = Eigen::Matrix<double, N, K>;
  const ValueMat av = values_of(a);
  const ValueRhs bv = values_of(b);
  Eigen::PartialPivLU<ValueMat> lu(av);
  const ValueRhs xv = lu.solve(bv);
  detail::check_residual<N, K>(av, xv, bv, kSolveResidualTolerance);

  Eigen::Index lanes = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) lanes = std::max(lanes, a.data()[i].lanes());
  for (Eigen::Index i = 0; i < b.size(); ++i) lanes = std::max(lanes, b.data()[i].lanes());

  const Eigen::Index n = av.rows();
  const Eigen::Index k = bv.cols();
  Eigen::Matrix<Dual<L>, N, K> x(n, k);
  if (lanes == 0) {
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = Dual<L>(xv.data()[i]);
    return x;
  }

  std::vector<typename Dual<L>::Tangent> dx(static_cast<std::size_t>(x.size()),
                                            Dual<L>::Tangent::Zero(lanes));
  ValueMat da(n, n);
  ValueRhs rhs(n, k);
  for (Eigen::Index lane = 0; lane < lanes; ++lane) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) da(i, j) = a(i, j).tangent(lane);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index i = 0; i < n; ++i) rhs(i, j) = b(i, j).tangent(lane);
    rhs.noalias() -= da * xv;
    const ValueRhs lane_dx = lu.solve(rhs);
    for (Eigen::Index i = 0; i < x.size(); ++i) dx[static_cast<std::size_t>(i)][lane] = lane_dx.data()[i];
  }
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x.data()[i] = Dual<L>(xv.data()[i], std::move(dx[static_cast<std::size_t>(i)]));
  return x;
}

// Uniform entry point for templated code.
template <int L, int N, int K>
Eigen::Matrix<Dual<L>, N, K> solve_checked(const Eigen::Matrix<Dual<L>, N, N>& a,
                                           const Eigen::Matrix<Dual<L>, N, K>& b) {
  return lifted_solve(a, b);
}

}  // namespace shepherd

namespace Eigen {

template <int L>
struct NumTraits<shepherd::Dual<L>> : GenericNumTraits<shepherd::Dual<L>> {
  using Real = shepherd::Dual<L>;
  using NonInteger = shepherd::Dual<L>;
  using Nested = shepherd::Dual<L>;
  using Literal = shepherd::Dual<L>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3
  };
  static Real epsilon() { return Real(NumTraits<double>::epsilon()); }
  static Real dummy_precision() { return Real(NumTraits<double>::dummy_precision()); }
  static Real highest() { return Real(NumTraits<double>::highest()); }
  static Real lowest() { return Real(NumTraits<double>::lowest()); }
  static Real infinity() { return Real(NumTraits<double>::infinity()); }
  static Real quiet_NaN() { return Real(NumTraits<double>::quiet_NaN()); }
  static int digits10() { return NumTraits<double>::digits10(); }
  static int digits() { return NumTraits<double>::digits(); }
};

}  // namespace Eigen

#endif  // SHEPHERD_DIFFKIT_HPP_
