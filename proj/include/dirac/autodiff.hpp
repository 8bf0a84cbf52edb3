#pragma once

/**
 * @file autodiff.hpp
 * @brief Forward-mode automatic differentiation with nested dual numbers.
 *
 * `Dual<T>` carries a value and up to `kMaxDirections` first-order tangents,
 * each of type `T`. Nesting gives higher derivatives:
 *
 * @code
 * Dual1 = Dual<double>         // value + gradient
 * Dual2 = Dual<Dual<double>>   // value + gradient + Hessian
 * @endcode
 *
 * User fields are written once as generic callables over a span of scalars
 * and are evaluated at `double`, `Dual1` and `Dual2`:
 *
 * @code
 * auto f = [](auto x) { return x[0] * x[0] * x[1]; };
 * Eigen::VectorXd g = dirac::gradient(f, Eigen::Vector2d(2, 3));  // (12, 4)
 * @endcode
 *
 * `PolyFn` type-erases such a callable for the three scalar types so that
 * fields can be stored in ordinary value types.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

#include "dirac/errors.hpp"

namespace dirac {

/// Largest number of simultaneous tangent directions. Covers the phase
/// space of every built-in system (2n <= 10).
inline constexpr int kMaxDirections = 10;

template <class T>
class Dual;

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};
template <class T>
inline constexpr bool is_dual_v = is_dual<T>::value;

template <class T>
class Dual {
 public:
  using value_type = T;

  // Only the first n_ tangent slots are meaningful; the rest are never read.
  Dual() : value_{} {}
  Dual(const T& v) : value_(v) {}  // NOLINT: constants convert implicitly
  template <class U>
    requires(std::is_arithmetic_v<U> && !std::is_same_v<T, double>)
  Dual(U c) : value_(T(c)) {}  // NOLINT

  Dual(const Dual& o) : value_(o.value_), n_(o.n_) {
    for (int i = 0; i < n_; ++i) d_[i] = o.d_[i];
  }
  Dual& operator=(const Dual& o) {
    value_ = o.value_;
    n_ = o.n_;
    for (int i = 0; i < n_; ++i) d_[i] = o.d_[i];
    return *this;
  }

  /// Independent variable: value `v` with unit tangent along `index`.
  static Dual variable(const T& v, int directions, int index) {
    if (directions > kMaxDirections) {
      throw ShapeError("too many differentiation directions: " + std::to_string(directions));
    }
    Dual d(v);
    d.set_directions(directions);
    d.d_[static_cast<std::size_t>(index)] = T(1.0);
    return d;
  }

  const T& value() const { return value_; }
  T& value() { return value_; }
  int directions() const { return n_; }
  const T& d(int i) const {
    static const T zero{};
    return i < n_ ? d_[static_cast<std::size_t>(i)] : zero;
  }
  /// Writable slot; `i` must be below directions().
  T& d(int i) { return d_[static_cast<std::size_t>(i)]; }
  /// Grows (zero-filled) or shrinks the tangent count.
  void set_directions(int n) {
    for (int i = n_; i < n; ++i) d_[i] = T{};
    n_ = n;
  }

  Dual& operator+=(const Dual& o) {
    value_ += o.value_;
    const int m = std::min(n_, o.n_);
    for (int i = 0; i < m; ++i) d_[i] += o.d_[i];
    for (int i = m; i < o.n_; ++i) d_[i] = o.d_[i];
    n_ = std::max(n_, o.n_);
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    value_ -= o.value_;
    const int m = std::min(n_, o.n_);
    for (int i = 0; i < m; ++i) d_[i] -= o.d_[i];
    for (int i = m; i < o.n_; ++i) d_[i] = -o.d_[i];
    n_ = std::max(n_, o.n_);
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    *this = *this * o;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    *this = *this / o;
    return *this;
  }

  friend Dual operator-(const Dual& a) {
    Dual r(-a.value_);
    r.n_ = a.n_;
    for (int i = 0; i < a.n_; ++i) r.d_[i] = -a.d_[i];
    return r;
  }
  friend Dual operator+(const Dual& a) { return a; }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.value_ * b.value_);
    const int m = std::min(a.n_, b.n_);
    for (int i = 0; i < m; ++i) r.d_[i] = a.d_[i] * b.value_ + a.value_ * b.d_[i];
    for (int i = m; i < a.n_; ++i) r.d_[i] = a.d_[i] * b.value_;
    for (int i = m; i < b.n_; ++i) r.d_[i] = a.value_ * b.d_[i];
    r.n_ = std::max(a.n_, b.n_);
    return r;
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    const T inv = T(1.0) / b.value_;
    Dual r(a.value_ * inv);
    const int m = std::min(a.n_, b.n_);
    for (int i = 0; i < m; ++i) r.d_[i] = (a.d_[i] - r.value_ * b.d_[i]) * inv;
    for (int i = m; i < a.n_; ++i) r.d_[i] = a.d_[i] * inv;
    for (int i = m; i < b.n_; ++i) r.d_[i] = -(r.value_ * b.d_[i]) * inv;
    r.n_ = std::max(a.n_, b.n_);
    return r;
  }

  // Mixed arithmetic with plain numbers.
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator+(Dual a, U c) {
    a.value_ = a.value_ + static_cast<double>(c);
    return a;
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator+(U c, Dual a) {
    return std::move(a) + c;
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator-(Dual a, U c) {
    a.value_ = a.value_ - static_cast<double>(c);
    return a;
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator-(U c, const Dual& a) {
    return -a + c;
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator*(Dual a, U c) {
    const double k = static_cast<double>(c);
    a.value_ = a.value_ * k;
    for (int i = 0; i < a.n_; ++i) a.d_[i] = a.d_[i] * k;
    return a;
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator*(U c, Dual a) {
    return std::move(a) * c;
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator/(Dual a, U c) {
    return std::move(a) * (1.0 / static_cast<double>(c));
  }
  template <class U>
    requires std::is_arithmetic_v<U>
  friend Dual operator/(U c, const Dual& a) {
    const T inv = T(1.0) / a.value_;
    Dual r(static_cast<double>(c) * inv);
    for (int i = 0; i < a.n_; ++i) r.d_[i] = -(r.value_ * a.d_[i]) * inv;
    r.n_ = a.n_;
    return r;
  }

 private:
  T value_;
  std::array<T, kMaxDirections> d_;
  int n_ = 0;
};

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

/// Innermost floating-point value.
inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
  return primal(x.value());
}

template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
bool operator<(const A& a, const B& b) {
  return primal(a) < primal(b);
}
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
bool operator>(const A& a, const B& b) {
  return primal(a) > primal(b);
}
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
bool operator<=(const A& a, const B& b) {
  return primal(a) <= primal(b);
}
template <class A, class B>
  requires(is_dual_v<A> || is_dual_v<B>)
bool operator>=(const A& a, const B& b) {
  return primal(a) >= primal(b);
}

/// Applies a scalar function with known derivative: f(a) and f'(a) given.
template <class T>
Dual<T> chain(const Dual<T>& a, const T& f, const T& df) {
  Dual<T> r(f);
  r.set_directions(a.directions());
  for (int i = 0; i < a.directions(); ++i) r.d(i) = df * a.d(i);
  return r;
}

template <class T>
Dual<T> sin(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return chain(a, T(sin(a.value())), T(cos(a.value())));
}
template <class T>
Dual<T> cos(const Dual<T>& a) {
  using std::cos;
  using std::sin;
  return chain(a, T(cos(a.value())), T(-sin(a.value())));
}
template <class T>
Dual<T> tan(const Dual<T>& a) {
  using std::tan;
  const T t = tan(a.value());
  return chain(a, t, T(1.0 + t * t));
}
template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  const T e = exp(a.value());
  return chain(a, e, e);
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return chain(a, T(log(a.value())), T(1.0 / a.value()));
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  const T s = sqrt(a.value());
  return chain(a, s, T(0.5 / s));
}
template <class T>
Dual<T> pow(const Dual<T>& a, double k) {
  using std::pow;
  return chain(a, T(pow(a.value(), k)), T(k * pow(a.value(), k - 1.0)));
}
template <class T>
Dual<T> atan(const Dual<T>& a) {
  using std::atan;
  return chain(a, T(atan(a.value())), T(1.0 / (1.0 + a.value() * a.value())));
}
template <class T>
Dual<T> abs(const Dual<T>& a) {
  return primal(a) < 0.0 ? -a : a;
}

// Plain-double overloads so generic field code can call these unqualified.
inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double tan(double x) { return std::tan(x); }
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double pow(double x, double k) { return std::pow(x, k); }
inline double atan(double x) { return std::atan(x); }
inline double abs(double x) { return std::abs(x); }

/// `true` if the value and every nested tangent is finite.
inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual<T>& x) {
  if (!all_finite(x.value())) return false;
  for (int i = 0; i < x.directions(); ++i) {
    if (!all_finite(x.d(i))) return false;
  }
  return true;
}

/// Element type of a span argument handed to a user field.
template <class Span>
using scalar_of = std::remove_cv_t<typename Span::element_type>;

// --- type erasure ---------------------------------------------------------

template <class S>
using ScalarFieldSig = S(std::span<const S>);
template <class S>
using PhaseFieldSig = S(std::span<const S>, std::span<const S>);
template <class S>
using VectorFieldSig = std::vector<S>(std::span<const S>);

/// A generic callable stored for the scalar types double, Dual1 and Dual2.
template <template <class> class Sig>
class PolyFn {
 public:
  PolyFn() = default;
  template <class F>
    requires(!std::is_same_v<std::decay_t<F>, PolyFn>)
  explicit PolyFn(F f) : f0_(f), f1_(f), f2_(std::move(f)) {}

  template <class S>
  const std::function<Sig<S>>& get() const {
    if constexpr (std::is_same_v<S, double>) {
      return f0_;
    } else if constexpr (std::is_same_v<S, Dual1>) {
      return f1_;
    } else {
      static_assert(std::is_same_v<S, Dual2>, "fields are evaluated at double, Dual1 or Dual2");
      return f2_;
    }
  }

  explicit operator bool() const { return static_cast<bool>(f0_); }

 private:
  std::function<Sig<double>> f0_;
  std::function<Sig<Dual1>> f1_;
  std::function<Sig<Dual2>> f2_;
};

// --- seeding and extraction -----------------------------------------------

/// Lifts `x` to Dual<S> with tangent e_i on component i (offset by `first`),
/// out of `directions` total.
template <class S>
std::vector<Dual<S>> seed(std::span<const S> x, int directions, int first = 0) {
  std::vector<Dual<S>> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.push_back(Dual<S>::variable(x[i], directions, first + static_cast<int>(i)));
  }
  return out;
}

/// Lifts `x` to Dual<S> with zero tangents.
template <class S>
std::vector<Dual<S>> constant(std::span<const S> x) {
  return std::vector<Dual<S>>(x.begin(), x.end());
}

inline std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline void require_finite(double x, const char* what, int index = -1) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " is not finite", index);
}

// --- derivative drivers -----------------------------------------------------

/// Gradient of a scalar field written as `f(span<const S>) -> S`.
template <class F>
Eigen::VectorXd gradient(F&& f, const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size());
  const auto xs = seed<double>(as_span(x), m);
  const Dual1 y = f(std::span<const Dual1>(xs));
  Eigen::VectorXd g(m);
  for (int i = 0; i < m; ++i) {
    g[i] = y.d(i);
    require_finite(g[i], "gradient", i);
  }
  return g;
}

/// Value, gradient and Hessian of a scalar field via Dual2.
struct SecondOrder {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

template <class F>
SecondOrder second_order(F&& f, const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size());
  const auto inner = seed<double>(as_span(x), m);
  std::vector<Dual2> xs;
  xs.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) xs.push_back(Dual2::variable(inner[static_cast<std::size_t>(i)], m, i));
  const Dual2 y = f(std::span<const Dual2>(xs));
  SecondOrder out;
  out.value = y.value().value();
  out.gradient.resize(m);
  out.hessian.resize(m, m);
  for (int i = 0; i < m; ++i) {
    out.gradient[i] = y.value().d(i);
    require_finite(out.gradient[i], "gradient", i);
    for (int j = 0; j < m; ++j) {
      out.hessian(i, j) = y.d(i).d(j);
      require_finite(out.hessian(i, j), "hessian", i * m + j);
    }
  }
  return out;
}

template <class F>
Eigen::MatrixXd hessian(F&& f, const Eigen::VectorXd& x) {
  return second_order(std::forward<F>(f), x).hessian;
}

/// Jacobian J(i, j) = d f_i / d x_j of a vector field `f(span<const S>) -> vector<S>`.
template <class F>
Eigen::MatrixXd jacobian(F&& f, const Eigen::VectorXd& x) {
  const int m = static_cast<int>(x.size());
  const auto xs = seed<double>(as_span(x), m);
  const std::vector<Dual1> y = f(std::span<const Dual1>(xs));
  Eigen::MatrixXd J(static_cast<Eigen::Index>(y.size()), m);
  for (std::size_t i = 0; i < y.size(); ++i) {
    for (int j = 0; j < m; ++j) {
      J(static_cast<Eigen::Index>(i), j) = y[i].d(j);
      require_finite(y[i].d(j), "jacobian", static_cast<int>(i));
    }
  }
  return J;
}

/// Jacobian of a one-form field in the layout J(i, j) = d gamma_j / d x^i.
template <class F>
Eigen::MatrixXd jacobian_covector(F&& gamma, const Eigen::VectorXd& x) {
  return jacobian(std::forward<F>(gamma), x).transpose();
}

/// d gamma(u, w) = (d_i gamma_j - d_j gamma_i) u^i w^j.
template <class F>
double exterior_derivative_2form(F&& gamma, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& w) {
  if (u.size() != x.size() || w.size() != x.size()) throw ShapeError("exterior derivative: dimension mismatch");
  const Eigen::MatrixXd J = jacobian_covector(std::forward<F>(gamma), x);
  if (J.cols() != x.size()) throw ShapeError("exterior derivative: one-form has wrong dimension");
  return u.dot((J - J.transpose()) * w);
}

}  // namespace dirac
