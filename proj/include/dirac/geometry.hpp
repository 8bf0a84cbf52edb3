#pragma once

/**
 * @file geometry.hpp
 * @brief Lagrangians, constraint distributions and the local formulas of the
 * induced Dirac structures on a global chart of R^n.
 *
 * Angles are plain unwrapped coordinates. All derivatives go through
 * autodiff.hpp.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dirac/autodiff.hpp"
#include "dirac/errors.hpp"
#include "dirac/linalg.hpp"

namespace dirac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline void require_dim(const Vec& x, Eigen::Index n, const char* what) {
  if (x.size() != n) {
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(n) + ", got " +
                     std::to_string(x.size()));
  }
}

inline void require_finite(const Vec& x, const char* what) {
  for (Eigen::Index i = 0; i < x.size(); ++i) require_finite(x[i], what, static_cast<int>(i));
}

/// Scalar function L(q, v) on the velocity phase space.
class LagrangianField {
 public:
  LagrangianField() = default;
  template <class F>
  LagrangianField(int n, F f) : n_(n), fn_(std::move(f)) {}

  int dim() const { return n_; }

  template <class S>
  S operator()(std::span<const S> q, std::span<const S> v) const {
    return fn_.get<S>()(q, v);
  }
  double operator()(const Vec& q, const Vec& v) const {
    require_dim(q, n_, "lagrangian q");
    require_dim(v, n_, "lagrangian v");
    const double y = fn_.get<double>()(as_span(q), as_span(v));
    require_finite(y, "lagrangian");
    return y;
  }

 private:
  int n_ = 0;
  PolyFn<PhaseFieldSig> fn_;
};

/// k one-forms on R^n, given as a k x n row-major coefficient field.
class ConstraintDistribution {
 public:
  ConstraintDistribution() = default;
  template <class F>
  ConstraintDistribution(int n, int k, F f) : n_(n), k_(k), fn_(std::move(f)) {}
  /// No constraints: Delta is all of TQ.
  static ConstraintDistribution none(int n) {
    return ConstraintDistribution(n, 0, [](auto q) { return std::vector<scalar_of<decltype(q)>>{}; });
  }

  int dim() const { return n_; }
  int rank() const { return k_; }

  template <class S>
  SmallMatrix<S> matrix(std::span<const S> q) const {
    SmallMatrix<S> m(k_, n_);
    if (k_ == 0) return m;
    std::vector<S> raw = fn_.get<S>()(q);
    if (raw.size() != static_cast<std::size_t>(k_ * n_)) throw ShapeError("constraint field returned wrong size");
    m.data = std::move(raw);
    return m;
  }

  Mat matrix(const Vec& q) const {
    require_dim(q, n_, "constraint q");
    Mat m = to_eigen(matrix<double>(as_span(q)));
    for (Eigen::Index i = 0; i < m.size(); ++i) require_finite(m.data()[i], "constraint form", static_cast<int>(i));
    return m;
  }

  /// d/dq of row a, column i, contracted: out(a)(i, j) = d omega^a_i / d q_j.
  std::vector<Mat> derivative(const Vec& q) const {
    std::vector<Mat> out(static_cast<std::size_t>(k_), Mat::Zero(n_, n_));
    if (k_ == 0) return out;
    const auto qs = seed<double>(as_span(q), n_);
    const SmallMatrix<Dual1> m = matrix<Dual1>(std::span<const Dual1>(qs));
    for (int a = 0; a < k_; ++a) {
      for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) out[static_cast<std::size_t>(a)](i, j) = m(a, i).d(j);
      }
    }
    return out;
  }

  /// Value of the k forms on a velocity.
  Vec apply(const Vec& q, const Vec& v) const { return matrix(q) * v; }

 private:
  int n_ = 0;
  int k_ = 0;
  PolyFn<VectorFieldSig> fn_;
};

/// Point of TQ (+) T*Q.
struct PontryaginState {
  Vec q;
  Vec v;
  Vec p;
};

/// Embedding of a holonomic leaf S of dimension m into R^n.
class HolonomicLeaf {
 public:
  HolonomicLeaf() = default;
  template <class F>
  HolonomicLeaf(int m, int n, F f) : m_(m), n_(n), fn_(std::move(f)) {}

  int leaf_dim() const { return m_; }
  int ambient_dim() const { return n_; }

  template <class S>
  std::vector<S> embed(std::span<const S> s) const {
    return fn_.get<S>()(s);
  }
  Vec operator()(const Vec& s) const {
    require_dim(s, m_, "leaf coordinates");
    return to_eigen(std::span<const double>(fn_.get<double>()(as_span(s))));
  }
  /// n x m tangent map.
  Mat tangent(const Vec& s) const {
    return jacobian([this](auto x) { return fn_.get<scalar_of<decltype(x)>>()(x); }, s);
  }
  explicit operator bool() const { return static_cast<bool>(fn_); }

 private:
  int m_ = 0;
  int n_ = 0;
  PolyFn<VectorFieldSig> fn_;
};

// --- Lagrangian derivatives ------------------------------------------------

/// dL/dv at arbitrary scalar S, computed with one extra dual layer.
template <class S>
std::vector<S> grad_v(const LagrangianField& L, std::span<const S> q, std::span<const S> v) {
  const int n = L.dim();
  const auto qd = constant<S>(q);
  const auto vd = seed<S>(v, n);
  const Dual<S> y = L(std::span<const Dual<S>>(qd), std::span<const Dual<S>>(vd));
  std::vector<S> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = y.d(i);
  return out;
}

/// dL/dq at arbitrary scalar S.
template <class S>
std::vector<S> grad_q(const LagrangianField& L, std::span<const S> q, std::span<const S> v) {
  const int n = L.dim();
  const auto qd = seed<S>(q, n);
  const auto vd = constant<S>(v);
  const Dual<S> y = L(std::span<const Dual<S>>(qd), std::span<const Dual<S>>(vd));
  std::vector<S> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = y.d(i);
  return out;
}

/// Value, first derivatives and the velocity rows of the Hessian.
struct LagrangianJet {
  double value = 0.0;
  Vec dq;   ///< dL/dq
  Vec dv;   ///< dL/dv
  Mat Mvv;  ///< d2L/dv dv
  Mat Kvq;  ///< Kvq(i, j) = d2L/dv_i dq_j
};

inline LagrangianJet jet(const LagrangianField& L, const Vec& q, const Vec& v) {
  const int n = L.dim();
  require_dim(q, n, "q");
  require_dim(v, n, "v");
  std::vector<Dual2> qs;
  std::vector<Dual2> vs;
  qs.reserve(static_cast<std::size_t>(n));
  vs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    qs.emplace_back(Dual1::variable(q[i], 2 * n, i));
    vs.push_back(Dual2::variable(Dual1::variable(v[i], 2 * n, n + i), n, i));
  }
  const Dual2 y = L(std::span<const Dual2>(qs), std::span<const Dual2>(vs));
  LagrangianJet out;
  out.value = y.value().value();
  require_finite(out.value, "lagrangian");
  out.dq.resize(n);
  out.dv.resize(n);
  out.Mvv.resize(n, n);
  out.Kvq.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.dq[i] = y.value().d(i);
    out.dv[i] = y.value().d(n + i);
    require_finite(out.dq[i], "dL/dq", i);
    require_finite(out.dv[i], "dL/dv", i);
    for (int j = 0; j < n; ++j) {
      out.Kvq(i, j) = y.d(i).d(j);
      out.Mvv(i, j) = y.d(i).d(n + j);
      require_finite(out.Kvq(i, j), "d2L/dvdq", i * n + j);
      require_finite(out.Mvv(i, j), "d2L/dv2", i * n + j);
    }
  }
  return out;
}

// --- geometry operations -----------------------------------------------------

/// p = dL/dv(q, v).
inline Vec legendre(const LagrangianField& L, const Vec& q, const Vec& v) {
  require_dim(q, L.dim(), "q");
  require_dim(v, L.dim(), "v");
  Vec p = to_eigen(std::span<const double>(grad_v<double>(L, as_span(q), as_span(v))));
  require_finite(p, "momentum");
  return p;
}

inline Vec dLdq(const LagrangianField& L, const Vec& q, const Vec& v) {
  require_dim(q, L.dim(), "q");
  require_dim(v, L.dim(), "v");
  Vec f = to_eigen(std::span<const double>(grad_q<double>(L, as_span(q), as_span(v))));
  require_finite(f, "dL/dq");
  return f;
}

/// Local form of the Dirac differential: (q, dL/dv, -dL/dq, v).
struct DiracDifferential {
  Vec q;
  Vec p;
  Vec minus_dLdq;
  Vec v;
};

inline DiracDifferential dirac_differential(const LagrangianField& L, const Vec& q, const Vec& v) {
  return {q, legendre(L, q, v), -dLdq(L, q, v), v};
}

/// E(q, v, p) = p.v - L(q, v).
inline double generalized_energy(const LagrangianField& L, const PontryaginState& s) {
  return s.p.dot(s.v) - L(s.q, s.v);
}

/// (omega(q) v, p - dL/dv); s lies on K iff both blocks vanish.
inline std::pair<Vec, Vec> k_residual(const LagrangianField& L, const ConstraintDistribution& D,
                                      const PontryaginState& s) {
  return {D.apply(s.q, s.v), s.p - legendre(L, s.q, s.v)};
}

inline double k_residual_norm(const LagrangianField& L, const ConstraintDistribution& D,
                              const PontryaginState& s) {
  const auto [a, b] = k_residual(L, D, s);
  const double ra = a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
  const double rb = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
  return std::max(ra, rb);
}

/// Orthonormal basis of ker omega(q), n x (n-k).
inline Mat horizontal_basis(const ConstraintDistribution& D, const Vec& q) {
  return kernel_split(D.matrix(q)).kernel;
}

/// Orthonormal basis of span{omega^a(q)}, n x k.
inline Mat annihilator_basis(const ConstraintDistribution& D, const Vec& q) {
  return kernel_split(D.matrix(q)).range;
}

/// Orthogonal projector onto Delta(q).
inline Mat horizontal_projector(const ConstraintDistribution& D, const Vec& q) {
  const Mat H = horizontal_basis(D, q);
  return H * H.transpose();
}

/// Residuals of membership in the induced Dirac structure at (q, p).
struct InducedResidual {
  Vec constraint;  ///< omega(q) qdot
  Vec flow;        ///< alpha_p - qdot
  Vec force;       ///< Delta-component of alpha_q + pdot
  double norm() const {
    double r = 0.0;
    for (const Vec* x : {&constraint, &flow, &force}) {
      if (x->size()) r = std::max(r, x->cwiseAbs().maxCoeff());
    }
    return r;
  }
};

inline InducedResidual induced_dirac_membership(const ConstraintDistribution& D, const Vec& q, const Vec& p,
                                                const Vec& qdot, const Vec& pdot, const Vec& alpha_q,
                                                const Vec& alpha_p) {
  const Eigen::Index n = D.dim();
  for (const Vec* x : {&p, &qdot, &pdot, &alpha_q, &alpha_p}) require_dim(*x, n, "dirac element");
  const Mat H = horizontal_basis(D, q);
  return {D.apply(q, qdot), alpha_p - qdot, H.transpose() * (alpha_q + pdot)};
}

struct PontryaginResidual {
  Vec constraint;  ///< omega(q) qdot
  Vec flow;        ///< alpha_p - qdot
  Vec velocity;    ///< alpha_v
  Vec force;       ///< Delta-component of alpha_q + pdot
  double norm() const {
    double r = 0.0;
    for (const Vec* x : {&constraint, &flow, &velocity, &force}) {
      if (x->size()) r = std::max(r, x->cwiseAbs().maxCoeff());
    }
    return r;
  }
};

inline PontryaginResidual pontryagin_dirac_membership(const ConstraintDistribution& D, const PontryaginState& s,
                                                      const Vec& qdot, const Vec& vdot, const Vec& pdot,
                                                      const Vec& alpha_q, const Vec& alpha_v,
                                                      const Vec& alpha_p) {
  const Eigen::Index n = D.dim();
  for (const Vec* x : {&qdot, &vdot, &pdot, &alpha_q, &alpha_v, &alpha_p}) require_dim(*x, n, "dirac element");
  const Mat H = horizontal_basis(D, s.q);
  return {D.apply(s.q, qdot), alpha_p - qdot, alpha_v, H.transpose() * (alpha_q + pdot)};
}

/// Element ((qdot, pdot), (alpha_q, alpha_p)) of T(T*Q) (+) T*(T*Q).
struct DiracElement {
  Vec qdot;
  Vec pdot;
  Vec alpha_q;
  Vec alpha_p;
};

/// Builds an element of the induced Dirac structure from a horizontal
/// velocity, an arbitrary momentum rate, and a constraint covector eta.
inline DiracElement make_dirac_element(const ConstraintDistribution& D, const Vec& q, const Vec& qdot,
                                       const Vec& pdot, const Vec& eta) {
  if (D.rank() > 0) {
    const Vec r = D.apply(q, qdot);
    if (r.cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, qdot.norm())) {
      throw DomainError("velocity is not in the constraint distribution");
    }
  }
  return {qdot, pdot, -pdot + eta, qdot};
}

/// Symmetric pairing <alpha', X> + <alpha, X'>.
inline double dirac_pairing(const DiracElement& a, const DiracElement& b) {
  return b.alpha_q.dot(a.qdot) + b.alpha_p.dot(a.pdot) + a.alpha_q.dot(b.qdot) + a.alpha_p.dot(b.pdot);
}

// --- inverse Legendre and Hamiltonian ---------------------------------------

/// Velocity Hessian of L at (q, v) in plain doubles.
inline Mat velocity_hessian(const LagrangianField& L, const Vec& q, const Vec& v) {
  const int n = L.dim();
  const auto qs = constant<Dual1>(constant<double>(as_span(q)));
  const auto inner = seed<double>(as_span(v), n);
  std::vector<Dual2> vs;
  vs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) vs.push_back(Dual2::variable(inner[static_cast<std::size_t>(i)], n, i));
  const Dual2 y = L(std::span<const Dual2>(qs), std::span<const Dual2>(vs));
  Mat M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) M(i, j) = y.d(i).d(j);
  }
  return M;
}

/// Solves dL/dv(q, v) = p for v. Newton in doubles followed by one correction
/// in S so that derivatives with respect to (q, p) are exact.
template <class S>
std::vector<S> inverse_legendre(const LagrangianField& L, std::span<const S> q, std::span<const S> p,
                                const Vec* guess = nullptr) {
  const int n = L.dim();
  Vec q0(n);
  Vec p0(n);
  for (int i = 0; i < n; ++i) {
    q0[i] = primal(q[static_cast<std::size_t>(i)]);
    p0[i] = primal(p[static_cast<std::size_t>(i)]);
  }
  Vec v = guess ? *guess : Vec::Zero(n);
  Mat M;
  for (int it = 0; it < 60; ++it) {
    const Vec r = legendre(L, q0, v) - p0;
    M = velocity_hessian(L, q0, v);
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible() || min_singular_value(M) < 1e-12 * std::max(1.0, M.norm())) {
      throw SingularReducedLegendre("Legendre transform is not invertible at this point");
    }
    const Vec dv = lu.solve(r);
    v -= dv;
    if (dv.norm() <= 1e-15 * std::max(1.0, v.norm())) break;
  }
  if constexpr (std::is_same_v<S, double>) {
    return to_std(v);
  } else {
    // One Newton step from the converged point carries the derivatives.
    const auto vS0 = std::vector<S>(v.data(), v.data() + n);
    std::vector<S> r = grad_v<S>(L, q, std::span<const S>(vS0));
    for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] -= p[static_cast<std::size_t>(i)];
    const Mat Minv = M.inverse();
    std::vector<S> out(vS0);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i)] -= Minv(i, j) * r[static_cast<std::size_t>(j)];
    }
    return out;
  }
}

/// H(q, p) = <p, v> - L(q, v) with v the inverse Legendre transform of p.
/// Evaluable at double and Dual1.
class Hamiltonian {
 public:
  explicit Hamiltonian(LagrangianField L) : L_(std::move(L)) {}

  int dim() const { return L_.dim(); }
  const LagrangianField& lagrangian() const { return L_; }

  template <class S>
  S operator()(std::span<const S> q, std::span<const S> p) const {
    const std::vector<S> v = inverse_legendre<S>(L_, q, p);
    S h = -L_(q, std::span<const S>(v));
    for (std::size_t i = 0; i < v.size(); ++i) h += p[i] * v[i];
    return h;
  }
  double operator()(const Vec& q, const Vec& p) const { return (*this)(as_span(q), as_span(p)); }

 private:
  LagrangianField L_;
};

}  // namespace dirac
