#pragma once

/**
 * @file hamilton_jacobi.hpp
 * @brief Checks and flows for candidate Dirac-Hamilton-Jacobi sections
 * Upsilon(q) = (X(q), gamma(q)).
 *
 * The engine does not solve the PDE. It verifies a supplied section:
 *
 *  - Upsilon(q) lies on K (X horizontal, gamma = dL/dv(q, X)),
 *  - d gamma vanishes on pairs of horizontal vectors,
 *  - d(E o Upsilon) annihilates the distribution,
 *
 * and compares the flow qdot = X(q) with the DAE integrator.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dirac/autodiff.hpp"
#include "dirac/geometry.hpp"
#include "dirac/integrator.hpp"
#include "dirac/io.hpp"

namespace dirac {

/// Pair of a vector field and a one-form on R^n.
class HJSection {
 public:
  HJSection() = default;
  template <class FX, class FG>
  HJSection(int n, FX X, FG gamma) : n_(n), X_(std::move(X)), gamma_(std::move(gamma)) {}

  int dim() const { return n_; }

  template <class S>
  std::vector<S> vector_field(std::span<const S> q) const {
    return X_.get<S>()(q);
  }
  template <class S>
  std::vector<S> covector(std::span<const S> q) const {
    return gamma_.get<S>()(q);
  }
  Vec vector_field(const Vec& q) const {
    require_dim(q, n_, "section q");
    Vec x = to_eigen(std::span<const double>(X_.get<double>()(as_span(q))));
    require_finite(x, "section vector field");
    return x;
  }
  Vec covector(const Vec& q) const {
    require_dim(q, n_, "section q");
    Vec g = to_eigen(std::span<const double>(gamma_.get<double>()(as_span(q))));
    require_finite(g, "section one-form");
    return g;
  }
  PontryaginState lift(const Vec& q) const { return {q, vector_field(q), covector(q)}; }

  /// Callable form of gamma for the autodiff drivers.
  auto covector_fn() const {
    return [this](auto x) { return covector<scalar_of<decltype(x)>>(x); };
  }

 private:
  int n_ = 0;
  PolyFn<VectorFieldSig> X_;
  PolyFn<VectorFieldSig> gamma_;
};

/// max over samples of the K-residual of (q, X(q), gamma(q)).
inline double check_in_K(const HJSection& U, const LagrangianField& L, const ConstraintDistribution& D,
                         const std::vector<Vec>& samples) {
  double r = 0.0;
  for (const auto& q : samples) r = std::max(r, k_residual_norm(L, D, U.lift(q)));
  return r;
}

/// max |d gamma(u, w)| over pairs of horizontal basis vectors.
template <class F>
double closedness_on_delta(F&& gamma, const ConstraintDistribution& D, const std::vector<Vec>& samples) {
  double r = 0.0;
  for (const auto& q : samples) {
    const Mat H = horizontal_basis(D, q);
    const Mat J = jacobian_covector(gamma, q);
    const Mat curl = H.transpose() * (J - J.transpose()) * H;
    if (curl.size()) r = std::max(r, curl.cwiseAbs().maxCoeff());
  }
  return r;
}

inline double check_closedness_on_delta(const HJSection& U, const ConstraintDistribution& D,
                                        const std::vector<Vec>& samples) {
  return closedness_on_delta(U.covector_fn(), D, samples);
}

/// Generalized energy along the section, E(q, X(q), gamma(q)), at any scalar.
template <class S>
S section_energy(const HJSection& U, const LagrangianField& L, std::span<const S> q) {
  const std::vector<S> X = U.vector_field<S>(q);
  const std::vector<S> g = U.covector<S>(q);
  S e = -L(q, std::span<const S>(X));
  for (std::size_t i = 0; i < X.size(); ++i) e += g[i] * X[i];
  return e;
}

/// Pairings of d(E o Upsilon)(q) with the horizontal basis (or `basis`, if
/// given). Empty when the distribution is zero.
inline Vec dhj_residual(const HJSection& U, const LagrangianField& L, const ConstraintDistribution& D, const Vec& q,
                        const Mat* basis = nullptr) {
  const Vec g = gradient([&](auto x) { return section_energy<scalar_of<decltype(x)>>(U, L, x); }, q);
  const Mat H = basis ? *basis : horizontal_basis(D, q);
  return H.transpose() * g;
}

inline double max_dhj_residual(const HJSection& U, const LagrangianField& L, const ConstraintDistribution& D,
                               const std::vector<Vec>& samples) {
  double r = 0.0;
  for (const auto& q : samples) {
    const Vec d = dhj_residual(U, L, D, q);
    if (d.size()) r = std::max(r, d.cwiseAbs().maxCoeff());
  }
  return r;
}

struct EnergyStats {
  double mean = 0.0;
  double max_dev = 0.0;
};

inline EnergyStats energy_stats(const std::vector<double>& values) {
  EnergyStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.max_dev = std::max(s.max_dev, std::abs(v - s.mean));
  return s;
}

/// Mean and spread of E o Upsilon over the samples.
inline EnergyStats dhj_energy_constancy(const HJSection& U, const LagrangianField& L, const std::vector<Vec>& samples) {
  std::vector<double> e;
  e.reserve(samples.size());
  for (const auto& q : samples) e.push_back(generalized_energy(L, U.lift(q)));
  return energy_stats(e);
}

/// RK4 on qdot = X(q); every state is lifted through the section. If L (and
/// D) are given the energy and constraint residual columns are filled in.
inline Trajectory integrate_hj_flow(const HJSection& U, const Vec& q0, double T, double h,
                                    const LagrangianField* L = nullptr, const ConstraintDistribution* D = nullptr,
                                    double blowup_norm = 1e12) {
  if (!(h > 0.0) || !(T >= 0.0)) throw ConfigError("integrate_hj_flow: need h > 0 and T >= 0");
  const long steps = std::lround(T / h);
  Trajectory traj;
  traj.k = 0;
  Vec q = q0;
  auto record = [&](double t) {
    PontryaginState s = U.lift(q);
    traj.t.push_back(t);
    traj.energy.push_back(L ? generalized_energy(*L, s) : 0.0);
    traj.constraint_residual.push_back(D && D->rank() ? D->apply(q, s.v).cwiseAbs().maxCoeff() : 0.0);
    traj.lambda.emplace_back();
    traj.states.push_back(std::move(s));
  };
  record(0.0);
  for (long i = 0; i < steps; ++i) {
    const Vec k1 = traj.states.back().v;
    const Vec k2 = U.vector_field(Vec(q + 0.5 * h * k1));
    const Vec k3 = U.vector_field(Vec(q + 0.5 * h * k2));
    const Vec k4 = U.vector_field(Vec(q + h * k3));
    q += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::check_state(q, Vec::Zero(1), blowup_norm);
    record(static_cast<double>(i + 1) * h);
  }
  return traj;
}

/// Sup-norm gap between two trajectories on the same grid, over q, v and p.
inline double trajectory_gap(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) throw ShapeError("trajectories have different lengths");
  double gap = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.states[i];
    const auto& y = b.states[i];
    gap = std::max({gap, (x.q - y.q).cwiseAbs().maxCoeff(), (x.v - y.v).cwiseAbs().maxCoeff(),
                    (x.p - y.p).cwiseAbs().maxCoeff()});
  }
  return gap;
}

/// Flows the section and runs the DAE from the lifted initial state; returns
/// the sup-norm gap.
inline double crosscheck_hj_vs_direct(const HJSection& U, const LagrangianField& L, const ConstraintDistribution& D,
                                      const Vec& q0, double T, double h) {
  const Trajectory hj = integrate_hj_flow(U, q0, T, h, &L, &D);
  const Trajectory direct = integrate(L, D, q0, U.vector_field(q0), T, h);
  return trajectory_gap(hj, direct);
}

struct HolonomicCheck {
  double energy_dev = 0.0;
  double closedness = 0.0;
};

/// Energy constancy of E o Upsilon o iota and the pulled-back d gamma on the
/// leaf, at leaf coordinates `samples`.
inline HolonomicCheck holonomic_check(const HJSection& U, const LagrangianField& L, const HolonomicLeaf& S,
                                      const std::vector<Vec>& samples) {
  std::vector<double> e;
  HolonomicCheck out;
  for (const auto& s : samples) {
    const Vec q = S(s);
    e.push_back(generalized_energy(L, U.lift(q)));
    const Mat T = S.tangent(s);
    const Mat J = jacobian_covector(U.covector_fn(), q);
    const Mat pulled = T.transpose() * (J - J.transpose()) * T;
    if (pulled.size()) out.closedness = std::max(out.closedness, pulled.cwiseAbs().maxCoeff());
  }
  out.energy_dev = energy_stats(e).max_dev;
  return out;
}

struct NonholonomicHJCheck {
  double residual = 0.0;  ///< max horizontal pairing of d(H o gamma)
  EnergyStats energy;     ///< spread of H o gamma
};

/// Horizontal pairings of d(H o gamma) for a non-degenerate Lagrangian.
inline Vec nonholonomic_hj_residual(const PolyFn<VectorFieldSig>& gamma, const Hamiltonian& H,
                                    const ConstraintDistribution& D, const Vec& q) {
  const Vec g = gradient(
      [&](auto x) {
        using S = scalar_of<decltype(x)>;
        const std::vector<S> p = gamma.get<S>()(x);
        return H(x, std::span<const S>(p));
      },
      q);
  return horizontal_basis(D, q).transpose() * g;
}

inline NonholonomicHJCheck nonholonomic_hj_check(const PolyFn<VectorFieldSig>& gamma, const Hamiltonian& H,
                                                 const ConstraintDistribution& D, const std::vector<Vec>& samples) {
  NonholonomicHJCheck out;
  std::vector<double> e;
  for (const auto& q : samples) {
    const Vec r = nonholonomic_hj_residual(gamma, H, D, q);
    if (r.size()) out.residual = std::max(out.residual, r.cwiseAbs().maxCoeff());
    const Vec p = to_eigen(std::span<const double>(gamma.get<double>()(as_span(q))));
    e.push_back(H(q, p));
  }
  out.energy = energy_stats(e);
  return out;
}

/// True when d2L/dv2 vanishes (inf-norm below 1e-12) at every (q, v) sample:
/// the Lagrangian is linear in velocity and E o Upsilon = E only fixes a
/// level set of h(q).
inline bool linear_velocity_diagnostic(const LagrangianField& L, const std::vector<std::pair<Vec, Vec>>& samples) {
  for (const auto& [q, v] : samples) {
    const Mat M = velocity_hessian(L, q, v);
    if (M.cwiseAbs().maxCoeff() >= 1e-12) return false;
  }
  return !samples.empty();
}

// --- bracket generation ------------------------------------------------------

namespace detail {

/// Orthogonal projector onto ker omega(q) at any scalar.
template <class S>
SmallMatrix<S> projector(const ConstraintDistribution& D, std::span<const S> q) {
  const int n = D.dim();
  const int k = D.rank();
  SmallMatrix<S> P(n, n);
  for (int i = 0; i < n; ++i) P(i, i) = S(1.0);
  if (k == 0) return P;
  const SmallMatrix<S> w = D.matrix<S>(q);
  SmallMatrix<S> G(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      S acc(0.0);
      for (int i = 0; i < n; ++i) acc += w(a, i) * w(b, i);
      G(a, b) = acc;
    }
  }
  SmallMatrix<S> B = w;  // k x n
  if (!solve_in_place(G, B)) throw RankError("constraint matrix lost rank");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      S acc(0.0);
      for (int a = 0; a < k; ++a) acc += w(a, i) * B(a, j);
      P(i, j) -= acc;
    }
  }
  return P;
}

using Field = std::function<Vec(const Vec&)>;

inline Mat fd_jacobian(const Field& f, const Vec& q, double eps = 1e-5) {
  const Vec f0 = f(q);
  Mat J(f0.size(), q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    Vec qp = q;
    Vec qm = q;
    qp[j] += eps;
    qm[j] -= eps;
    J.col(j) = (f(qp) - f(qm)) / (2.0 * eps);
  }
  return J;
}

inline int numerical_rank(const Mat& A, double rel_tol) {
  if (A.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > rel_tol * s[0]) ++r;
  }
  return r;
}

}  // namespace detail

struct BracketReport {
  bool saturated = false;  ///< brackets span R^n at every sample
  int depth = 0;           ///< deepest bracket level needed
  int min_rank = 0;        ///< smallest final rank over samples
};

/// Iterated Lie brackets of the projected coordinate frame. Level one uses
/// exact Jacobians; deeper levels use central differences.
inline BracketReport bracket_generating(const ConstraintDistribution& D, const std::vector<Vec>& samples,
                                        int max_depth = -1) {
  const int n = D.dim();
  if (max_depth < 0) max_depth = n;
  BracketReport rep;
  rep.saturated = !samples.empty();
  rep.min_rank = n;
  std::vector<detail::Field> level0;
  for (int i = 0; i < n; ++i) {
    level0.push_back([&D, i, n](const Vec& q) {
      const auto P = detail::projector<double>(D, as_span(q));
      Vec c(n);
      for (int r = 0; r < n; ++r) c[r] = P(r, i);
      return c;
    });
  }
  auto exact_jac = [&D, n](int i, const Vec& q) {
    return jacobian(
        [&D, i, n](auto x) {
          using S = scalar_of<decltype(x)>;
          const auto P = detail::projector<S>(D, x);
          std::vector<S> c(static_cast<std::size_t>(n));
          for (int r = 0; r < n; ++r) c[static_cast<std::size_t>(r)] = P(r, i);
          return c;
        },
        q);
  };
  for (const auto& q0 : samples) {
    std::vector<detail::Field> all = level0;
    std::vector<detail::Field> frontier = level0;
    auto span_rank = [&](const Vec& q) {
      Mat A(n, static_cast<Eigen::Index>(all.size()));
      for (std::size_t c = 0; c < all.size(); ++c) A.col(static_cast<Eigen::Index>(c)) = all[c](q);
      return detail::numerical_rank(A, 1e-6);
    };
    int rank = span_rank(q0);
    int depth = 0;
    while (rank < n && depth < max_depth) {
      ++depth;
      std::vector<detail::Field> next;
      for (std::size_t a = 0; a < level0.size(); ++a) {
        for (std::size_t b = 0; b < frontier.size(); ++b) {
          if (depth == 1 && b <= a) continue;
          detail::Field X = level0[a];
          detail::Field Y = frontier[b];
          if (depth == 1) {
            const int ia = static_cast<int>(a);
            const int ib = static_cast<int>(b);
            next.push_back([=](const Vec& q) { return Vec(exact_jac(ib, q) * X(q) - exact_jac(ia, q) * Y(q)); });
          } else {
            next.push_back([=](const Vec& q) {
              return Vec(detail::fd_jacobian(Y, q) * X(q) - detail::fd_jacobian(X, q) * Y(q));
            });
          }
        }
      }
      all.insert(all.end(), next.begin(), next.end());
      frontier = std::move(next);
      const int r2 = span_rank(q0);
      if (r2 == rank && depth > 1) break;
      rank = r2;
    }
    rep.depth = std::max(rep.depth, depth);
    rep.min_rank = std::min(rep.min_rank, rank);
    if (rank < n) rep.saturated = false;
  }
  return rep;
}

// --- report ------------------------------------------------------------------

/// Key-value verification report.
struct HJReport {
  double in_K_residual = 0.0;
  double dgamma_residual = 0.0;
  double dhj_residual = 0.0;
  double energy_mean = 0.0;
  double energy_dev = 0.0;
  double crosscheck_dev = 0.0;
  std::vector<std::string> failed;

  std::string to_text() const {
    std::ostringstream os;
    os << "in_K_residual = " << format_double(in_K_residual) << '\n'
       << "dgamma_residual = " << format_double(dgamma_residual) << '\n'
       << "dhj_residual = " << format_double(dhj_residual) << '\n'
       << "energy_mean = " << format_double(energy_mean) << '\n'
       << "energy_dev = " << format_double(energy_dev) << '\n'
       << "crosscheck_dev = " << format_double(crosscheck_dev) << '\n';
    os << "failed = ";
    for (std::size_t i = 0; i < failed.size(); ++i) os << (i ? "," : "") << failed[i];
    os << '\n';
    return os.str();
  }
};

}  // namespace dirac
