#pragma once

/**
 * @file chaplygin.hpp
 * @brief Abelian Chaplygin reduction for translation groups acting on a
 * subset of the coordinates.
 *
 * Coordinates split as q = (s, r) with s the group directions. Solving the
 * constraint forms for ds gives the connection
 *
 *   ds + A(r) dr = 0,   A = Omega_s^{-1} Omega_r,
 *
 * and the horizontal lift of a base velocity rdot is (sdot, rdot) with
 * sdot = -A(r) rdot. On the reduced cotangent bundle the dynamics solve
 * i_X (Omega_bar - Xi) = dH_bar, i.e.
 *
 *   rdot    = dH_bar/dpbar
 *   pbardot = Xi rdot - dH_bar/dr
 *
 * with Xi(Y, Z) = <J(hl^P pbar), B(hl Y, hl Z)>.
 *
 * Composite fields (reduced Lagrangian, lifted sections) are evaluable at one
 * dual layer less than the original Lagrangian.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dirac/autodiff.hpp"
#include "dirac/errors.hpp"
#include "dirac/geometry.hpp"
#include "dirac/hamilton_jacobi.hpp"
#include "dirac/integrator.hpp"
#include "dirac/io.hpp"
#include "dirac/linalg.hpp"

namespace dirac {

class ChaplyginBundle {
 public:
  ChaplyginBundle() = default;
  ChaplyginBundle(LagrangianField L, ConstraintDistribution D, std::vector<int> group)
      : L_(std::move(L)), D_(std::move(D)), group_(std::move(group)) {
    const int n = D_.dim();
    std::vector<bool> is_group(static_cast<std::size_t>(n), false);
    for (int g : group_) {
      if (g < 0 || g >= n || is_group[static_cast<std::size_t>(g)]) throw ShapeError("bad group coordinate index");
      is_group[static_cast<std::size_t>(g)] = true;
    }
    if (static_cast<int>(group_.size()) != D_.rank()) {
      throw NotChaplygin("number of group coordinates must equal the number of constraint forms");
    }
    for (int i = 0; i < n; ++i) {
      if (!is_group[static_cast<std::size_t>(i)]) base_.push_back(i);
    }
  }

  int dim() const { return D_.dim(); }
  int group_dim() const { return static_cast<int>(group_.size()); }
  int base_dim() const { return static_cast<int>(base_.size()); }
  const std::vector<int>& group() const { return group_; }
  const std::vector<int>& base() const { return base_; }
  const LagrangianField& lagrangian() const { return L_; }
  const ConstraintDistribution& constraints() const { return D_; }

  /// Full coordinates from group and base parts.
  template <class S>
  std::vector<S> embed(std::span<const S> s, std::span<const S> r) const {
    std::vector<S> q(static_cast<std::size_t>(dim()));
    for (std::size_t a = 0; a < group_.size(); ++a) q[static_cast<std::size_t>(group_[a])] = s[a];
    for (std::size_t b = 0; b < base_.size(); ++b) q[static_cast<std::size_t>(base_[b])] = r[b];
    return q;
  }
  Vec embed(const Vec& s, const Vec& r) const {
    return to_eigen(std::span<const double>(embed<double>(as_span(s), as_span(r))));
  }
  Vec group_part(const Vec& q) const {
    Vec s(group_dim());
    for (int a = 0; a < group_dim(); ++a) s[a] = q[group_[static_cast<std::size_t>(a)]];
    return s;
  }
  Vec base_part(const Vec& q) const {
    Vec r(base_dim());
    for (int b = 0; b < base_dim(); ++b) r[b] = q[base_[static_cast<std::size_t>(b)]];
    return r;
  }

  /// Connection coefficients A(r), k x (n-k), with the group coordinates at
  /// `s` (zero by default).
  template <class S>
  SmallMatrix<S> connection(std::span<const S> r, std::span<const S> s = {}) const {
    const int k = group_dim();
    const int m = base_dim();
    std::vector<S> s0(static_cast<std::size_t>(k), S(0.0));
    const auto q = embed<S>(s.empty() ? std::span<const S>(s0) : s, r);
    const SmallMatrix<S> w = D_.matrix<S>(std::span<const S>(q));
    SmallMatrix<S> Os(k, k);
    SmallMatrix<S> A(k, m);
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) Os(a, b) = w(a, group_[static_cast<std::size_t>(b)]);
      for (int b = 0; b < m; ++b) A(a, b) = w(a, base_[static_cast<std::size_t>(b)]);
    }
    if (!solve_in_place(Os, A, 1e-12)) throw NotChaplygin("group block of the constraint forms is singular");
    return A;
  }
  Mat connection(const Vec& r) const { return to_eigen(connection<double>(as_span(r))); }

  /// Full velocity (sdot, rdot) with sdot = -A(r) rdot.
  template <class S>
  std::vector<S> lift_velocity(std::span<const S> r, std::span<const S> rdot) const {
    const SmallMatrix<S> A = connection<S>(r);
    std::vector<S> sdot(static_cast<std::size_t>(group_dim()), S(0.0));
    for (int a = 0; a < group_dim(); ++a) {
      for (int b = 0; b < base_dim(); ++b) sdot[static_cast<std::size_t>(a)] -= A(a, b) * rdot[static_cast<std::size_t>(b)];
    }
    return embed<S>(std::span<const S>(sdot), rdot);
  }

  /// n x (n-k) matrix of the horizontal lift at r.
  Mat lift_matrix(const Vec& r) const {
    const Mat A = connection(r);
    Mat Hl = Mat::Zero(dim(), base_dim());
    for (int a = 0; a < group_dim(); ++a) Hl.row(group_[static_cast<std::size_t>(a)]) = -A.row(a);
    for (int b = 0; b < base_dim(); ++b) Hl(base_[static_cast<std::size_t>(b)], b) = 1.0;
    return Hl;
  }

 private:
  LagrangianField L_;
  ConstraintDistribution D_;
  std::vector<int> group_;
  std::vector<int> base_;
};

namespace detail {

inline std::vector<Vec> box_samples(int dim, int count, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) {
    Vec x(dim);
    for (int j = 0; j < dim; ++j) x[j] = u(rng);
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// Builds the bundle and checks invariance of L and of the connection under
/// translations of the group coordinates at `samples` (full coordinates).
inline ChaplyginBundle build_bundle(const LagrangianField& L, const ConstraintDistribution& D,
                                    const std::vector<int>& group, std::vector<Vec> samples = {}) {
  if (L.dim() != D.dim()) throw ShapeError("lagrangian and constraints have different dimensions");
  ChaplyginBundle B(L, D, group);
  const int n = D.dim();
  if (samples.empty()) samples = detail::box_samples(n, 20, 0.2, 1.2, 42);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> shift(-3.0, 3.0);
  double worst = 0.0;
  for (const auto& q : samples) {
    const Vec r = B.base_part(q);
    const Vec s = B.group_part(q);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = shift(rng);
    Vec ds(B.group_dim());
    for (int a = 0; a < B.group_dim(); ++a) ds[a] = shift(rng);
    const Vec q2 = B.embed(Vec(s + ds), r);
    const double l1 = L(q, v);
    const double l2 = L(q2, v);
    worst = std::max(worst, std::abs(l1 - l2) / std::max(1.0, std::abs(l1)));
    if (B.group_dim() > 0) {
      const Mat A1 = to_eigen(B.connection<double>(as_span(r), as_span(s)));
      const Vec s2 = s + ds;
      const Mat A2 = to_eigen(B.connection<double>(as_span(r), as_span(s2)));
      worst = std::max(worst, (A1 - A2).cwiseAbs().maxCoeff() / std::max(1.0, A1.cwiseAbs().maxCoeff()));
    }
  }
  if (worst > 1e-10) throw NotChaplygin("lagrangian or connection depends on the group coordinates");
  return B;
}

/// Full velocity of the horizontal lift of `rdot` at base point r (the group
/// coordinates do not enter).
inline Vec horizontal_lift_delta(const ChaplyginBundle& B, const Vec& r, const Vec& /*s*/, const Vec& rdot) {
  require_dim(r, B.base_dim(), "base point");
  require_dim(rdot, B.base_dim(), "base velocity");
  return to_eigen(std::span<const double>(B.lift_velocity<double>(as_span(r), as_span(rdot))));
}

/// Lbar(r, rdot) = L(q(0, r), hl(rdot)).
inline LagrangianField reduced_lagrangian(const ChaplyginBundle& B) {
  const int m = B.base_dim();
  return LagrangianField(m, [B](auto r, auto rdot) {
    using S = scalar_of<decltype(r)>;
    const std::vector<S> s0(static_cast<std::size_t>(B.group_dim()), S(0.0));
    const auto q = B.embed<S>(std::span<const S>(s0), r);
    const auto v = B.lift_velocity<S>(r, rdot);
    return B.lagrangian()(std::span<const S>(q), std::span<const S>(v));
  });
}

/// Checks that d2Lbar/drdot2 is invertible at the samples (base points,
/// base velocities).
inline double reduced_legendre_condition(const LagrangianField& Lbar, const std::vector<std::pair<Vec, Vec>>& samples) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [r, rdot] : samples) worst = std::min(worst, min_singular_value(velocity_hessian(Lbar, r, rdot)));
  if (!(worst > 1e-10)) throw SingularReducedLegendre("reduced Lagrangian is degenerate");
  return worst;
}

/// Curvature of the connection on two base vectors (the base parts of two
/// horizontal vectors): B^a(Y, Z) = sum (d_b A^a_c - d_c A^a_b) Y^b Z^c.
inline Vec curvature(const ChaplyginBundle& B, const Vec& r, const Vec& Y, const Vec& Z) {
  const int k = B.group_dim();
  const int m = B.base_dim();
  require_dim(r, m, "base point");
  require_dim(Y, m, "Y");
  require_dim(Z, m, "Z");
  Vec out = Vec::Zero(k);
  if (k == 0) return out;
  const Mat J = jacobian(
      [&B](auto x) {
        using S = scalar_of<decltype(x)>;
        return B.connection<S>(x).data;
      },
      r);  // row a*m + c, column b: d A^a_c / d r^b
  for (int a = 0; a < k; ++a) {
    double acc = 0.0;
    for (int b = 0; b < m; ++b) {
      for (int c = 0; c < m; ++c) acc += J(a * m + c, b) * (Y[b] * Z[c] - Y[c] * Z[b]);
    }
    out[a] = acc;
  }
  return out;
}

/// hl^P(pbar) = FL(hl(FLbar^{-1}(pbar))) at any scalar up to Dual1.
template <class S>
std::vector<S> horizontal_lift_P(const ChaplyginBundle& B, const LagrangianField& Lbar, std::span<const S> r,
                                 std::span<const S> s, std::span<const S> pbar) {
  const std::vector<S> rdot = inverse_legendre<S>(Lbar, r, pbar);
  const auto q = B.embed<S>(s, r);
  const auto v = B.lift_velocity<S>(r, std::span<const S>(rdot));
  return grad_v<S>(B.lagrangian(), std::span<const S>(q), std::span<const S>(v));
}

inline Vec horizontal_lift_P(const ChaplyginBundle& B, const LagrangianField& Lbar, const Vec& r, const Vec& s,
                             const Vec& pbar) {
  require_dim(pbar, B.base_dim(), "pbar");
  return to_eigen(std::span<const double>(horizontal_lift_P<double>(B, Lbar, as_span(r), as_span(s), as_span(pbar))));
}

/// Group components of the momentum.
inline Vec momentum_map(const ChaplyginBundle& B, const Vec& /*q*/, const Vec& p) { return B.group_part(p); }

/// Xi(Y, Z) at (r, pbar).
inline double xi_form(const ChaplyginBundle& B, const LagrangianField& Lbar, const Vec& r, const Vec& pbar,
                      const Vec& Y, const Vec& Z) {
  const Vec s = Vec::Zero(B.group_dim());
  const Vec J = momentum_map(B, Vec(), horizontal_lift_P(B, Lbar, r, s, pbar));
  return J.dot(curvature(B, r, Y, Z));
}

/// Matrix Xi(e_a, e_b) at (r, pbar).
inline Mat xi_matrix(const ChaplyginBundle& B, const LagrangianField& Lbar, const Vec& r, const Vec& pbar) {
  const int m = B.base_dim();
  Mat X = Mat::Zero(m, m);
  if (B.group_dim() == 0) return X;
  const Vec s = Vec::Zero(B.group_dim());
  const Vec J = momentum_map(B, Vec(), horizontal_lift_P(B, Lbar, r, s, pbar));
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      const double x = J.dot(curvature(B, r, Vec::Unit(m, a), Vec::Unit(m, b)));
      X(a, b) = x;
      X(b, a) = -x;
    }
  }
  return X;
}

/// Almost-symplectic matrix Omega_bar - Xi in (r, pbar) coordinates.
inline Mat almost_symplectic_matrix(const Mat& Xi) {
  const Eigen::Index m = Xi.rows();
  Mat W = Mat::Zero(2 * m, 2 * m);
  W.topLeftCorner(m, m) = -Xi;
  W.topRightCorner(m, m) = Mat::Identity(m, m);
  W.bottomLeftCorner(m, m) = -Mat::Identity(m, m);
  return W;
}

/// Reduced system: Lbar, Hbar and the Xi evaluator.
class ReducedSystem {
 public:
  ReducedSystem(ChaplyginBundle B) : B_(std::move(B)), Lbar_(reduced_lagrangian(B_)), Hbar_(Lbar_) {}

  const ChaplyginBundle& bundle() const { return B_; }
  const LagrangianField& lagrangian() const { return Lbar_; }
  const Hamiltonian& hamiltonian() const { return Hbar_; }
  int dim() const { return B_.base_dim(); }

  double H(const Vec& r, const Vec& pbar) const { return Hbar_(r, pbar); }
  Mat xi(const Vec& r, const Vec& pbar) const { return xi_matrix(B_, Lbar_, r, pbar); }
  double xi(const Vec& r, const Vec& pbar, const Vec& Y, const Vec& Z) const {
    return xi_form(B_, Lbar_, r, pbar, Y, Z);
  }
  Mat almost_symplectic(const Vec& r, const Vec& pbar) const { return almost_symplectic_matrix(xi(r, pbar)); }

  /// dHbar/dr and dHbar/dpbar.
  std::pair<Vec, Vec> dH(const Vec& r, const Vec& pbar) const {
    const int m = dim();
    Vec x(2 * m);
    x << r, pbar;
    const Vec g = gradient(
        [this, m](auto z) {
          return Hbar_(z.subspan(0, static_cast<std::size_t>(m)), z.subspan(static_cast<std::size_t>(m)));
        },
        x);
    return {g.head(m), g.tail(m)};
  }

  /// Base velocity for a reduced momentum.
  Vec velocity(const Vec& r, const Vec& pbar) const {
    return to_eigen(std::span<const double>(inverse_legendre<double>(Lbar_, as_span(r), as_span(pbar))));
  }
  /// Reduced momentum of a base velocity.
  Vec momentum(const Vec& r, const Vec& rdot) const { return legendre(Lbar_, r, rdot); }

  /// Lifts (r, pbar) to the state (q, v, p) on K with group coordinates s.
  PontryaginState lift_state(const Vec& s, const Vec& r, const Vec& pbar) const {
    const Vec rdot = velocity(r, pbar);
    const Vec q = B_.embed(s, r);
    const Vec v = horizontal_lift_delta(B_, r, s, rdot);
    return {q, v, legendre(B_.lagrangian(), q, v)};
  }

  /// Vector field of i_X (Omega_bar - Xi) = dHbar. With `drop_xi` the
  /// canonical Hamiltonian field.
  Vec field(const Vec& r, const Vec& pbar, bool drop_xi = false) const {
    const int m = dim();
    const auto [dr, dp] = dH(r, pbar);
    const Mat Xi = drop_xi ? Mat::Zero(m, m) : xi(r, pbar);
    const Mat W = almost_symplectic_matrix(Xi);
    if (min_singular_value(W) < 1e-12) throw SingularAlmostSymplectic("almost-symplectic form is degenerate");
    Vec rhs(2 * m);
    rhs << dr, dp;
    return W.transpose().partialPivLu().solve(rhs);
  }

 private:
  ChaplyginBundle B_;
  LagrangianField Lbar_;
  Hamiltonian Hbar_;
};

/// Hbar from a bundle.
inline Hamiltonian reduced_hamiltonian(const ChaplyginBundle& B) { return Hamiltonian(reduced_lagrangian(B)); }

/// E(hl^K(pbar)) - Hbar(pbar) at (r, pbar).
inline double lemma_gap(const ReducedSystem& R, const Vec& r, const Vec& pbar) {
  const Vec s = Vec::Zero(R.bundle().group_dim());
  const PontryaginState z = R.lift_state(s, r, pbar);
  return generalized_energy(R.bundle().lagrangian(), z) - R.H(r, pbar);
}

struct ReducedTrajectory {
  std::vector<double> t;
  std::vector<Vec> r;
  std::vector<Vec> pbar;
  std::vector<Vec> rdot;
  std::vector<Vec> pbardot;
  std::vector<double> energy;  ///< Hbar
  std::vector<int> base;       ///< original coordinate indices of r
  std::size_t size() const { return t.size(); }
};

struct ReducedOptions {
  bool drop_xi = false;
  double blowup_norm = 1e12;
};

/// RK4 on the reduced almost-Hamiltonian system.
inline ReducedTrajectory integrate_reduced(const ReducedSystem& R, const Vec& r0, const Vec& pbar0, double T, double h,
                                           const ReducedOptions& opt = {}) {
  const int m = R.dim();
  require_dim(r0, m, "r0");
  require_dim(pbar0, m, "pbar0");
  if (!(h > 0.0) || !(T >= 0.0)) throw ConfigError("integrate_reduced: need h > 0 and T >= 0");
  const long steps = std::lround(T / h);
  ReducedTrajectory out;
  out.base = R.bundle().base();
  Vec r = r0;
  Vec p = pbar0;
  auto f = [&](const Vec& rr, const Vec& pp) { return R.field(rr, pp, opt.drop_xi); };
  Vec k1 = f(r, p);
  auto record = [&](double t, const Vec& d) {
    out.t.push_back(t);
    out.r.push_back(r);
    out.pbar.push_back(p);
    out.rdot.push_back(d.head(m));
    out.pbardot.push_back(d.tail(m));
    out.energy.push_back(R.H(r, p));
  };
  record(0.0, k1);
  for (long i = 0; i < steps; ++i) {
    const Vec k2 = f(r + 0.5 * h * k1.head(m), p + 0.5 * h * k1.tail(m));
    const Vec k3 = f(r + 0.5 * h * k2.head(m), p + 0.5 * h * k2.tail(m));
    const Vec k4 = f(r + h * k3.head(m), p + h * k3.tail(m));
    const Vec step = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    r += step.head(m);
    p += step.tail(m);
    detail::check_state(r, p, opt.blowup_norm);
    k1 = f(r, p);
    record(static_cast<double>(i + 1) * h, k1);
  }
  return out;
}

/// Integrates sdot = -A(r(t)) rdot(t) along a reduced trajectory (Simpson
/// rule with Hermite midpoints) and lifts every sample to a full state.
inline Trajectory reconstruct(const ReducedSystem& R, const ReducedTrajectory& rt, const Vec& s0) {
  const ChaplyginBundle& B = R.bundle();
  require_dim(s0, B.group_dim(), "s0");
  Trajectory traj;
  traj.k = B.constraints().rank();
  Vec s = s0;
  auto sdot = [&](const Vec& r, const Vec& rdot) { return Vec(-B.connection(r) * rdot); };
  std::optional<SecondaryStructure> sec = SecondaryStructure{Mat(B.dim(), 0)};
  for (std::size_t i = 0; i < rt.size(); ++i) {
    if (i > 0) {
      const double h = rt.t[i] - rt.t[i - 1];
      const Vec& r0 = rt.r[i - 1];
      const Vec& r1 = rt.r[i];
      const Vec& p0 = rt.pbar[i - 1];
      const Vec& p1 = rt.pbar[i];
      const Vec rm = 0.5 * (r0 + r1) + (h / 8.0) * (rt.rdot[i - 1] - rt.rdot[i]);
      const Vec pm = 0.5 * (p0 + p1) + (h / 8.0) * (rt.pbardot[i - 1] - rt.pbardot[i]);
      const Vec vm = R.velocity(rm, pm);
      s += (h / 6.0) * (sdot(r0, rt.rdot[i - 1]) + 4.0 * sdot(rm, vm) + sdot(r1, rt.rdot[i]));
    }
    const Vec q = B.embed(s, rt.r[i]);
    const Vec v = horizontal_lift_delta(B, rt.r[i], s, rt.rdot[i]);
    const DAEAssembly a = assemble(B.lagrangian(), B.constraints(), q, v, &sec);
    const auto sol = a.solve(v);
    traj.t.push_back(rt.t[i]);
    traj.states.push_back({q, v, a.dv});
    traj.lambda.push_back(sol.lambda);
    traj.energy.push_back(a.dv.dot(v) - a.lagrangian);
    traj.constraint_residual.push_back(a.omega.rows() ? (a.omega * v).cwiseAbs().maxCoeff() : 0.0);
  }
  return traj;
}

/// CSV: t, base q, base v, pbar*, energy (Hbar).
inline std::string reduced_csv(const ReducedTrajectory& rt) {
  std::ostringstream os;
  os << "t";
  for (int b : rt.base) os << ",q" << b + 1;
  for (int b : rt.base) os << ",v" << b + 1;
  for (std::size_t i = 1; i <= rt.base.size(); ++i) os << ",pbar" << i;
  os << ",energy\n";
  for (std::size_t i = 0; i < rt.size(); ++i) {
    os << format_double(rt.t[i]);
    for (const Vec* x : {&rt.r[i], &rt.rdot[i], &rt.pbar[i]}) {
      for (Eigen::Index j = 0; j < x->size(); ++j) os << ',' << format_double((*x)[j]);
    }
    os << ',' << format_double(rt.energy[i]) << '\n';
  }
  return os.str();
}

struct ReducedHJCheck {
  double energy_dev = 0.0;
  double form_residual = 0.0;
};

/// max |Hbar o gammabar - E| and max |(d gammabar + gammabar^* Xi)(e_a, e_b)|
/// over base points.
inline ReducedHJCheck reduced_dhj_check(const ReducedSystem& R, const PolyFn<VectorFieldSig>& gammabar,
                                        const std::vector<Vec>& samples, double E) {
  ReducedHJCheck out;
  const int m = R.dim();
  auto g = [&gammabar](auto x) { return gammabar.get<scalar_of<decltype(x)>>()(x); };
  for (const auto& r : samples) {
    const Vec p = to_eigen(std::span<const double>(g(as_span(r))));
    out.energy_dev = std::max(out.energy_dev, std::abs(R.H(r, p) - E));
    const Mat J = jacobian_covector(g, r);
    const Mat Xi = R.xi(r, p);
    for (int a = 0; a < m; ++a) {
      for (int b = a + 1; b < m; ++b) {
        const double dg = J(a, b) - J(b, a);
        out.form_residual = std::max(out.form_residual, std::abs(dg + Xi(a, b)));
      }
    }
  }
  return out;
}

/// Upsilon(q) = (hl(FLbar^{-1}(gammabar(r))), hl^P(gammabar(r))).
inline HJSection lift_reduced_solution(const ReducedSystem& R, const PolyFn<VectorFieldSig>& gammabar) {
  const ChaplyginBundle& B = R.bundle();
  const LagrangianField& Lbar = R.lagrangian();
  auto base_of = [B](auto q) {
    using S = scalar_of<decltype(q)>;
    std::vector<S> r;
    for (int b : B.base()) r.push_back(q[static_cast<std::size_t>(b)]);
    return r;
  };
  auto X = [B, Lbar, gammabar, base_of](auto q) {
    using S = scalar_of<decltype(q)>;
    if constexpr (std::is_same_v<S, Dual2>) {
      throw ShapeError("lifted sections support first derivatives only");
      return std::vector<S>{};
    } else {
      const auto r = base_of(q);
      const auto pbar = gammabar.get<S>()(std::span<const S>(r));
      const auto rdot = inverse_legendre<S>(Lbar, std::span<const S>(r), std::span<const S>(pbar));
      return B.lift_velocity<S>(std::span<const S>(r), std::span<const S>(rdot));
    }
  };
  auto gamma = [B, Lbar, gammabar, base_of](auto q) {
    using S = scalar_of<decltype(q)>;
    if constexpr (std::is_same_v<S, Dual2>) {
      throw ShapeError("lifted sections support first derivatives only");
      return std::vector<S>{};
    } else {
      const auto r = base_of(q);
      std::vector<S> s;
      for (int a : B.group()) s.push_back(q[static_cast<std::size_t>(a)]);
      const auto pbar = gammabar.get<S>()(std::span<const S>(r));
      return horizontal_lift_P<S>(B, Lbar, std::span<const S>(r), std::span<const S>(s), std::span<const S>(pbar));
    }
  };
  return HJSection(B.dim(), X, gamma);
}

// --- consistency of the reduced form ----------------------------------------

/// Tangent vector at z = (s, r, pbar) in the parametrization of P.
struct PTangent {
  Vec ds;
  Vec dr;
  Vec dpbar;
};

struct AppendixSample {
  Vec s;
  Vec r;
  Vec pbar;
  PTangent u;
  PTangent w;
};

struct AppendixReport {
  double max_deviation = 0.0;
  int evaluated = 0;
  int filtered = 0;  ///< samples with a non-horizontal tangent
};

/// Compares the canonical form restricted to P with Omega_bar - Xi on the
/// projected tangents, for horizontal tangent pairs.
inline AppendixReport appendix_consistency(const ReducedSystem& R, const std::vector<AppendixSample>& samples) {
  const ChaplyginBundle& B = R.bundle();
  const int k = B.group_dim();
  const int m = B.base_dim();
  AppendixReport rep;
  for (const auto& z : samples) {
    const Mat A = B.connection(z.r);
    const double hu = (z.u.ds + A * z.u.dr).cwiseAbs().maxCoeff();
    const double hw = (z.w.ds + A * z.w.dr).cwiseAbs().maxCoeff();
    const double scale = 1e-12 * std::max({1.0, z.u.dr.norm(), z.w.dr.norm()});
    if ((k > 0 && hu > scale) || (k > 0 && hw > scale)) {
      ++rep.filtered;
      continue;
    }
    // Tangent map of (s, r, pbar) -> (q, hl^P_q(pbar)).
    Vec x(k + 2 * m);
    x << z.s, z.r, z.pbar;
    const Mat Jp = jacobian(
        [&R, &B, k, m](auto y) {
          using S = scalar_of<decltype(y)>;
          return horizontal_lift_P<S>(B, R.lagrangian(), y.subspan(static_cast<std::size_t>(k), static_cast<std::size_t>(m)),
                                      y.subspan(0, static_cast<std::size_t>(k)),
                                      y.subspan(static_cast<std::size_t>(k + m)));
        },
        x);
    auto push = [&](const PTangent& t) {
      Vec dx(k + 2 * m);
      dx << t.ds, t.dr, t.dpbar;
      const Vec dq = B.embed(t.ds, t.dr);
      const Vec dp = Jp * dx;
      return std::pair<Vec, Vec>(dq, dp);
    };
    const auto [dqu, dpu] = push(z.u);
    const auto [dqw, dpw] = push(z.w);
    const double canonical = dqu.dot(dpw) - dpu.dot(dqw);
    const double reduced = z.u.dr.dot(z.w.dpbar) - z.u.dpbar.dot(z.w.dr) - R.xi(z.r, z.pbar, z.u.dr, z.w.dr);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(canonical - reduced));
    ++rep.evaluated;
  }
  return rep;
}

/// Random horizontal tangent pairs at base points drawn from `base_points`.
inline std::vector<AppendixSample> appendix_samples(const ReducedSystem& R, const std::vector<Vec>& base_points,
                                                    std::uint64_t seed) {
  const ChaplyginBundle& B = R.bundle();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rand_vec = [&](int d) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = u(rng);
    return x;
  };
  std::vector<AppendixSample> out;
  for (const auto& r : base_points) {
    AppendixSample z;
    z.s = rand_vec(B.group_dim());
    z.r = r;
    z.pbar = rand_vec(B.base_dim());
    const Mat A = B.connection(r);
    for (PTangent* t : {&z.u, &z.w}) {
      t->dr = rand_vec(B.base_dim());
      t->ds = -A * t->dr;
      t->dpbar = rand_vec(B.base_dim());
    }
    out.push_back(z);
  }
  return out;
}

}  // namespace dirac
