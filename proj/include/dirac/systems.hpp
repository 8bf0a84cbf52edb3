#pragma once

/**
 * @file systems.hpp
 * @brief Built-in mechanical and electrical systems with closed-form
 * reference data: roller racer, bicycle, LC circuit and a few toys.
 *
 * Coordinates:
 *   roller racer  (x, y, theta, phi)
 *   bicycle       (x, y, theta, phi, psi)
 *   LC circuit    (q_l, q_c1, q_c2, q_c3)
 */

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dirac/autodiff.hpp"
#include "dirac/errors.hpp"
#include "dirac/geometry.hpp"
#include "dirac/hamilton_jacobi.hpp"

namespace dirac {

/// A system ready for simulation.
struct System {
  std::string name;
  LagrangianField lagrangian;
  ConstraintDistribution constraints;
  std::vector<int> group;  ///< group coordinates when the system is Chaplygin
  HolonomicLeaf leaf;      ///< set for holonomic systems
};

namespace detail {

inline void require_positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(what) + " must be positive");
}

}  // namespace detail

// --- roller racer -------------------------------------------------------------

struct RollerRacerParams {
  double m1 = 1.0;
  double I1 = 1.0;
  double d1 = 1.0;
  double d2 = 1.0;

  void validate() const {
    detail::require_positive(m1, "m1");
    detail::require_positive(I1, "I1");
    detail::require_positive(d1, "d1");
    detail::require_positive(d2, "d2");
  }
};

inline System make_roller_racer(const RollerRacerParams& p = {}) {
  p.validate();
  System sys;
  sys.name = "roller-racer";
  sys.lagrangian = LagrangianField(4, [p](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * p.m1 * (v[0] * v[0] + v[1] * v[1]) + 0.5 * p.I1 * v[2] * v[2];
    return l;
  });
  sys.constraints = ConstraintDistribution(4, 2, [p](auto q) {
    using S = scalar_of<decltype(q)>;
    using std::cos;
    using std::sin;
    const S csc = 1.0 / sin(q[3]);
    const S a_theta = csc * (p.d1 * cos(q[3]) + p.d2);
    const S a_phi = csc * p.d2;
    const S c = cos(q[2]);
    const S s = sin(q[2]);
    return std::vector<S>{S(1.0), S(0.0), -c * a_theta, -c * a_phi, S(0.0), S(1.0), -s * a_theta, -s * a_phi};
  });
  sys.group = {0, 1};
  return sys;
}

enum class RollerRacerVariant {
  exact,
  scale_phi,       ///< phi component scaled, translations left unchanged
  scale_theta,     ///< theta component scaled
  scale_gamma,     ///< one-form scaled
  scale_x,         ///< x component scaled
  shift_phi,       ///< constant added to the phi component, rest kept consistent
};

/// Data of the separable HJ solution: energy E, constant steering rate
/// v_theta and the sign of the square root.
struct RollerRacerHJ {
  RollerRacerParams params;
  double E = 1.0;
  double v_theta = 0.5;
  int branch = 1;
  RollerRacerVariant variant = RollerRacerVariant::exact;
  double eps = 0.0;

  double v_r() const {
    const double x = (2.0 * E - params.I1 * v_theta * v_theta) / params.m1;
    if (!(x >= 0.0)) throw ConfigError("roller racer: need 2E >= I1 v_theta^2");
    return std::sqrt(x);
  }
  /// Closed-form steering rate along the solution.
  double phi_rate(double phi) const {
    return -v_theta * (1.0 + params.d1 / params.d2 * std::cos(phi)) + branch * v_r() / params.d2 * std::sin(phi);
  }
  /// C = d2 sqrt(m1 (2E - I1 v_theta^2)).
  double C() const { return params.d2 * params.m1 * v_r(); }

  HJSection section() const {
    const RollerRacerParams p = params;
    const double vr = branch * v_r();
    const double vt = v_theta;
    const RollerRacerVariant var = variant;
    const double e = eps;
    // Consistent fields; the scaled variants break them afterwards.
    auto base = [p, vr, vt, var, e](auto q) {
      using S = scalar_of<decltype(q)>;
      using std::cos;
      using std::sin;
      S xphi = -vt * (1.0 + p.d1 / p.d2 * cos(q[3])) + vr / p.d2 * sin(q[3]);
      if (var == RollerRacerVariant::shift_phi) xphi = xphi + e;
      const S rate = ((p.d1 * cos(q[3]) + p.d2) * vt + p.d2 * xphi) / sin(q[3]);
      return std::vector<S>{cos(q[2]) * rate, sin(q[2]) * rate, S(vt), xphi};
    };
    auto X = [base, var, e](auto q) {
      auto x = base(q);
      if (var == RollerRacerVariant::scale_x) x[0] = x[0] * (1.0 + e);
      if (var == RollerRacerVariant::scale_theta) x[2] = x[2] * (1.0 + e);
      if (var == RollerRacerVariant::scale_phi) x[3] = x[3] * (1.0 + e);
      return x;
    };
    auto gamma = [p, base, var, e](auto q) {
      using S = scalar_of<decltype(q)>;
      const auto x = base(q);
      const double k = var == RollerRacerVariant::scale_gamma ? 1.0 + e : 1.0;
      return std::vector<S>{k * p.m1 * x[0], k * p.m1 * x[1], k * p.I1 * x[2], S(0.0)};
    };
    return HJSection(4, X, gamma);
  }

  /// Reduced one-form on (theta, phi):
  /// (C (1 + d1/d2 cos phi) csc phi + I1 v_theta, C csc phi), signed by the branch.
  PolyFn<VectorFieldSig> reduced_gamma(double C_override = std::numeric_limits<double>::quiet_NaN()) const {
    const double C = branch * (std::isnan(C_override) ? this->C() : C_override);
    const RollerRacerParams p = params;
    const double pt = p.I1 * v_theta;
    return PolyFn<VectorFieldSig>([p, C, pt](auto r) {
      using S = scalar_of<decltype(r)>;
      using std::cos;
      using std::sin;
      const S csc = 1.0 / sin(r[1]);
      return std::vector<S>{C * (1.0 + p.d1 / p.d2 * cos(r[1])) * csc + pt, C * csc};
    });
  }

  /// Configuration on the x-y origin with the given angles.
  Vec initial_q(double theta, double phi) const {
    Vec q(4);
    q << 0.0, 0.0, theta, phi;
    return q;
  }
};

/// Uniform samples of (x, y, theta, phi) with phi kept away from 0 and pi.
inline std::vector<Vec> roller_racer_samples(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> theta(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> phi(0.3, std::numbers::pi - 0.3);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Vec q(4);
    q[0] = pos(rng);
    q[1] = pos(rng);
    q[2] = theta(rng);
    q[3] = phi(rng);
    out.push_back(q);
  }
  return out;
}

/// Roller racer energy on K in terms of the steering rates.
inline double roller_racer_energy(const RollerRacerParams& p, double phi, double v_theta, double v_phi) {
  const double csc = 1.0 / std::sin(phi);
  const double b = (p.d1 * std::cos(phi) + p.d2) * v_theta + p.d2 * v_phi;
  return 0.5 * p.m1 * csc * csc * b * b + 0.5 * p.I1 * v_theta * v_theta;
}

// --- bicycle ------------------------------------------------------------------

struct BicycleParams {
  double m = 1.0;
  double a = 1.0;
  double b = 1.0;
  double c = 1.0;
  double g = 9.81;
  double J0 = 1.0;
  /// Use sin^2(psi) in place of sin(psi) in the a^2 psidot^2 term.
  bool corrected = false;
  /// Steering inertia as a function of (phi, psi); constant J0 when empty.
  PolyFn<ScalarFieldSig> J;

  void validate() const {
    detail::require_positive(m, "m");
    detail::require_positive(a, "a");
    detail::require_positive(b, "b");
    if (!std::isfinite(c) || !std::isfinite(g)) throw ConfigError("bicycle: c and g must be finite");
    if (!J) detail::require_positive(J0, "J0");
  }
};

inline System make_bicycle(const BicycleParams& p = {}) {
  p.validate();
  System sys;
  sys.name = "bicycle";
  sys.lagrangian = LagrangianField(5, [p](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    using std::cos;
    using std::sin;
    const S ct = cos(q[2]);
    const S st = sin(q[2]);
    const S sp = sin(q[4]);
    const S cp = cos(q[4]);
    const S u1 = ct * v[0] + st * v[1] + p.a * sp * v[2];
    const S u2 = st * v[0] - ct * v[1] + p.a * cp * v[4] - p.c * v[2];
    const S w = p.corrected ? sp * sp : sp;
    S J = S(p.J0);
    if (p.J) {
      const std::vector<S> arg{q[3], q[4]};
      J = p.J.get<S>()(std::span<const S>(arg));
    }
    S l = 0.5 * p.m * (u1 * u1 + u2 * u2 + p.a * p.a * w * v[4] * v[4]) + 0.5 * J * v[3] * v[3] - p.m * p.g * p.a * cp;
    return l;
  });
  // The rolling constraint carries the heading rate; see README.
  sys.constraints = ConstraintDistribution(5, 2, [](auto q) {
    using S = scalar_of<decltype(q)>;
    using std::cos;
    using std::sin;
    const S ct = cos(q[2]);
    const S st = sin(q[2]);
    return std::vector<S>{q[3] * ct, q[3] * st, S(-1.0), S(0.0), S(0.0), st, -ct, S(0.0), S(0.0), S(0.0)};
  });
  sys.group = {0, 1};
  return sys;
}

/// Default bicycle start: heading rate 0.3, steering 0.8, lean pi - 0.1.
/// The lean stays well below the point where the default (sin psi) reduced metric
/// degenerates (sin psi = -cos^2 psi, psi near 3.81).
inline std::pair<Vec, Vec> bicycle_initial_state() {
  Vec q(5);
  q << 0.0, 0.0, 0.0, 0.8, std::numbers::pi - 0.1;
  const double theta_dot = 0.3;
  Vec v(5);
  v << theta_dot / q[3], 0.0, theta_dot, 0.1, 0.1;
  return {q, v};
}

// --- LC circuit ---------------------------------------------------------------

struct LCCircuitParams {
  double ell = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  double a0 = 0.0;
  double a1 = 0.0;

  void validate() const {
    detail::require_positive(ell, "ell");
    detail::require_positive(c1, "c1");
    detail::require_positive(c2, "c2");
    detail::require_positive(c3, "c3");
  }
  /// Angular frequency of the inductor charge.
  double nu() const { return std::sqrt((c1 + c2 + c3) / (c2 * (c1 + c3) * ell)); }
  /// q_c1 / q_l on the invariant leaf.
  double ratio() const { return c1 / (c1 + c3); }
};

inline System make_lc_circuit(const LCCircuitParams& p = {}) {
  p.validate();
  System sys;
  sys.name = "lc-circuit";
  sys.lagrangian = LagrangianField(4, [p](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * p.ell * v[0] * v[0] - 0.5 * q[1] * q[1] / p.c1 - 0.5 * q[2] * q[2] / p.c2 - 0.5 * q[3] * q[3] / p.c3;
    return l;
  });
  sys.constraints = ConstraintDistribution(4, 2, [](auto q) {
    using S = scalar_of<decltype(q)>;
    return std::vector<S>{S(-1.0), S(0.0), S(1.0), S(0.0), S(0.0), S(1.0), S(-1.0), S(1.0)};
  });
  sys.leaf = HolonomicLeaf(2, 4, [p](auto s) {
    using S = scalar_of<decltype(s)>;
    const S qc2 = s[0] - p.a0;
    return std::vector<S>{s[0], s[1], qc2, qc2 - s[1] - p.a1};
  });
  return sys;
}

/// Holonomic HJ solution of the LC circuit at energy E.
struct LCCircuitHJ {
  LCCircuitParams params;
  double E = 0.5;
  int branch = 1;
  double eps = 0.0;  ///< additive perturbation of the inductor current

  double amplitude() const { return std::sqrt(2.0 * E / (params.ell * params.nu() * params.nu())); }
  /// q_l(t) = A sin(nu t + alpha).
  double charge(double t, double alpha) const { return amplitude() * std::sin(params.nu() * t + alpha); }

  HJSection section() const {
    const LCCircuitParams p = params;
    const double k = p.ell * p.nu() * p.nu();
    const double E0 = E;
    const int sgn = branch;
    const double e = eps;
    auto current = [p, k, E0, sgn, e](auto ql) {
      using std::sqrt;
      return sgn * sqrt((2.0 * E0 - k * ql * ql) / p.ell) + e;
    };
    auto X = [p, current](auto q) {
      using S = scalar_of<decltype(q)>;
      const S x = current(q[0]);
      return std::vector<S>{x, p.ratio() * x, x, (1.0 - p.ratio()) * x};
    };
    auto gamma = [p, current](auto q) {
      using S = scalar_of<decltype(q)>;
      return std::vector<S>{p.ell * current(q[0]), S(0.0), S(0.0), S(0.0)};
    };
    return HJSection(4, X, gamma);
  }

  /// Point on the invariant leaf with q_l = A sin(alpha).
  Vec initial_q(double alpha) const {
    const double ql = amplitude() * std::sin(alpha);
    Vec q(4);
    q << ql, params.ratio() * ql, ql - params.a0, ql - params.a0 - params.ratio() * ql - params.a1;
    return q;
  }
  /// Leaf coordinates (q_l, q_c1) on the relation q_c1 = ratio q_l.
  Vec leaf_point(double ql) const {
    Vec s(2);
    s << ql, params.ratio() * ql;
    return s;
  }
};

/// Leaf coordinates on the invariant relation with |q_l| below 95% of the
/// amplitude.
inline std::vector<Vec> lc_leaf_samples(const LCCircuitHJ& hj, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double A = 0.95 * hj.amplitude();
  std::uniform_real_distribution<double> u(-A, A);
  std::vector<Vec> out;
  for (int i = 0; i < count; ++i) out.push_back(hj.leaf_point(u(rng)));
  return out;
}

/// Start of the LC simulation: zero charges, inductor current sqrt(2E/ell).
inline std::pair<Vec, Vec> lc_initial_state(const LCCircuitParams& p, double E, double alpha) {
  const LCCircuitHJ hj{p, E};
  const Vec q = hj.initial_q(alpha);
  const double f = std::sqrt(2.0 * E / p.ell) * std::cos(alpha);
  Vec v(4);
  v << f, p.ratio() * f, f, (1.0 - p.ratio()) * f;
  return {q, v};
}

// --- toys ---------------------------------------------------------------------

/// L = m/2 |v|^2 without constraints.
inline System make_free_particle(int n = 2, double m = 1.0) {
  detail::require_positive(m, "m");
  System sys;
  sys.name = "free-particle";
  sys.lagrangian = LagrangianField(n, [m](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = S(0.0);
    for (std::size_t i = 0; i < v.size(); ++i) l += 0.5 * m * v[i] * v[i];
    return l;
  });
  sys.constraints = ConstraintDistribution::none(n);
  return sys;
}

/// L = (x ydot - y xdot)/2 - (x^2 + y^2)/2: linear in the velocities.
inline System make_linear_velocity_toy() {
  System sys;
  sys.name = "linear-velocity";
  sys.lagrangian = LagrangianField(2, [](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * (q[0] * v[1] - q[1] * v[0]) - 0.5 * (q[0] * q[0] + q[1] * q[1]);
    return l;
  });
  sys.constraints = ConstraintDistribution::none(2);
  return sys;
}

/// L = |v|^2/2 with the constraint dx2 - x1 dx1.
inline System make_nonholonomic_toy() {
  System sys;
  sys.name = "nonholonomic-toy";
  sys.lagrangian = LagrangianField(2, [](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * (v[0] * v[0] + v[1] * v[1]);
    return l;
  });
  sys.constraints = ConstraintDistribution(2, 1, [](auto q) {
    using S = scalar_of<decltype(q)>;
    return std::vector<S>{-q[0], S(1.0)};
  });
  return sys;
}

/// Momentum section sqrt(2E/(1 + x1^2)) (1, x1) of the nonholonomic toy.
inline PolyFn<VectorFieldSig> nonholonomic_toy_gamma(double E) {
  return PolyFn<VectorFieldSig>([E](auto q) {
    using S = scalar_of<decltype(q)>;
    using std::sqrt;
    const S s = sqrt(2.0 * E / (1.0 + q[0] * q[0]));
    return std::vector<S>{s, s * q[0]};
  });
}

/// Q = R^2 = (s, r), constraint ds + a dr, L = (sdot^2 + rdot^2)/2 - r^2/2.
inline System make_flat_toy(double a = 0.5) {
  System sys;
  sys.name = "flat-toy";
  sys.lagrangian = LagrangianField(2, [](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * (v[0] * v[0] + v[1] * v[1]) - 0.5 * q[1] * q[1];
    return l;
  });
  sys.constraints = ConstraintDistribution(2, 1, [a](auto q) {
    using S = scalar_of<decltype(q)>;
    return std::vector<S>{S(1.0), S(a)};
  });
  sys.group = {0};
  return sys;
}

/// Closed form of the flat toy: r(t) = r0 cos(w t) + rdot0/w sin(w t) with
/// w = 1/sqrt(1 + a^2), s = s0 - a (r - r0).
inline std::pair<double, double> flat_toy_solution(double a, double s0, double r0, double rdot0, double t) {
  const double w = 1.0 / std::sqrt(1.0 + a * a);
  const double r = r0 * std::cos(w * t) + rdot0 / w * std::sin(w * t);
  return {s0 - a * (r - r0), r};
}

}  // namespace dirac
