#pragma once

/**
 * @file integrator.hpp
 * @brief Lagrange-Dirac equations as a semi-explicit DAE.
 *
 * At every stage the accelerations and multipliers solve
 *
 *   [ M   -w^T ] [ vdot   ]   [  b ]
 *   [ w    0   ] [ lambda ] = [ -c ]
 *
 * with M = d2L/dv2, b = dL/dq - (d2L/dv dq) v and c the drift of w(q) v = 0.
 *
 * When M is degenerate on the constraint distribution (an LC network, for
 * example) the matrix above is singular. If the degenerate directions W are
 * constant and W^T b depends on q only, the position-level condition
 * psi(q) = W^T dL/dq(q, 0) = 0 is appended as extra constraint rows.
 * Anything else raises SingularKKT.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dirac/errors.hpp"
#include "dirac/geometry.hpp"
#include "dirac/io.hpp"

namespace dirac {

inline constexpr double kKKTSingularTol = 1e-12;

inline const char* singular_kkt_message() {
  return "Lagrange-Dirac KKT matrix is singular: the Lagrangian is degenerate beyond the weakly "
         "degenerate Chaplygin class; run the linear-velocity diagnostic (a Lagrangian linear in "
         "velocity carries no dynamics through the Hamilton-Jacobi equation)";
}

/// Blocks of the DAE at one (q, v).
struct DAEAssembly {
  Mat M;      ///< d2L/dv2
  Mat K;      ///< K(i, j) = d2L/dv_i dq_j
  Vec b;      ///< dL/dq - K v
  Mat omega;  ///< k x n constraint matrix
  Vec c;      ///< c_a = d omega^a_i / dq_j v^j v^i
  Mat G;      ///< secondary constraint rows (may be empty)
  Vec d;      ///< drift of the secondary rows
  Vec dv;     ///< dL/dv
  double lagrangian = 0.0;
  double kkt_min_singular = 0.0;

  /// Stacked constraint rows [omega; G].
  Mat rows() const {
    Mat A(omega.rows() + G.rows(), M.cols());
    A << omega, G;
    return A;
  }

  Mat kkt() const {
    const Mat A = rows();
    const Eigen::Index n = M.rows();
    const Eigen::Index m = A.rows();
    Mat out = Mat::Zero(n + m, n + m);
    out.topLeftCorner(n, n) = M;
    out.topRightCorner(n, m) = -A.transpose();
    out.bottomLeftCorner(m, n) = A;
    return out;
  }

  struct Solution {
    Vec vdot;
    Vec lambda;  ///< multipliers of the k constraint forms
    Vec mu;      ///< multipliers of the secondary rows
    Vec pdot;
  };

  Solution solve(const Vec& v) const {
    const Eigen::Index n = M.rows();
    const Eigen::Index k = omega.rows();
    const Eigen::Index r = G.rows();
    Vec rhs(n + k + r);
    rhs << b, -c, -d;
    const Vec x = kkt().partialPivLu().solve(rhs);
    Solution s;
    s.vdot = x.head(n);
    s.lambda = x.segment(n, k);
    s.mu = x.tail(r);
    s.pdot = M * s.vdot + K * v;
    return s;
  }
};

/// Degenerate directions and the position-level condition they impose.
struct SecondaryStructure {
  Mat W;  ///< n x r, orthonormal columns in ker M intersected with Delta
};

namespace detail {

inline Vec force_term(const LagrangianJet& j, const Vec& v) { return j.dq - j.Kvq * v; }

/// W^T (d2L/dq2)(x, 0) U for an n x m matrix U, via one nested dual pass with
/// outer tangents along W and inner tangents along U.
inline Mat secondary_hessian(const LagrangianField& L, const Mat& W, const Vec& x, const Mat& U) {
  const int n = L.dim();
  const int r = static_cast<int>(W.cols());
  const int m = static_cast<int>(U.cols());
  std::vector<Dual2> qs(static_cast<std::size_t>(n));
  const std::vector<Dual2> vs(static_cast<std::size_t>(n), Dual2(0.0));
  for (int i = 0; i < n; ++i) {
    Dual1 inner(x[i]);
    inner.set_directions(m);
    for (int c = 0; c < m; ++c) inner.d(c) = U(i, c);
    Dual2 outer(inner);
    outer.set_directions(r);
    for (int a = 0; a < r; ++a) outer.d(a) = Dual1(W(i, a));
    qs[static_cast<std::size_t>(i)] = outer;
  }
  const Dual2 y = L(std::span<const Dual2>(qs), std::span<const Dual2>(vs));
  Mat out(r, m);
  for (int a = 0; a < r; ++a) {
    for (int c = 0; c < m; ++c) out(a, c) = y.d(a).d(c);
  }
  return out;
}

/// Jacobian of psi(q) = W^T dL/dq(q, 0).
inline Mat secondary_rows(const LagrangianField& L, const Mat& W, const Vec& q) {
  return secondary_hessian(L, W, q, Mat::Identity(L.dim(), L.dim()));
}

}  // namespace detail

/// Detects the degenerate directions of M on Delta and checks that they give a
/// position-level condition. Throws SingularKKT otherwise.
inline SecondaryStructure detect_secondary(const LagrangianField& L, const ConstraintDistribution& D, const Vec& q,
                                           const Vec& v, const LagrangianJet& j) {
  const Mat H = horizontal_basis(D, q);
  const Mat Mh = H.transpose() * j.Mvv * H;
  const Mat N = symmetric_null_space(0.5 * (Mh + Mh.transpose()), 1e-12);
  if (N.cols() == 0) throw SingularKKT(singular_kkt_message());
  SecondaryStructure s;
  s.W = H * N;
  // W^T b must not depend on v: probe along every coordinate direction.
  const int n = L.dim();
  const double eps = 1e-4;
  double scale = 1.0;
  const Vec b0 = s.W.transpose() * detail::force_term(j, v);
  scale = std::max(scale, b0.cwiseAbs().maxCoeff());
  for (int i = 0; i < n; ++i) {
    Vec vp = v;
    Vec vm = v;
    vp[i] += eps;
    vm[i] -= eps;
    const Vec bp = s.W.transpose() * detail::force_term(jet(L, q, vp), vp);
    const Vec bm = s.W.transpose() * detail::force_term(jet(L, q, vm), vm);
    if (((bp - bm) / (2.0 * eps)).cwiseAbs().maxCoeff() > 1e-7 * scale) {
      throw SingularKKT(singular_kkt_message());
    }
  }
  return s;
}

/// Assembles the DAE blocks. `secondary` caches the degenerate structure
/// across calls; pass nullptr to detect it from scratch each time.
inline DAEAssembly assemble(const LagrangianField& L, const ConstraintDistribution& D, const Vec& q, const Vec& v,
                            std::optional<SecondaryStructure>* secondary = nullptr) {
  const int n = L.dim();
  if (D.dim() != n) throw ShapeError("lagrangian and constraints have different dimensions");
  require_dim(q, n, "q");
  require_dim(v, n, "v");
  const LagrangianJet j = jet(L, q, v);
  DAEAssembly a;
  a.M = j.Mvv;
  a.K = j.Kvq;
  a.b = detail::force_term(j, v);
  a.dv = j.dv;
  a.lagrangian = j.value;
  a.omega = D.matrix(q);
  a.c = Vec::Zero(D.rank());
  if (D.rank() > 0) {
    const auto dw = D.derivative(q);
    for (int r = 0; r < D.rank(); ++r) a.c[r] = v.dot(dw[static_cast<std::size_t>(r)] * v);
  }
  a.G.resize(0, n);
  a.d.resize(0);

  std::optional<SecondaryStructure> local;
  std::optional<SecondaryStructure>& sec = secondary ? *secondary : local;
  if (!sec) {
    a.kkt_min_singular = min_singular_value(a.kkt());
    if (a.kkt_min_singular >= kKKTSingularTol) return a;
    sec = detect_secondary(L, D, q, v, j);
  }
  const Mat& W = sec->W;
  if (W.cols() == 0) return a;
  a.G = detail::secondary_rows(L, W, q);
  // Drift v^T (dG/dq) v by a central difference of G v along v.
  const double vn = v.norm();
  a.d = Vec::Zero(W.cols());
  if (vn > 0.0) {
    const double eps = 1e-5 / vn;
    const Mat Gp = detail::secondary_hessian(L, W, q + eps * v, v);
    const Mat Gm = detail::secondary_hessian(L, W, q - eps * v, v);
    a.d = (Gp - Gm).col(0) / (2.0 * eps);
  }
  if (!secondary) {
    a.kkt_min_singular = min_singular_value(a.kkt());
    if (a.kkt_min_singular < kKKTSingularTol) throw SingularKKT(singular_kkt_message());
  }
  return a;
}

struct IntegratorOptions {
  bool project = true;           ///< project v onto the constraint kernel after each step
  double blowup_norm = 1e12;
};

/// Time grid, states on K, multipliers and diagnostics.
struct Trajectory {
  std::vector<double> t;
  std::vector<PontryaginState> states;
  std::vector<Vec> lambda;  ///< one per stored state
  std::vector<double> energy;
  std::vector<double> constraint_residual;
  double max_force_leak = 0.0;  ///< max |H^T omega^T lambda| over the run
  int k = 0;

  std::size_t size() const { return t.size(); }
};

namespace detail {

inline void check_state(const Vec& q, const Vec& v, double limit) {
  const double nq = q.norm();
  const double nv = v.norm();
  if (!std::isfinite(nq) || !std::isfinite(nv) || nq > limit || nv > limit) {
    throw BlowUp("state norm exceeded " + std::to_string(limit));
  }
}

inline Vec project_onto_kernel(const Mat& A, const Vec& v) {
  if (A.rows() == 0) return v;
  const Vec y = (A * A.transpose()).ldlt().solve(A * v);
  return v - A.transpose() * y;
}

}  // namespace detail

/// Fixed-step RK4 on (q, v) with a KKT solve at every stage.
inline Trajectory integrate(const LagrangianField& L, const ConstraintDistribution& D, const Vec& q0, const Vec& v0,
                            double T, double h, const IntegratorOptions& opt = {}) {
  const int n = L.dim();
  require_dim(q0, n, "q0");
  require_dim(v0, n, "v0");
  if (!(h > 0.0) || !(T >= 0.0)) throw ConfigError("integrate: need h > 0 and T >= 0");
  if (D.rank() > 0) {
    const Vec r = D.apply(q0, v0);
    if (r.cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, v0.norm())) {
      throw DomainError("initial velocity violates the constraints");
    }
  }
  const long steps = std::lround(T / h);
  std::optional<SecondaryStructure> sec;
  // Detect degenerate structure once from the initial state.
  {
    const DAEAssembly first = assemble(L, D, q0, v0);
    if (first.G.rows() > 0) sec = detect_secondary(L, D, q0, v0, jet(L, q0, v0));
    else sec = SecondaryStructure{Mat(n, 0)};
  }

  Trajectory traj;
  traj.k = D.rank();
  traj.t.reserve(static_cast<std::size_t>(steps + 1));
  traj.states.reserve(static_cast<std::size_t>(steps + 1));

  Vec q = q0;
  Vec v = v0;
  auto accel = [&](const Vec& qq, const Vec& vv, DAEAssembly* keep) {
    DAEAssembly a = assemble(L, D, qq, vv, &sec);
    const auto s = a.solve(vv);
    if (keep) *keep = std::move(a);
    return s;
  };
  auto record = [&](double t, const DAEAssembly& a, const DAEAssembly::Solution& s) {
    PontryaginState st{q, v, a.dv};
    traj.t.push_back(t);
    traj.energy.push_back(a.dv.dot(v) - a.lagrangian);
    traj.constraint_residual.push_back(a.omega.rows() ? (a.omega * v).cwiseAbs().maxCoeff() : 0.0);
    traj.lambda.push_back(s.lambda);
    traj.states.push_back(std::move(st));
    if (a.omega.rows()) {
      const Mat Hb = kernel_split(a.omega).kernel;
      const Vec leak = Hb.transpose() * (a.omega.transpose() * s.lambda);
      if (leak.size()) {
        const double rel = leak.cwiseAbs().maxCoeff() / std::max(1.0, s.lambda.norm() * a.omega.norm());
        traj.max_force_leak = std::max(traj.max_force_leak, rel);
      }
    }
  };

  DAEAssembly a;
  auto s1 = accel(q, v, &a);
  record(0.0, a, s1);
  for (long i = 0; i < steps; ++i) {
    const Vec k1q = v;
    const Vec k1v = s1.vdot;
    const Vec k2q = v + 0.5 * h * k1v;
    const Vec k2v = accel(q + 0.5 * h * k1q, k2q, nullptr).vdot;
    const Vec k3q = v + 0.5 * h * k2v;
    const Vec k3v = accel(q + 0.5 * h * k2q, k3q, nullptr).vdot;
    const Vec k4q = v + h * k3v;
    const Vec k4v = accel(q + h * k3q, k4q, nullptr).vdot;
    q += (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
    v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    detail::check_state(q, v, opt.blowup_norm);
    if (opt.project) {
      Mat A(D.rank() + sec->W.cols(), n);
      A << D.matrix(q), (sec->W.cols() ? detail::secondary_rows(L, sec->W, q) : Mat(0, n));
      v = detail::project_onto_kernel(A, v);
    }
    s1 = accel(q, v, &a);
    record(static_cast<double>(i + 1) * h, a, s1);
  }
  return traj;
}

/// Generalized energy p.v - L(q, v) of a stored state.
inline double state_energy(const LagrangianField& L, const PontryaginState& s) { return generalized_energy(L, s); }

/// max |E(t) - E(0)| along a trajectory.
inline double energy_drift(const Trajectory& traj, const LagrangianField& L) {
  if (traj.states.empty()) return 0.0;
  const double e0 = state_energy(L, traj.states.front());
  double out = 0.0;
  for (const auto& s : traj.states) out = std::max(out, std::abs(state_energy(L, s) - e0));
  return out;
}

/// CSV with columns t, q*, v*, p*, lambda*, energy, constraint_residual.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  const int n = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().q.size());
  os << "t";
  for (const char* block : {"q", "v", "p"}) {
    for (int i = 1; i <= n; ++i) os << ',' << block << i;
  }
  for (int i = 1; i <= traj.k; ++i) os << ",lambda" << i;
  os << ",energy,constraint_residual\n";
  for (std::size_t r = 0; r < traj.size(); ++r) {
    const auto& s = traj.states[r];
    os << format_double(traj.t[r]);
    for (const Vec* x : {&s.q, &s.v, &s.p}) {
      for (Eigen::Index i = 0; i < x->size(); ++i) os << ',' << format_double((*x)[i]);
    }
    for (Eigen::Index i = 0; i < traj.lambda[r].size(); ++i) os << ',' << format_double(traj.lambda[r][i]);
    os << ',' << format_double(traj.energy[r]) << ',' << format_double(traj.constraint_residual[r]) << '\n';
  }
  return os.str();
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  write_file_atomic(path, trajectory_csv(traj));
}

/// Angular frequency of an oscillating signal from its zero crossings:
/// crossing times (linearly interpolated) are regressed on their index, the
/// slope is half a period.
inline double zero_crossing_frequency(const std::vector<double>& t, const std::vector<double>& x) {
  if (t.size() != x.size()) throw ShapeError("zero_crossing_frequency: size mismatch");
  std::vector<double> crossings;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if ((x[i - 1] < 0.0 && x[i] >= 0.0) || (x[i - 1] > 0.0 && x[i] <= 0.0)) {
      if (x[i] == 0.0 && i + 1 < x.size() && x[i + 1] == 0.0) continue;
      const double w = x[i - 1] / (x[i - 1] - x[i]);
      crossings.push_back(t[i - 1] + w * (t[i] - t[i - 1]));
    }
  }
  if (crossings.size() < 2) throw DomainError("zero_crossing_frequency: fewer than two crossings");
  const double m = static_cast<double>(crossings.size());
  double sk = 0.0, st = 0.0, skk = 0.0, skt = 0.0;
  for (std::size_t k = 0; k < crossings.size(); ++k) {
    const double kk = static_cast<double>(k);
    sk += kk;
    st += crossings[k];
    skk += kk * kk;
    skt += kk * crossings[k];
  }
  const double slope = (m * skt - sk * st) / (m * skk - sk * sk);
  return std::numbers::pi / slope;
}

}  // namespace dirac
