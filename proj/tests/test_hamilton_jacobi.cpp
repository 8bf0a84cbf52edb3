#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "dirac/hamilton_jacobi.hpp"
#include "dirac/systems.hpp"
#include "support.hpp"

using namespace dirac;
using testing_support::Gen;

namespace {

HJSection zero_section(int n) {
  auto zero = [n](auto q) { return std::vector<scalar_of<decltype(q)>>(static_cast<std::size_t>(n)); };
  return HJSection(n, zero, zero);
}

LCCircuitHJ lc_solution() { return LCCircuitHJ{}; }

std::vector<Vec> lc_points(const LCCircuitHJ& hj, int count, std::uint64_t seed) {
  const System sys = make_lc_circuit(hj.params);
  std::vector<Vec> out;
  for (const auto& s : lc_leaf_samples(hj, count, seed)) out.push_back(sys.leaf(s));
  return out;
}

Mat random_rotation(int m, Gen& gen) {
  const Eigen::HouseholderQR<Mat> qr(Mat(gen.vec(m * m).reshaped(m, m)));
  return qr.householderQ() * Mat::Identity(m, m);
}

}  // namespace

// --- check_in_K ---------------------------------------------------------------

TEST(CheckInK, RollerRacerSolution) {
  const System sys = make_roller_racer();
  const HJSection U = RollerRacerHJ{}.section();
  EXPECT_LT(check_in_K(U, sys.lagrangian, sys.constraints, roller_racer_samples(1000, 42)), 1e-10);
}

TEST(CheckInK, MissingMomentumMeasured) {
  const System sys = make_free_particle(2);
  const HJSection U(
      2,
      [](auto q) {
        using S = scalar_of<decltype(q)>;
        return std::vector<S>{S(1.0), S(-2.0)};
      },
      [](auto q) { return std::vector<scalar_of<decltype(q)>>(2); });
  EXPECT_DOUBLE_EQ(check_in_K(U, sys.lagrangian, sys.constraints, {Vec{{0.3, 0.1}}}), 2.0);
}

TEST(CheckInK, LCCircuitOnLeaf) {
  const LCCircuitHJ hj = lc_solution();
  const System sys = make_lc_circuit(hj.params);
  EXPECT_LT(check_in_K(hj.section(), sys.lagrangian, sys.constraints, lc_points(hj, 200, 42)), 1e-10);
}

// --- closedness ---------------------------------------------------------------

TEST(Closedness, ExactFormVanishes) {
  const HJSection U(
      2, [](auto q) { return std::vector<scalar_of<decltype(q)>>(2); },
      [](auto q) {
        using S = scalar_of<decltype(q)>;
        using std::cos;
        return std::vector<S>{q[1] * cos(q[0] * q[1]), q[0] * cos(q[0] * q[1])};
      });
  Gen gen(3);
  std::vector<Vec> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(gen.vec(2, -2.0, 2.0));
  EXPECT_LT(check_closedness_on_delta(U, ConstraintDistribution::none(2), samples), 1e-15);
}

TEST(Closedness, RollerRacerSolution) {
  const System sys = make_roller_racer();
  EXPECT_LT(check_closedness_on_delta(RollerRacerHJ{}.section(), sys.constraints, roller_racer_samples(1000, 42)),
            1e-10);
}

TEST(Closedness, AreaFormOnFullSpace) {
  const HJSection U(
      2, [](auto q) { return std::vector<scalar_of<decltype(q)>>(2); },
      [](auto q) {
        using S = scalar_of<decltype(q)>;
        return std::vector<S>{q[1], S(0.0)};
      });
  EXPECT_DOUBLE_EQ(check_closedness_on_delta(U, ConstraintDistribution::none(2), {Vec{{0.4, -0.3}}}), 1.0);
}

// --- dhj_residual -------------------------------------------------------------

TEST(DHJResidual, RollerRacerSolution) {
  const System sys = make_roller_racer();
  EXPECT_LT(max_dhj_residual(RollerRacerHJ{}.section(), sys.lagrangian, sys.constraints, roller_racer_samples(1000, 42)),
            1e-10);
}

TEST(DHJResidual, ShiftedSteeringRateFails) {
  const System sys = make_roller_racer();
  RollerRacerHJ hj;
  hj.variant = RollerRacerVariant::shift_phi;
  hj.eps = 0.1;
  EXPECT_GT(max_dhj_residual(hj.section(), sys.lagrangian, sys.constraints, roller_racer_samples(1000, 42)), 1e-3);
}

TEST(DHJResidual, ZeroDistributionIsVacuous) {
  const ConstraintDistribution D(2, 2, [](auto q) {
    using S = scalar_of<decltype(q)>;
    return std::vector<S>{S(1.0), S(0.0), S(0.0), S(1.0)};
  });
  const System sys = make_free_particle(2);
  EXPECT_EQ(dhj_residual(zero_section(2), sys.lagrangian, D, Vec{{0.1, 0.2}}).size(), 0);
}

TEST(DHJResidual, BasisRotationInvariance) {
  const System sys = make_roller_racer();
  RollerRacerHJ hj;
  hj.variant = RollerRacerVariant::shift_phi;
  hj.eps = 0.05;
  const HJSection U = hj.section();
  Gen gen(17);
  for (const auto& q : roller_racer_samples(100, 5)) {
    const Vec r = dhj_residual(U, sys.lagrangian, sys.constraints, q);
    const Mat H = horizontal_basis(sys.constraints, q) * random_rotation(2, gen);
    const Vec r2 = dhj_residual(U, sys.lagrangian, sys.constraints, q, &H);
    EXPECT_LT(std::abs(r.norm() - r2.norm()), 1e-12 * std::max(1.0, r.norm()));
  }
}

// --- energy constancy ---------------------------------------------------------

TEST(EnergyConstancy, RollerRacerSolution) {
  const System sys = make_roller_racer();
  const RollerRacerHJ hj;
  EXPECT_NEAR(hj.v_r(), std::sqrt(1.75), 1e-15);
  const EnergyStats e = dhj_energy_constancy(hj.section(), sys.lagrangian, roller_racer_samples(1000, 42));
  EXPECT_LT(e.max_dev, 1e-10);
  EXPECT_NEAR(e.mean, 1.0, 1e-12);
}

TEST(EnergyConstancy, FrozenSteeringRate) {
  const RollerRacerParams p{2.0, 1.0, 1.0, 1.0};
  const System sys = make_roller_racer(p);
  RollerRacerHJ hj;
  hj.params = p;
  hj.v_theta = 0.0;
  const EnergyStats e = dhj_energy_constancy(hj.section(), sys.lagrangian, roller_racer_samples(200, 1));
  EXPECT_NEAR(e.mean, 0.5 * p.m1 * hj.v_r() * hj.v_r(), 1e-12);
  EXPECT_NEAR(hj.v_r(), std::sqrt(2.0 * hj.E / p.m1), 1e-15);
  EXPECT_LT(e.max_dev, 1e-10);
}

TEST(EnergyConstancy, StationarySection) {
  const System sys = make_free_particle(3);
  const EnergyStats e = dhj_energy_constancy(zero_section(3), sys.lagrangian, {Vec::Zero(3), Vec::Ones(3)});
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.max_dev, 0.0);
}

TEST(EnergyConstancy, RollerRacerIsBracketGenerating) {
  const BracketReport b = bracket_generating(make_roller_racer().constraints, roller_racer_samples(5, 3));
  EXPECT_TRUE(b.saturated);
  EXPECT_EQ(b.min_rank, 4);
  EXPECT_FALSE(bracket_generating(make_lc_circuit().constraints, {Vec{{0.1, 0.2, 0.3, 0.4}}}).saturated);
}

// --- HJ flow ------------------------------------------------------------------

TEST(HJFlow, RollerRacerFollowsClosedFormSteeringEquation) {
  const RollerRacerHJ hj;
  const Vec q0 = hj.initial_q(0.2, 0.9);
  const double h = 1e-3;
  const Trajectory tr = integrate_hj_flow(hj.section(), q0, 10.0, h);
  // Independent scalar RK4 on the closed-form phi equation.
  double phi = 0.9;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    EXPECT_NEAR(tr.states[i].q[3], phi, 1e-12);
    EXPECT_NEAR(tr.states[i].q[2], 0.2 + hj.v_theta * tr.t[i], 1e-12);
    const double k1 = hj.phi_rate(phi);
    const double k2 = hj.phi_rate(phi + 0.5 * h * k1);
    const double k3 = hj.phi_rate(phi + 0.5 * h * k2);
    const double k4 = hj.phi_rate(phi + h * k3);
    phi += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

TEST(HJFlow, FrozenHeadingReading) {
  RollerRacerHJ hj;
  hj.v_theta = 0.0;
  const Trajectory tr = integrate_hj_flow(hj.section(), hj.initial_q(0.7, 1.2), 5.0, 1e-2);
  for (const auto& s : tr.states) {
    EXPECT_EQ(s.q[2], 0.7);
    EXPECT_NEAR(s.v[3], hj.v_r() * std::sin(s.q[3]), 1e-14);
  }
}

TEST(HJFlow, LCChargeIsSinusoidal) {
  const LCCircuitHJ hj = lc_solution();
  const double alpha = -(std::numbers::pi / 2.0 - 0.2);
  const double T = (std::numbers::pi - 0.4) / hj.params.nu();
  const Trajectory tr = integrate_hj_flow(hj.section(), hj.initial_q(alpha), T, 1e-3);
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_NEAR(tr.states[i].q[0], hj.charge(tr.t[i], alpha), 1e-9);
}

TEST(HJFlow, ZeroFieldIsConstant) {
  const Vec q0{{0.5, -1.0}};
  const Trajectory tr = integrate_hj_flow(zero_section(2), q0, 1.0, 0.1);
  EXPECT_EQ(tr.size(), 11u);
  for (const auto& s : tr.states) EXPECT_EQ(s.q, q0);
}

// --- cross-check --------------------------------------------------------------

TEST(Crosscheck, RollerRacer) {
  const System sys = make_roller_racer();
  const RollerRacerHJ hj;
  EXPECT_LT(crosscheck_hj_vs_direct(hj.section(), sys.lagrangian, sys.constraints, hj.initial_q(0.0, 0.9), 10.0, 1e-3),
            1e-6);
}

TEST(Crosscheck, LCCircuitOnLeaf) {
  const LCCircuitHJ hj = lc_solution();
  const System sys = make_lc_circuit(hj.params);
  const double alpha = -(std::numbers::pi / 2.0 - 0.2);
  const double T = (std::numbers::pi - 0.4) / hj.params.nu();
  EXPECT_LT(crosscheck_hj_vs_direct(hj.section(), sys.lagrangian, sys.constraints, hj.initial_q(alpha), T, 1e-3), 1e-6);
}

TEST(Crosscheck, ZeroHorizon) {
  const System sys = make_roller_racer();
  const RollerRacerHJ hj;
  EXPECT_EQ(crosscheck_hj_vs_direct(hj.section(), sys.lagrangian, sys.constraints, hj.initial_q(0.0, 0.9), 0.0, 1e-3),
            0.0);
}

TEST(Crosscheck, ConvergesAtFourthOrder) {
  const System sys = make_roller_racer();
  const RollerRacerHJ hj;
  const HJSection U = hj.section();
  const Vec q0 = hj.initial_q(0.0, 0.9);
  const double g1 = crosscheck_hj_vs_direct(U, sys.lagrangian, sys.constraints, q0, 5.0, 0.1);
  const double g2 = crosscheck_hj_vs_direct(U, sys.lagrangian, sys.constraints, q0, 5.0, 0.05);
  EXPECT_GE(std::log2(g1 / g2), 3.5);
}

// Reverse direction: a section whose flow reproduces the direct integration
// must solve the equation; perturbed sections fail on at least one side.
TEST(Crosscheck, PerturbedSectionsAreCaught) {
  const System sys = make_roller_racer();
  Gen gen(99);
  const RollerRacerVariant variants[] = {RollerRacerVariant::scale_phi, RollerRacerVariant::scale_theta,
                                         RollerRacerVariant::scale_gamma, RollerRacerVariant::scale_x,
                                         RollerRacerVariant::shift_phi};
  for (int family = 0; family < 6; ++family) {
    RollerRacerHJ hj;
    hj.E = gen.uniform(0.5, 2.0);
    hj.v_theta = gen.uniform(-0.5, 0.5);
    hj.branch = gen.uniform(0.0, 1.0) < 0.5 ? -1 : 1;
    if (family > 0) {
      hj.variant = variants[family - 1];
      hj.eps = gen.uniform(0.01, 0.2);
    }
    const HJSection U = hj.section();
    double flow_gap = 0.0;
    double residual = 0.0;
    for (const auto& q : roller_racer_samples(20, 1000 + family)) {
      Vec q0 = q;
      q0[3] = gen.uniform(1.0, 2.1);
      try {
        flow_gap = std::max(flow_gap, crosscheck_hj_vs_direct(U, sys.lagrangian, sys.constraints, q0, 0.2, 1e-2));
      } catch (const DomainError&) {
        // The lifted velocity leaves the distribution: no direct flow exists.
        flow_gap = std::numeric_limits<double>::infinity();
      }
      const Vec r = dhj_residual(U, sys.lagrangian, sys.constraints, q0);
      residual = std::max({residual, r.cwiseAbs().maxCoeff(),
                           check_in_K(U, sys.lagrangian, sys.constraints, {q0})});
    }
    if (flow_gap < 1e-9) {
      EXPECT_LT(residual, 1e-6) << family;
    }
    if (family > 0) {
      EXPECT_TRUE(flow_gap >= 1e-9 || residual >= 1e-6) << family;
    }
  }
}

// --- holonomic specialization -------------------------------------------------

TEST(Holonomic, LCSolutionOnLeaf) {
  const LCCircuitHJ hj = lc_solution();
  const System sys = make_lc_circuit(hj.params);
  const HolonomicCheck h = holonomic_check(hj.section(), sys.lagrangian, sys.leaf, lc_leaf_samples(hj, 200, 42));
  EXPECT_LT(h.energy_dev, 1e-10);
  EXPECT_LT(h.closedness, 1e-10);
}

TEST(Holonomic, ExactPullbackIsClosed) {
  // gamma o iota = dW with W(q_l) the integral of ell X_l: only the q_l slot.
  LCCircuitHJ hj = lc_solution();
  hj.eps = 0.3;
  const System sys = make_lc_circuit(hj.params);
  EXPECT_EQ(holonomic_check(hj.section(), sys.lagrangian, sys.leaf, lc_leaf_samples(hj, 50, 7)).closedness, 0.0);
}

TEST(Holonomic, ShiftedCurrentBreaksEnergy) {
  LCCircuitHJ hj = lc_solution();
  hj.eps = 0.1;
  const System sys = make_lc_circuit(hj.params);
  EXPECT_GT(holonomic_check(hj.section(), sys.lagrangian, sys.leaf, lc_leaf_samples(hj, 200, 42)).energy_dev, 1e-3);
}

TEST(Holonomic, LeafTangentsSpanDistribution) {
  const System sys = make_lc_circuit();
  Gen gen(2);
  for (int i = 0; i < 20; ++i) {
    const Vec s = gen.vec(2);
    const Mat T = sys.leaf.tangent(s);
    EXPECT_LT((sys.constraints.matrix(sys.leaf(s)) * T).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(Eigen::FullPivLU<Mat>(T).rank(), 2);
  }
}

// --- nonholonomic corollary ---------------------------------------------------

TEST(NonholonomicHJ, ToySolution) {
  const System sys = make_nonholonomic_toy();
  const Hamiltonian H(sys.lagrangian);
  Gen gen(4);
  std::vector<Vec> samples;
  for (int i = 0; i < 200; ++i) samples.push_back(gen.vec(2, -2.0, 2.0));
  const NonholonomicHJCheck c = nonholonomic_hj_check(nonholonomic_toy_gamma(0.7), H, sys.constraints, samples);
  EXPECT_LT(c.residual, 1e-10);
  EXPECT_NEAR(c.energy.mean, 0.7, 1e-12);
  EXPECT_LT(c.energy.max_dev, 1e-12);
}

TEST(NonholonomicHJ, AgreesWithSectionResidual) {
  const System sys = make_nonholonomic_toy();
  const Hamiltonian H(sys.lagrangian);
  // A non-solution so both residuals are nonzero; unit mass makes the
  // inverse Legendre map the identity.
  const PolyFn<VectorFieldSig> gamma([](auto q) {
    using S = scalar_of<decltype(q)>;
    using std::sin;
    return std::vector<S>{1.0 + sin(q[1]), q[0] * q[1]};
  });
  const HJSection U(2, gamma, gamma);
  Gen gen(5);
  for (int i = 0; i < 100; ++i) {
    const Vec q = gen.vec(2, -2.0, 2.0);
    const Vec a = nonholonomic_hj_residual(gamma, H, sys.constraints, q);
    const Vec b = dhj_residual(U, sys.lagrangian, sys.constraints, q);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    const Vec p = U.covector(q);
    EXPECT_NEAR(generalized_energy(sys.lagrangian, U.lift(q)), H(q, p), 1e-12);
  }
}

TEST(NonholonomicHJ, UnconstrainedIsClassical) {
  const System sys = make_free_particle(2);
  const Hamiltonian H(sys.lagrangian);
  // gamma = dW for W = x1^2 + x2, so H o gamma = 2 x1^2 + 1/2.
  const PolyFn<VectorFieldSig> gamma([](auto q) {
    using S = scalar_of<decltype(q)>;
    return std::vector<S>{2.0 * q[0], S(1.0)};
  });
  const Vec r = nonholonomic_hj_residual(gamma, H, sys.constraints, Vec{{0.3, 5.0}});
  EXPECT_NEAR(r[0], 4.0 * 0.3, 1e-12);
  EXPECT_NEAR(r[1], 0.0, 1e-12);
}

// --- linear-in-velocity diagnostic --------------------------------------------

TEST(LinearVelocity, Diagnostic) {
  Gen gen(6);
  std::vector<std::pair<Vec, Vec>> samples;
  for (int i = 0; i < 20; ++i) samples.emplace_back(gen.vec(4), gen.vec(4));
  std::vector<std::pair<Vec, Vec>> planar;
  for (int i = 0; i < 20; ++i) planar.emplace_back(gen.vec(2), gen.vec(2));
  EXPECT_TRUE(linear_velocity_diagnostic(make_linear_velocity_toy().lagrangian, planar));
  EXPECT_FALSE(linear_velocity_diagnostic(make_roller_racer().lagrangian, samples));
  EXPECT_FALSE(linear_velocity_diagnostic(make_lc_circuit().lagrangian, samples));
}

TEST(Report, TextFields) {
  HJReport r;
  r.in_K_residual = 1e-12;
  r.failed = {"dhj", "energy"};
  const std::string text = r.to_text();
  for (const char* key : {"in_K_residual = ", "dgamma_residual = ", "dhj_residual = ", "energy_mean = ",
                          "energy_dev = ", "crosscheck_dev = ", "failed = dhj,energy"}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
}
