#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>

#include "dirac/geometry.hpp"
#include "dirac/integrator.hpp"
#include "dirac/systems.hpp"
#include "support.hpp"

using namespace dirac;
using testing_support::Gen;

namespace {

LagrangianField oscillator() {
  return LagrangianField(1, [](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * v[0] * v[0] - 0.5 * q[0] * q[0];
    return l;
  });
}

// Roller racer velocity on the distribution from the steering rates.
Vec roller_racer_velocity(const RollerRacerParams& p, const Vec& q, double vt, double vp) {
  const double rate = ((p.d1 * std::cos(q[3]) + p.d2) * vt + p.d2 * vp) / std::sin(q[3]);
  return Vec{{std::cos(q[2]) * rate, std::sin(q[2]) * rate, vt, vp}};
}

Trajectory roller_racer_run(double T, double h) {
  const System sys = make_roller_racer();
  const Vec q0{{0.0, 0.0, 0.0, 0.9}};
  return integrate(sys.lagrangian, sys.constraints, q0, roller_racer_velocity({}, q0, 0.5, 0.7), T, h);
}

}  // namespace

TEST(Assemble, UnconstrainedReducesToEulerLagrange) {
  const DAEAssembly a = assemble(oscillator(), ConstraintDistribution::none(1), Vec{{0.7}}, Vec{{0.2}});
  EXPECT_EQ(a.omega.rows(), 0);
  const auto s = a.solve(Vec{{0.2}});
  EXPECT_NEAR(s.vdot[0], -0.7, 1e-15);
  EXPECT_NEAR(s.pdot[0], -0.7, 1e-15);
}

TEST(Assemble, RollerRacerSteeringMomentaAreConserved) {
  const System sys = make_roller_racer();
  const Vec q{{0.0, 0.0, 0.0, std::numbers::pi / 2.0}};
  const Vec v = roller_racer_velocity({}, q, 0.5, 0.3);
  const auto s = assemble(sys.lagrangian, sys.constraints, q, v).solve(v);
  EXPECT_NEAR(s.pdot[2], 0.0, 1e-14);
  EXPECT_NEAR(s.pdot[3], 0.0, 1e-14);
}

TEST(Assemble, RollerRacerForceIsLateral) {
  const System sys = make_roller_racer();
  Gen gen(31);
  for (int i = 0; i < 100; ++i) {
    Vec q = gen.vec(4, -3.0, 3.0);
    q[3] = gen.uniform(0.3, 2.8);
    const Vec v = roller_racer_velocity({}, q, gen.uniform(-1, 1), gen.uniform(-1, 1));
    const auto s = assemble(sys.lagrangian, sys.constraints, q, v).solve(v);
    // (pdot_x, pdot_y) = lambda (sin theta, -cos theta)
    const double lambda = s.pdot[0] * std::sin(q[2]) - s.pdot[1] * std::cos(q[2]);
    EXPECT_NEAR(s.pdot[0], lambda * std::sin(q[2]), 1e-11);
    EXPECT_NEAR(s.pdot[1], -lambda * std::cos(q[2]), 1e-11);
    EXPECT_NEAR(s.pdot[2], 0.0, 1e-11);
    EXPECT_NEAR(s.pdot[3], 0.0, 1e-11);
  }
}

TEST(Assemble, LinearVelocityLagrangianIsSingular) {
  const System sys = make_linear_velocity_toy();
  try {
    assemble(sys.lagrangian, sys.constraints, Vec{{0.3, 0.4}}, Vec{{1.0, 0.0}});
    FAIL() << "expected SingularKKT";
  } catch (const SingularKKT& e) {
    EXPECT_NE(std::string(e.what()).find("linear-velocity diagnostic"), std::string::npos);
  }
}

TEST(Integrate, OscillatorMatchesCosine) {
  const Trajectory tr = integrate(oscillator(), ConstraintDistribution::none(1), Vec{{1.0}}, Vec{{0.0}}, 5.0, 1e-3);
  ASSERT_EQ(tr.size(), 5001u);
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_NEAR(tr.states[i].q[0], std::cos(tr.t[i]), 1e-11);
}

TEST(Integrate, LCFrequency) {
  const LCCircuitParams p;
  const System sys = make_lc_circuit(p);
  const auto [q0, v0] = lc_initial_state(p, 0.5, 0.0);
  const Trajectory tr = integrate(sys.lagrangian, sys.constraints, q0, v0, 50.0, 1e-3);
  std::vector<double> ql;
  for (const auto& s : tr.states) ql.push_back(s.q[0]);
  const double nu = zero_crossing_frequency(tr.t, ql);
  EXPECT_NEAR(p.nu(), std::sqrt(1.5), 1e-15);
  EXPECT_LT(std::abs(nu - std::sqrt(1.5)) / std::sqrt(1.5), 1e-5);
  double leaf = 0.0;
  for (const auto& s : tr.states) leaf = std::max(leaf, std::abs(s.q[1] - p.ratio() * s.q[0]));
  EXPECT_LT(leaf, 1e-6);
}

TEST(Integrate, RollerRacerHeadingGrowsLinearly) {
  const System sys = make_roller_racer();
  const Vec q0{{0.0, 0.0, 0.3, 1.0}};
  // phi stays inside (0, pi); the forms are singular at the ends.
  const Trajectory tr =
      integrate(sys.lagrangian, sys.constraints, q0, roller_racer_velocity({}, q0, 0.5, 0.2), 10.0, 1e-3);
  double dev = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    dev = std::max(dev, std::abs(tr.states[i].q[2] - 0.3 - 0.5 * tr.t[i]));
    EXPECT_NEAR(tr.states[i].v[2], 0.5, 1e-8);
    EXPECT_NEAR(tr.states[i].p[2], 0.5, 1e-8);
  }
  EXPECT_LT(dev, 1e-8);
}

TEST(Integrate, ZeroVelocityStaysAtRest) {
  const System sys = make_roller_racer();
  const Vec q0{{1.0, -2.0, 0.3, 1.0}};
  const Trajectory tr = integrate(sys.lagrangian, sys.constraints, q0, Vec::Zero(4), 1.0, 1e-2);
  for (const auto& s : tr.states) {
    EXPECT_EQ(s.q, q0);
    EXPECT_EQ(s.v, Vec::Zero(4));
  }
  EXPECT_EQ(energy_drift(tr, sys.lagrangian), 0.0);
}

TEST(Integrate, OffConstraintStartRejected) {
  const System sys = make_roller_racer();
  EXPECT_THROW(integrate(sys.lagrangian, sys.constraints, Vec{{0.0, 0.0, 0.0, 1.0}}, Vec{{1.0, 0.0, 0.0, 0.0}}, 1.0,
                         1e-2),
               DomainError);
}

TEST(Integrate, BadStepRejected) {
  EXPECT_THROW(integrate(oscillator(), ConstraintDistribution::none(1), Vec{{1.0}}, Vec{{0.0}}, 1.0, 0.0),
               ConfigError);
}

TEST(Integrate, BlowUpDetected) {
  const LagrangianField unstable(1, [](auto q, auto v) {
    using S = scalar_of<decltype(q)>;
    S l = 0.5 * v[0] * v[0] + 0.5 * q[0] * q[0];
    return l;
  });
  IntegratorOptions opt;
  opt.blowup_norm = 1e3;
  EXPECT_THROW(integrate(unstable, ConstraintDistribution::none(1), Vec{{1.0}}, Vec{{1.0}}, 20.0, 1e-2, opt), BlowUp);
}

TEST(Integrate, LinearVelocityToyRaisesSingularKKT) {
  const System sys = make_linear_velocity_toy();
  EXPECT_THROW(integrate(sys.lagrangian, sys.constraints, Vec{{1.0, 0.0}}, Vec{{0.0, 1.0}}, 1.0, 1e-2), SingularKKT);
}

TEST(Integrate, BicycleKeepsConstraints) {
  const System sys = make_bicycle();
  const auto [q0, v0] = bicycle_initial_state();
  const Trajectory tr = integrate(sys.lagrangian, sys.constraints, q0, v0, 5.0, 1e-3);
  double r = 0.0;
  for (double x : tr.constraint_residual) r = std::max(r, x);
  EXPECT_LT(r, 1e-9);
  EXPECT_LT(energy_drift(tr, sys.lagrangian), 1e-8);
}

TEST(EnergyDrift, RollerRacer) {
  const Trajectory tr = roller_racer_run(10.0, 1e-3);
  EXPECT_LT(energy_drift(tr, make_roller_racer().lagrangian), 1e-8);
}

TEST(EnergyDrift, LCCircuit) {
  const LCCircuitParams p;
  const System sys = make_lc_circuit(p);
  const auto [q0, v0] = lc_initial_state(p, 0.5, 0.3);
  const Trajectory tr = integrate(sys.lagrangian, sys.constraints, q0, v0, 10.0, 1e-3);
  EXPECT_LT(energy_drift(tr, sys.lagrangian), 1e-8);
}

TEST(EnergyDrift, FourthOrderUnderHalving) {
  const LagrangianField L = make_roller_racer().lagrangian;
  const double d1 = energy_drift(roller_racer_run(10.0, 1e-2), L);
  const double d2 = energy_drift(roller_racer_run(10.0, 5e-3), L);
  const double d3 = energy_drift(roller_racer_run(10.0, 2.5e-3), L);
  EXPECT_GE(std::log2(d1 / d2), 3.5);
  EXPECT_GE(std::log2(d2 / d3), 3.5);
}

TEST(Trajectory, StatesStayOnK) {
  const System sys = make_roller_racer();
  const Trajectory tr = roller_racer_run(5.0, 1e-3);
  double k = 0.0;
  double c = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    k = std::max(k, k_residual_norm(sys.lagrangian, sys.constraints, tr.states[i]));
    c = std::max(c, tr.constraint_residual[i]);
  }
  EXPECT_LT(k, 1e-9);
  EXPECT_LT(c, 1e-9);
  EXPECT_LT(tr.max_force_leak, 1e-12);
  for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GT(tr.t[i], tr.t[i - 1]);
}

TEST(Trajectory, CsvSchema) {
  const Trajectory tr = roller_racer_run(0.01, 1e-3);
  const std::string csv = trajectory_csv(tr);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header, "t,q1,q2,q3,q4,v1,v2,v3,v4,p1,p2,p3,p4,lambda1,lambda2,energy,constraint_residual");
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  EXPECT_EQ(lines, 12u);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
}

TEST(ZeroCrossing, RecoversSineFrequency) {
  std::vector<double> t, x;
  for (int i = 0; i <= 20000; ++i) {
    t.push_back(i * 1e-3);
    x.push_back(std::sin(2.0 * t.back() + 0.4));
  }
  EXPECT_NEAR(zero_crossing_frequency(t, x), 2.0, 1e-6);
}

TEST(ZeroCrossing, ConstantSignalThrows) {
  EXPECT_THROW(zero_crossing_frequency({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}), DomainError);
}
