#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dirac/chaplygin.hpp"
#include "dirac/config.hpp"
#include "dirac/hamilton_jacobi.hpp"
#include "dirac/plot.hpp"
#include "dirac/systems.hpp"
#include "support.hpp"

using namespace dirac;
using testing_support::Gen;

TEST(RollerRacer, LagrangianAtDefaults) {
  const System sys = make_roller_racer();
  EXPECT_DOUBLE_EQ(sys.lagrangian(Vec::Zero(4), Vec{{1.0, 2.0, 3.0, 4.0}}), 7.0);
}

TEST(RollerRacer, RadialSpeed) {
  const RollerRacerHJ hj;
  EXPECT_NEAR(hj.v_r(), 1.3228757, 1e-7);
  EXPECT_DOUBLE_EQ(hj.v_r(), std::sqrt(1.75));
}

TEST(RollerRacer, RadialSpeedNeedsEnoughEnergy) {
  RollerRacerHJ hj;
  hj.E = 0.1;
  EXPECT_THROW(hj.v_r(), ConfigError);
}

TEST(RollerRacer, ParameterValidation) {
  for (int i = 0; i < 4; ++i) {
    RollerRacerParams p;
    double* fields[] = {&p.m1, &p.I1, &p.d1, &p.d2};
    *fields[i] = 0.0;
    EXPECT_THROW(make_roller_racer(p), ConfigError);
    *fields[i] = -1.0;
    EXPECT_THROW(make_roller_racer(p), ConfigError);
  }
}

TEST(RollerRacer, LagrangianIgnoresGroupCoordinates) {
  const System sys = make_roller_racer();
  Gen gen(1);
  for (int i = 0; i < 100; ++i) {
    Vec q = gen.vec(4, -3.0, 3.0);
    const Vec v = gen.vec(4);
    const double l = sys.lagrangian(q, v);
    q[0] += gen.uniform(-5.0, 5.0);
    q[1] += gen.uniform(-5.0, 5.0);
    EXPECT_EQ(sys.lagrangian(q, v), l);
  }
}

TEST(RollerRacer, ConstraintsIgnoreGroupCoordinates) {
  const System sys = make_roller_racer();
  Gen gen(2);
  for (int i = 0; i < 100; ++i) {
    Vec q = gen.vec(4, -3.0, 3.0);
    q[3] = gen.uniform(0.3, 2.8);
    const Mat w = sys.constraints.matrix(q);
    q[0] += 1.7;
    q[1] -= 0.4;
    EXPECT_EQ(sys.constraints.matrix(q), w);
  }
}

TEST(RollerRacer, CompletelyNonholonomic) {
  const BracketReport rep = bracket_generating(make_roller_racer().constraints, roller_racer_samples(20, 3));
  EXPECT_TRUE(rep.saturated);
  EXPECT_EQ(rep.min_rank, 4);
}

TEST(Bicycle, LateralConstraintAtZeroHeading) {
  const System sys = make_bicycle();
  const Mat w = sys.constraints.matrix(Vec{{0.0, 0.0, 0.0, 0.8, 3.0}});
  const Vec v{{1.0, 0.0, 0.0, 0.0, 0.0}};
  EXPECT_EQ(w.row(1).dot(v), 0.0);
}

TEST(Bicycle, ParameterValidation) {
  for (int i = 0; i < 3; ++i) {
    BicycleParams p;
    double* fields[] = {&p.m, &p.a, &p.b};
    *fields[i] = 0.0;
    EXPECT_THROW(make_bicycle(p), ConfigError);
  }
  BicycleParams p;
  p.J0 = -1.0;
  EXPECT_THROW(make_bicycle(p), ConfigError);
}

TEST(Bicycle, InitialStateOnDistribution) {
  const System sys = make_bicycle();
  const auto [q, v] = bicycle_initial_state();
  EXPECT_LT(sys.constraints.apply(q, v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Bicycle, SteeringInertiaFunction) {
  BicycleParams p;
  p.J = PolyFn<ScalarFieldSig>([](auto x) {
    using S = scalar_of<decltype(x)>;
    S j = 2.0 + x[0] * x[0];
    return j;
  });
  const System sys = make_bicycle(p);
  const Vec q{{0.0, 0.0, 0.0, 1.0, std::numbers::pi / 2.0}};
  const Vec v{{0.0, 0.0, 0.0, 1.0, 0.0}};
  // Only the steering term survives: J(phi = 1) / 2 = 1.5.
  EXPECT_NEAR(sys.lagrangian(q, v), 1.5, 1e-14);
}

TEST(Bicycle, CorrectedLeanTerm) {
  BicycleParams p;
  p.corrected = true;
  const Vec q{{0.0, 0.0, 0.0, 1.0, 0.5}};
  const Vec v{{0.0, 0.0, 0.0, 0.0, 1.0}};
  const double base = make_bicycle().lagrangian(q, v);
  const double corr = make_bicycle(p).lagrangian(q, v);
  const double s = std::sin(0.5);
  EXPECT_NEAR(base - corr, 0.5 * (s - s * s), 1e-14);
}

TEST(LCCircuit, LagrangianAtDefaults) {
  const System sys = make_lc_circuit();
  EXPECT_DOUBLE_EQ(sys.lagrangian(Vec::Zero(4), Vec{{1.0, 0.0, 0.0, 0.0}}), 0.5);
}

TEST(LCCircuit, ReferenceData) {
  const LCCircuitParams p;
  EXPECT_DOUBLE_EQ(p.nu(), std::sqrt(1.5));
  EXPECT_DOUBLE_EQ(p.ratio(), 0.5);
  const LCCircuitHJ hj;
  EXPECT_NEAR(hj.charge(0.0, std::numbers::pi / 2.0), hj.amplitude(), 1e-15);
  EXPECT_NEAR(0.5 * p.ell * p.nu() * p.nu() * hj.amplitude() * hj.amplitude(), hj.E, 1e-15);
}

TEST(LCCircuit, ParameterValidation) {
  for (int i = 0; i < 4; ++i) {
    LCCircuitParams p;
    double* fields[] = {&p.ell, &p.c1, &p.c2, &p.c3};
    *fields[i] = -0.5;
    EXPECT_THROW(make_lc_circuit(p), ConfigError);
  }
}

TEST(LCCircuit, FormsAreExact) {
  const System sys = make_lc_circuit();
  Gen gen(4);
  for (int i = 0; i < 20; ++i) {
    const Vec q = gen.vec(4);
    auto rows = [&](auto x) {
      using S = scalar_of<decltype(x)>;
      return sys.constraints.matrix<S>(x).data;
    };
    EXPECT_EQ(jacobian(rows, q).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(LCCircuit, LeafIsIntegral) {
  LCCircuitParams p;
  p.a0 = 0.3;
  p.a1 = -0.2;
  const System sys = make_lc_circuit(p);
  ASSERT_TRUE(static_cast<bool>(sys.leaf));
  Gen gen(5);
  for (int i = 0; i < 50; ++i) {
    const Vec s = gen.vec(2);
    const Vec q = sys.leaf(s);
    EXPECT_NEAR(q[2], q[0] - 0.3, 1e-15);
    EXPECT_NEAR(q[3], q[2] - q[1] + 0.2, 1e-15);
    EXPECT_LT((sys.constraints.matrix(q) * sys.leaf.tangent(s)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(LCCircuit, InitialStateOnLeafRelation) {
  const LCCircuitParams p;
  const auto [q, v] = lc_initial_state(p, 0.5, 0.7);
  EXPECT_NEAR(q[1], p.ratio() * q[0], 1e-15);
  EXPECT_LT(make_lc_circuit(p).constraints.apply(q, v).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(LCCircuit, NotBracketGenerating) {
  const BracketReport rep = bracket_generating(make_lc_circuit().constraints, {Vec::Zero(4), Vec::Ones(4)});
  EXPECT_FALSE(rep.saturated);
}

TEST(FlatToy, ClosedFormSatisfiesConstraint) {
  const auto [s, r] = flat_toy_solution(0.5, 1.0, 0.4, 0.2, 0.0);
  EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_DOUBLE_EQ(r, 0.4);
  const double t = 1.3;
  const double d = 1e-6;
  const auto [sp, rp] = flat_toy_solution(0.5, 1.0, 0.4, 0.2, t + d);
  const auto [sm, rm] = flat_toy_solution(0.5, 1.0, 0.4, 0.2, t - d);
  EXPECT_NEAR((sp - sm) + 0.5 * (rp - rm), 0.0, 1e-15);
}

TEST(Chaplygin, BuiltInBundlesAreInvariant) {
  for (const System& sys : {make_roller_racer(), make_bicycle(), make_flat_toy()}) {
    EXPECT_NO_THROW(build_bundle(sys.lagrangian, sys.constraints, sys.group)) << sys.name;
  }
}

// --- configuration --------------------------------------------------------------

TEST(Config, ParsesSections) {
  const RunConfig c = parse_config(
      "[system]\nname = lc-circuit\nT = 5\nh = 0.002\nseed = 7\n"
      "[params]\nc1 = 2\n"
      "[initial]\nq = 0.1, 0.05, 0.1, 0.05\nv = 0,0,0,0\n");
  EXPECT_EQ(c.system, "lc-circuit");
  EXPECT_EQ(c.T, 5.0);
  EXPECT_EQ(c.h, 0.002);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.param("c1", 1.0), 2.0);
  ASSERT_TRUE(c.q0.has_value());
  EXPECT_EQ(c.q0->size(), 4);
  EXPECT_EQ((*c.q0)[1], 0.05);
}

TEST(Config, RejectsUnknownKey) {
  EXPECT_THROW(parse_config("[system]\nname = roller-racer\nspeed = 3\n"), ConfigError);
  EXPECT_THROW(parse_config("[initial]\nw = 1\n"), ConfigError);
}

TEST(Config, RejectsUnknownSection) {
  EXPECT_THROW(parse_config("[solver]\nh = 1\n"), ConfigError);
}

TEST(Config, RejectsParameterOfOtherSystem) {
  EXPECT_THROW(parse_config("[system]\nname = roller-racer\n[params]\nc1 = 1\n"), ConfigError);
}

TEST(Config, RejectsUnknownSystemAndBadNumbers) {
  EXPECT_THROW(parse_config("[system]\nname = pendulum\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nT = ten\n"), ConfigError);
  EXPECT_THROW(parse_config("[initial]\nq = 1,,2\n"), ConfigError);
}

TEST(Config, OverridesWin) {
  RunConfig c = parse_config("[system]\nname = roller-racer\n[params]\nm1 = 2\n");
  apply_param_override(c, "m1=3");
  EXPECT_EQ(c.param("m1", 0.0), 3.0);
  EXPECT_THROW(apply_param_override(c, "m1"), ConfigError);
  EXPECT_THROW(apply_param_override(c, "m1=x"), ConfigError);
}

TEST(Config, Validation) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.h = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.h = 20.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = RunConfig{};
  c.branch = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(RunConfig{}.seed, 42u);
}

TEST(Config, SetupUsesDefaultsAndInitialOverrides) {
  RunConfig c;
  const dirac::Setup s = make_setup(c);
  EXPECT_EQ(s.system.name, "roller-racer");
  EXPECT_LT(s.system.constraints.apply(s.q0, s.v0).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_NEAR(s.v0[2], 0.5, 1e-15);
  c.system = "flat-toy";
  c.q0 = Vec{{1.0, 2.0}};
  c.v0 = Vec{{-0.5, 1.0}};
  const dirac::Setup f = make_setup(c);
  EXPECT_EQ(f.q0, *c.q0);
  c.q0 = Vec{{1.0}};
  EXPECT_THROW(make_setup(c), ConfigError);
}

TEST(Config, ShippedFilesLoad) {
  for (const char* name : {"roller_racer", "lc_circuit", "bicycle", "flat_toy"}) {
    const std::string path = std::string(DIRAC_SOURCE_DIR) + "/configs/" + name + ".ini";
    RunConfig c;
    ASSERT_NO_THROW(c = load_config(path)) << path;
    EXPECT_NO_THROW(c.validate()) << path;
    EXPECT_NO_THROW(make_setup(c)) << path;
  }
}

// --- plotting -------------------------------------------------------------------

TEST(Plot, TwoRowsGiveOneSegment) {
  const CsvTable t = parse_csv("t,x\n0,1\n1,2\n");
  const std::string svg = svg_plot(t, {"x"});
  const auto start = svg.find("points=\"");
  ASSERT_NE(start, std::string::npos);
  const auto end = svg.find('"', start + 8);
  const std::string pts = svg.substr(start + 8, end - start - 8);
  EXPECT_EQ(std::count(pts.begin(), pts.end(), ','), 2);
  EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);
}

TEST(Plot, ByteStable) {
  const CsvTable t = parse_csv("t,a,b\n0,1,3\n0.5,2,1\n1,0,2\n");
  EXPECT_EQ(svg_plot(t, {"a", "b"}), svg_plot(t, {"a", "b"}));
}

TEST(Plot, MissingColumn) {
  const CsvTable t = parse_csv("t,x\n0,1\n");
  EXPECT_THROW(svg_plot(t, {"y"}), ConfigError);
  EXPECT_THROW(svg_plot(t, {"x"}, "s"), ConfigError);
}
