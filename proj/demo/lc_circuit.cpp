// LC circuit: integrate the constrained equations, compare the inductor
// charge with its closed form and check the built-in HJ solution on the leaf.

#include <cmath>
#include <cstdio>

#include "dirac/dirac.hpp"

using namespace dirac;

int main() {
  const LCCircuitParams p;
  const System sys = make_lc_circuit(p);
  const LCCircuitHJ hj{p, 0.5};
  const double alpha = 0.3;
  const auto [q0, v0] = lc_initial_state(p, hj.E, alpha);

  const Trajectory tr = integrate(sys.lagrangian, sys.constraints, q0, v0, 20.0, 1e-3);
  double dev = 0.0;
  for (std::size_t i = 0; i < tr.size(); ++i) dev = std::max(dev, std::abs(tr.states[i].q[0] - hj.charge(tr.t[i], alpha)));

  std::vector<double> ql;
  for (const auto& s : tr.states) ql.push_back(s.q[0]);
  std::printf("nu measured  %.12f\n", zero_crossing_frequency(tr.t, ql));
  std::printf("nu expected  %.12f\n", p.nu());
  std::printf("max |q_l - A sin(nu t + alpha)|  %.3e\n", dev);
  std::printf("energy drift  %.3e\n", energy_drift(tr, sys.lagrangian));

  const HolonomicCheck h = holonomic_check(hj.section(), sys.lagrangian, sys.leaf, lc_leaf_samples(hj, 100, 1));
  std::printf("HJ on leaf: energy dev %.3e, closedness %.3e\n", h.energy_dev, h.closedness);

  write_trajectory_csv(tr, "lc_circuit.csv");
  std::printf("wrote lc_circuit.csv\n");
}
