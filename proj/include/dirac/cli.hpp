#pragma once

/**
 * @file cli.hpp
 * @brief Commands behind the diracsim executable. Each returns a process exit
 * code: 0 ok, 1 check failed, 2 configuration error, 3 singular KKT system,
 * 4 blow-up.
 */

#include <functional>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "dirac/chaplygin.hpp"
#include "dirac/config.hpp"
#include "dirac/hamilton_jacobi.hpp"
#include "dirac/integrator.hpp"
#include "dirac/io.hpp"
#include "dirac/plot.hpp"
#include "dirac/systems.hpp"

namespace dirac {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitSingularKKT = 3, kExitBlowUp = 4 };

/// Runs `body`, mapping library errors to exit codes.
inline int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const SingularKKT& e) {
    err << "error: " << e.what() << '\n';
    return kExitSingularKKT;
  } catch (const BlowUp& e) {
    err << "error: " << e.what() << '\n';
    return kExitBlowUp;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

inline std::string default_output(const RunConfig& c, const std::string& suffix) {
  return c.out.empty() ? c.system + suffix : c.out;
}

inline int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        c.validate();
        const Setup s = make_setup(c);
        const Trajectory tr = integrate(s.system.lagrangian, s.system.constraints, s.q0, s.v0, c.T, c.h);
        const std::string path = default_output(c, ".csv");
        write_trajectory_csv(tr, path);
        double cres = 0.0;
        for (double r : tr.constraint_residual) cres = std::max(cres, r);
        out << "system = " << c.system << '\n'
            << "rows = " << tr.size() << '\n'
            << "energy_drift = " << format_double(energy_drift(tr, s.system.lagrangian)) << '\n'
            << "constraint_residual = " << format_double(cres) << '\n';
        if (c.system == "lc-circuit") {
          std::vector<double> ql;
          for (const auto& st : tr.states) ql.push_back(st.q[0]);
          try {
            out << "frequency = " << format_double(zero_crossing_frequency(tr.t, ql)) << '\n';
          } catch (const DomainError&) {
            out << "frequency = n/a (fewer than two zero crossings)\n";
          }
          out << "frequency_expected = " << format_double(lc_params(c).nu()) << '\n';
        }
        out << "csv = " << path << '\n';
        return static_cast<int>(kExitOk);
      },
      err);
}

namespace detail {

inline void flag(HJReport& r, const char* name, double value, double tol) {
  if (!(value <= tol)) r.failed.emplace_back(name);
}

inline int finish_report(const HJReport& r, std::ostream& out) {
  out << r.to_text();
  return r.failed.empty() ? kExitOk : kExitCheckFailed;
}

}  // namespace detail

inline int cmd_hjcheck(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        c.validate();
        check_param_keys(c);
        const double tol = c.tol.value_or(1e-9);
        const double cross_tol = std::max(tol, 1e-6);
        HJReport r;
        if (c.system == "roller-racer") {
          const RollerRacerHJ hj = roller_racer_hj(c);
          const System sys = make_roller_racer(hj.params);
          const HJSection U = hj.section();
          const auto samples = roller_racer_samples(1000, c.seed);
          r.in_K_residual = check_in_K(U, sys.lagrangian, sys.constraints, samples);
          r.dgamma_residual = check_closedness_on_delta(U, sys.constraints, samples);
          r.dhj_residual = max_dhj_residual(U, sys.lagrangian, sys.constraints, samples);
          const EnergyStats e = dhj_energy_constancy(U, sys.lagrangian, samples);
          r.energy_mean = e.mean;
          r.energy_dev = e.max_dev;
          const Vec q0 = hj.initial_q(c.param("theta0", 0.0), c.param("phi0", 0.9));
          r.crosscheck_dev = crosscheck_hj_vs_direct(U, sys.lagrangian, sys.constraints, q0, c.T, c.h);
          const bool generating = bracket_generating(sys.constraints, {samples.begin(), samples.begin() + 5}).saturated;
          detail::flag(r, "in_K", r.in_K_residual, tol);
          detail::flag(r, "dgamma", r.dgamma_residual, tol);
          detail::flag(r, "dhj", r.dhj_residual, tol);
          if (generating) detail::flag(r, "energy", r.energy_dev, tol);
          detail::flag(r, "crosscheck", r.crosscheck_dev, cross_tol);
        } else if (c.system == "lc-circuit") {
          const LCCircuitHJ hj = lc_hj(c);
          const System sys = make_lc_circuit(hj.params);
          const HJSection U = hj.section();
          const auto leaf = lc_leaf_samples(hj, 200, c.seed);
          std::vector<Vec> samples;
          for (const auto& s : leaf) samples.push_back(sys.leaf(s));
          r.in_K_residual = check_in_K(U, sys.lagrangian, sys.constraints, samples);
          const HolonomicCheck h = holonomic_check(U, sys.lagrangian, sys.leaf, leaf);
          r.dgamma_residual = h.closedness;
          r.dhj_residual = max_dhj_residual(U, sys.lagrangian, sys.constraints, samples);
          std::vector<double> e;
          for (const auto& q : samples) e.push_back(generalized_energy(sys.lagrangian, U.lift(q)));
          r.energy_mean = energy_stats(e).mean;
          r.energy_dev = h.energy_dev;
          // One branch of the square root covers half a period; start just
          // after a turning point and stop before the next one.
          const double alpha = -hj.branch * (std::numbers::pi / 2.0 - 0.2);
          const double window = (std::numbers::pi - 0.4) / hj.params.nu();
          const double T = std::min(c.T, window);
          out << "crosscheck_window = " << format_double(T) << '\n';
          r.crosscheck_dev = crosscheck_hj_vs_direct(U, sys.lagrangian, sys.constraints, hj.initial_q(alpha), T, c.h);
          detail::flag(r, "in_K", r.in_K_residual, tol);
          detail::flag(r, "dgamma", r.dgamma_residual, tol);
          detail::flag(r, "dhj", r.dhj_residual, tol);
          detail::flag(r, "energy", r.energy_dev, tol);
          detail::flag(r, "crosscheck", r.crosscheck_dev, cross_tol);
        } else if (c.system == "nonholonomic-toy") {
          const System sys = make_nonholonomic_toy();
          const double E = c.param("E", 0.5);
          const PolyFn<VectorFieldSig> gamma = nonholonomic_toy_gamma(E);
          // Unit mass: the velocity field equals the momentum field.
          const HJSection U(2, gamma, gamma);
          std::mt19937_64 rng(c.seed);
          std::uniform_real_distribution<double> u(-2.0, 2.0);
          std::vector<Vec> samples;
          for (int i = 0; i < 200; ++i) samples.push_back(Vec{{u(rng), u(rng)}});
          const NonholonomicHJCheck nh = nonholonomic_hj_check(gamma, Hamiltonian(sys.lagrangian), sys.constraints, samples);
          r.in_K_residual = check_in_K(U, sys.lagrangian, sys.constraints, samples);
          r.dgamma_residual = check_closedness_on_delta(U, sys.constraints, samples);
          r.dhj_residual = nh.residual;
          r.energy_mean = nh.energy.mean;
          r.energy_dev = nh.energy.max_dev;
          Vec q0(2);
          q0 << c.param("x1", 0.2), 0.0;
          r.crosscheck_dev = crosscheck_hj_vs_direct(U, sys.lagrangian, sys.constraints, q0, c.T, c.h);
          detail::flag(r, "in_K", r.in_K_residual, tol);
          detail::flag(r, "dgamma", r.dgamma_residual, tol);
          detail::flag(r, "dhj", r.dhj_residual, tol);
          detail::flag(r, "crosscheck", r.crosscheck_dev, cross_tol);
        } else if (c.system == "linear-velocity") {
          const System sys = make_linear_velocity_toy();
          std::mt19937_64 rng(c.seed);
          std::uniform_real_distribution<double> u(-2.0, 2.0);
          std::vector<std::pair<Vec, Vec>> samples;
          for (int i = 0; i < 20; ++i) samples.emplace_back(Vec{{u(rng), u(rng)}}, Vec{{u(rng), u(rng)}});
          const bool linear = linear_velocity_diagnostic(sys.lagrangian, samples);
          out << "linear_in_velocity = " << (linear ? "true" : "false") << '\n';
          if (linear) out << "note = energy level sets only; the equation carries no dynamics on Q\n";
          return static_cast<int>(kExitOk);
        } else {
          throw ConfigError("no built-in Hamilton-Jacobi solution for system '" + c.system + "'");
        }
        return detail::finish_report(r, out);
      },
      err);
}

inline int cmd_reduce(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        c.validate();
        const Setup s = make_setup(c);
        if (s.system.group.empty()) throw ConfigError("system '" + c.system + "' has no symmetry group to reduce");
        const ChaplyginBundle B = build_bundle(s.system.lagrangian, s.system.constraints, s.system.group);
        const ReducedSystem R(B);
        const Vec r0 = B.base_part(s.q0);
        const Vec pbar0 = R.momentum(r0, B.base_part(s.v0));
        const ReducedTrajectory rt = integrate_reduced(R, r0, pbar0, c.T, c.h);
        const Trajectory rec = reconstruct(R, rt, B.group_part(s.q0));
        const Trajectory direct = integrate(s.system.lagrangian, s.system.constraints, s.q0, s.v0, c.T, c.h);
        const double gap = trajectory_gap(direct, rec);
        double cres = 0.0;
        for (double x : rec.constraint_residual) cres = std::max(cres, x);
        double hdrift = 0.0;
        for (double e : rt.energy) hdrift = std::max(hdrift, std::abs(e - rt.energy.front()));
        const std::string stem = c.out.empty() ? c.system : c.out;
        write_file_atomic(stem + "_reduced.csv", reduced_csv(rt));
        write_trajectory_csv(rec, stem + "_reconstructed.csv");
        out << "system = " << c.system << '\n'
            << "reduction_gap = " << format_double(gap) << '\n'
            << "reduced_energy_drift = " << format_double(hdrift) << '\n'
            << "constraint_residual = " << format_double(cres) << '\n';
        if (c.system == "flat-toy") {
          double dev = 0.0;
          for (std::size_t i = 0; i < rec.size(); ++i) {
            const auto [sx, rx] = flat_toy_solution(c.param("a", 0.5), s.q0[0], s.q0[1], s.v0[1], rec.t[i]);
            dev = std::max({dev, std::abs(rec.states[i].q[0] - sx), std::abs(rec.states[i].q[1] - rx)});
          }
          out << "exact_dev = " << format_double(dev) << '\n';
        }
        out << "reduced_csv = " << stem << "_reduced.csv\n"
            << "reconstructed_csv = " << stem << "_reconstructed.csv\n";
        const double tol = c.tol.value_or(1e-6);
        if (!(gap <= tol) || !(cres <= 1e-9)) return static_cast<int>(kExitCheckFailed);
        return static_cast<int>(kExitOk);
      },
      err);
}

inline int cmd_plot(const std::string& csv_path, const std::vector<std::string>& columns, const std::string& x,
                    const std::string& svg_path, std::ostream& out, std::ostream& err) {
  return run_guarded(
      [&] {
        const CsvTable t = parse_csv(read_file(csv_path));
        write_file_atomic(svg_path, svg_plot(t, columns, x));
        out << "svg = " << svg_path << '\n';
        return static_cast<int>(kExitOk);
      },
      err);
}

}  // namespace dirac
