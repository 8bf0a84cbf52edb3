#pragma once

/**
 * @file config.hpp
 * @brief Run configuration: INI files with [system], [params] and [initial]
 * sections, parameter overrides and the mapping to built-in systems.
 */

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dirac/errors.hpp"
#include "dirac/geometry.hpp"
#include "dirac/io.hpp"
#include "dirac/systems.hpp"

namespace dirac {

struct RunConfig {
  std::string system = "roller-racer";
  double T = 10.0;
  double h = 1e-3;
  std::uint64_t seed = 42;
  int branch = 1;
  double perturb = 0.0;
  std::optional<double> tol;
  bool corrected = false;
  std::map<std::string, double> params;
  std::optional<Vec> q0;
  std::optional<Vec> v0;
  std::string out;

  void validate() const {
    if (!(T > 0.0) || !std::isfinite(T)) throw ConfigError("T must be positive");
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("h must be positive");
    if (!(h < T)) throw ConfigError("h must be smaller than T");
    if (branch != 1 && branch != -1) throw ConfigError("branch must be +1 or -1");
    if (tol && !(*tol > 0.0)) throw ConfigError("tol must be positive");
  }

  double param(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

namespace detail {

inline double parse_number(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': not a number: " + text);
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used != text.size()) throw ConfigError("'" + key + "': not a number: " + text);
  return x;
}

inline Vec parse_list(const std::string& text, const std::string& key) {
  std::vector<double> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) xs.push_back(parse_number(item, key));
  if (xs.empty()) throw ConfigError("'" + key + "': empty list");
  return Eigen::Map<const Vec>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline bool parse_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("'" + key + "': not a boolean: " + text);
}

}  // namespace detail

/// Parameter keys accepted per system.
inline const std::set<std::string>& allowed_params(const std::string& system) {
  static const std::map<std::string, std::set<std::string>> table{
      {"roller-racer", {"m1", "I1", "d1", "d2", "E", "v_theta", "theta0", "phi0"}},
      {"bicycle", {"m", "a", "b", "c", "g", "J0"}},
      {"lc-circuit", {"ell", "c1", "c2", "c3", "a0", "a1", "E", "alpha"}},
      {"free-particle", {"m", "n"}},
      {"linear-velocity", {}},
      {"nonholonomic-toy", {"E", "x1"}},
      {"flat-toy", {"a", "s0", "r0", "rdot0"}},
  };
  const auto it = table.find(system);
  if (it == table.end()) throw ConfigError("unknown system '" + system + "'");
  return it->second;
}

/// Sets one parameter from "key=value".
inline void apply_param_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  cfg.params[key] = detail::parse_number(assignment.substr(eq + 1), key);
}

/// Rejects parameters that the selected system does not know.
inline void check_param_keys(const RunConfig& cfg) {
  const auto& allowed = allowed_params(cfg.system);
  for (const auto& [k, v] : cfg.params) {
    if (!allowed.count(k)) throw ConfigError("unknown parameter '" + k + "' for system " + cfg.system);
  }
}

/// Parses INI text on top of `base`.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const std::string value = node.data();
      const std::string full = section + "." + key;
      if (section == "system") {
        if (key == "name") {
          base.system = value;
        } else if (key == "T") {
          base.T = detail::parse_number(value, full);
        } else if (key == "h") {
          base.h = detail::parse_number(value, full);
        } else if (key == "seed") {
          base.seed = static_cast<std::uint64_t>(detail::parse_number(value, full));
        } else if (key == "branch") {
          base.branch = static_cast<int>(detail::parse_number(value, full));
        } else if (key == "perturb") {
          base.perturb = detail::parse_number(value, full);
        } else if (key == "tol") {
          base.tol = detail::parse_number(value, full);
        } else if (key == "corrected") {
          base.corrected = detail::parse_bool(value, full);
        } else if (key == "out") {
          base.out = value;
        } else {
          throw ConfigError("config: unknown key '" + full + "'");
        }
      } else if (section == "params") {
        base.params[key] = detail::parse_number(value, full);
      } else if (section == "initial") {
        if (key == "q") {
          base.q0 = detail::parse_list(value, full);
        } else if (key == "v") {
          base.v0 = detail::parse_list(value, full);
        } else {
          throw ConfigError("config: unknown key '" + full + "'");
        }
      } else {
        throw ConfigError("config: unknown section [" + section + "]");
      }
    }
  }
  check_param_keys(base);
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  return parse_config(read_file(path), std::move(base));
}

// --- parameters to systems ------------------------------------------------------

inline RollerRacerParams roller_racer_params(const RunConfig& c) {
  RollerRacerParams p;
  p.m1 = c.param("m1", p.m1);
  p.I1 = c.param("I1", p.I1);
  p.d1 = c.param("d1", p.d1);
  p.d2 = c.param("d2", p.d2);
  p.validate();
  return p;
}

inline RollerRacerHJ roller_racer_hj(const RunConfig& c) {
  RollerRacerHJ hj;
  hj.params = roller_racer_params(c);
  hj.E = c.param("E", hj.E);
  hj.v_theta = c.param("v_theta", hj.v_theta);
  hj.branch = c.branch;
  if (c.perturb != 0.0) {
    hj.variant = RollerRacerVariant::shift_phi;
    hj.eps = c.perturb;
  }
  hj.v_r();
  return hj;
}

inline BicycleParams bicycle_params(const RunConfig& c) {
  BicycleParams p;
  p.m = c.param("m", p.m);
  p.a = c.param("a", p.a);
  p.b = c.param("b", p.b);
  p.c = c.param("c", p.c);
  p.g = c.param("g", p.g);
  p.J0 = c.param("J0", p.J0);
  p.corrected = c.corrected;
  p.validate();
  return p;
}

inline LCCircuitParams lc_params(const RunConfig& c) {
  LCCircuitParams p;
  p.ell = c.param("ell", p.ell);
  p.c1 = c.param("c1", p.c1);
  p.c2 = c.param("c2", p.c2);
  p.c3 = c.param("c3", p.c3);
  p.a0 = c.param("a0", p.a0);
  p.a1 = c.param("a1", p.a1);
  p.validate();
  return p;
}

inline LCCircuitHJ lc_hj(const RunConfig& c) {
  LCCircuitHJ hj;
  hj.params = lc_params(c);
  hj.E = c.param("E", hj.E);
  hj.branch = c.branch;
  hj.eps = c.perturb;
  if (!(hj.E > 0.0)) throw ConfigError("E must be positive");
  return hj;
}

struct Setup {
  System system;
  Vec q0;
  Vec v0;
};

/// Builds the configured system and its initial state. [initial] entries
/// replace the defaults.
inline Setup make_setup(const RunConfig& c) {
  check_param_keys(c);
  Setup s;
  const std::string& name = c.system;
  if (name == "roller-racer") {
    RunConfig exact = c;
    exact.perturb = 0.0;
    const RollerRacerHJ hj = roller_racer_hj(exact);
    s.system = make_roller_racer(hj.params);
    s.q0 = hj.initial_q(c.param("theta0", 0.0), c.param("phi0", 0.9));
    s.v0 = hj.section().vector_field(s.q0);
  } else if (name == "bicycle") {
    s.system = make_bicycle(bicycle_params(c));
    std::tie(s.q0, s.v0) = bicycle_initial_state();
  } else if (name == "lc-circuit") {
    const LCCircuitParams p = lc_params(c);
    s.system = make_lc_circuit(p);
    std::tie(s.q0, s.v0) = lc_initial_state(p, c.param("E", 0.5), c.param("alpha", 0.0));
  } else if (name == "free-particle") {
    const int n = static_cast<int>(c.param("n", 2));
    if (n < 1 || n > kMaxDirections / 2) throw ConfigError("free-particle: n out of range");
    s.system = make_free_particle(n, c.param("m", 1.0));
    s.q0 = Vec::Zero(n);
    s.v0 = Vec::Ones(n);
  } else if (name == "linear-velocity") {
    s.system = make_linear_velocity_toy();
    s.q0 = Vec::Constant(2, 0.5);
    s.v0 = Vec::Constant(2, 0.1);
  } else if (name == "nonholonomic-toy") {
    s.system = make_nonholonomic_toy();
    const double x1 = c.param("x1", 0.2);
    const double E = c.param("E", 0.5);
    s.q0 = Vec::Zero(2);
    s.q0[0] = x1;
    s.v0 = to_eigen(std::span<const double>(nonholonomic_toy_gamma(E).get<double>()(as_span(s.q0))));
  } else if (name == "flat-toy") {
    s.system = make_flat_toy(c.param("a", 0.5));
    s.q0 = Vec(2);
    s.q0 << c.param("s0", 0.0), c.param("r0", 1.0);
    const double rdot = c.param("rdot0", 0.0);
    s.v0 = Vec(2);
    s.v0 << -c.param("a", 0.5) * rdot, rdot;
  } else {
    throw ConfigError("unknown system '" + name + "'");
  }
  const int n = s.system.lagrangian.dim();
  if (c.q0) s.q0 = *c.q0;
  if (c.v0) s.v0 = *c.v0;
  if (s.q0.size() != n || s.v0.size() != n) {
    throw ConfigError("initial state must have " + std::to_string(n) + " entries");
  }
  return s;
}

}  // namespace dirac
