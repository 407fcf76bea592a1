// TOML scenario files. Keys mirror ScenarioConfig; see configs/paper.toml.
#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <toml.hpp>

#include "pmsm_gp/scenario.hpp"

namespace pmsm_gp {

namespace detail {

inline void check_keys(const toml::table& t, std::string_view where,
                       std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : t) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k.str();
    if (!ok) throw ConfigError("unknown key '" + std::string(k.str()) + "' in " + std::string(where));
  }
}

inline const toml::table* sub_table(const toml::table& root, std::string_view name) {
  const toml::node* n = root.get(name);
  if (!n) return nullptr;
  if (!n->is_table()) throw ConfigError("'" + std::string(name) + "' must be a table");
  return n->as_table();
}

template <typename T>
void read(const toml::table& t, std::string_view key, T& out) {
  const toml::node* n = t.get(key);
  if (!n) return;
  auto v = n->value<T>();
  if (!v) throw ConfigError("key '" + std::string(key) + "' has the wrong type");
  out = *v;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::string_view text, std::string_view source = "config") {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& err) {
    throw ConfigError(std::string(source) + ": " + std::string(err.description()));
  }
  using detail::read;
  ScenarioConfig c;
  detail::check_keys(root, "root",
                     {"seed", "strategy", "sim", "motor", "mapping", "reference", "control",
                      "kernel", "bound", "experts"});
  std::int64_t seed = static_cast<std::int64_t>(c.seed);
  read(root, "seed", seed);
  if (seed < 0) throw ConfigError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);
  if (root.contains("strategy")) {
    std::string name;
    read(root, "strategy", name);
    auto parsed = parse_strategy(name);
    if (!parsed) throw ConfigError("unknown strategy '" + name + "'");
    c.strategy = *parsed;
  }

  if (const auto* t = detail::sub_table(root, "sim")) {
    detail::check_keys(*t, "[sim]", {"t_end", "dt_sim", "dt_ctrl", "hold", "check_bounds"});
    read(*t, "t_end", c.t_end);
    read(*t, "dt_sim", c.dt_sim);
    read(*t, "dt_ctrl", c.dt_ctrl);
    read(*t, "check_bounds", c.check_bounds);
    std::string hold = "zoh";
    read(*t, "hold", hold);
    if (hold == "zoh") c.hold = ControlHold::zoh;
    else if (hold == "continuous") c.hold = ControlHold::continuous;
    else throw ConfigError("sim.hold must be 'zoh' or 'continuous'");
  }
  if (const auto* t = detail::sub_table(root, "motor")) {
    detail::check_keys(*t, "[motor]", {"J", "p", "B", "psi"});
    read(*t, "J", c.motor.J);
    std::int64_t p = c.motor.p;
    read(*t, "p", p);
    c.motor.p = static_cast<int>(p);
    read(*t, "B", c.motor.B_damp);
    read(*t, "psi", c.motor.psi);
  }
  if (const auto* t = detail::sub_table(root, "mapping")) {
    detail::check_keys(*t, "[mapping]", {"upsilon", "omega_max_rpm", "omega_lo", "omega_hi"});
    read(*t, "upsilon", c.mapping.upsilon);
    if (t->contains("omega_max_rpm")) {
      if (t->contains("omega_lo") || t->contains("omega_hi"))
        throw ConfigError("[mapping]: give omega_max_rpm or omega_lo/omega_hi, not both");
      double rpm = 0.0;
      read(*t, "omega_max_rpm", rpm);
      c.mapping.omega_lo = -rpm_to_rad_per_s(rpm);
      c.mapping.omega_hi = rpm_to_rad_per_s(rpm);
    }
    read(*t, "omega_lo", c.mapping.omega_lo);
    read(*t, "omega_hi", c.mapping.omega_hi);
  }
  if (const auto* t = detail::sub_table(root, "reference")) {
    detail::check_keys(*t, "[reference]", {"alpha", "max_speed_rpm", "t_acc"});
    read(*t, "t_acc", c.reference.t_acc);
    if (t->contains("alpha") && t->contains("max_speed_rpm"))
      throw ConfigError("[reference]: give alpha or max_speed_rpm, not both");
    read(*t, "alpha", c.reference.alpha);
    if (t->contains("max_speed_rpm")) {
      double rpm = 0.0;
      read(*t, "max_speed_rpm", rpm);
      c.reference.alpha = rpm_to_rad_per_s(rpm) / c.reference.t_acc;
    }
  }
  if (const auto* t = detail::sub_table(root, "control")) {
    detail::check_keys(*t, "[control]", {"lambda1", "lambda2", "Q"});
    read(*t, "lambda1", c.gains.lambda1);
    read(*t, "lambda2", c.gains.lambda2);
    if (const toml::node* q = t->get("Q")) {
      const auto* rows = q->as_array();
      if (!rows || rows->size() != 2) throw ConfigError("control.Q must be a 2x2 array");
      for (std::size_t i = 0; i < 2; ++i) {
        const auto* row = (*rows)[i].as_array();
        if (!row || row->size() != 2) throw ConfigError("control.Q must be a 2x2 array");
        for (std::size_t j = 0; j < 2; ++j) {
          auto v = (*row)[j].value<double>();
          if (!v) throw ConfigError("control.Q entries must be numbers");
          c.Q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *v;
        }
      }
    }
  }
  if (const auto* t = detail::sub_table(root, "kernel")) {
    detail::check_keys(*t, "[kernel]", {"sigma_f", "length_scale"});
    read(*t, "sigma_f", c.kernel.sigma_f);
    read(*t, "length_scale", c.kernel.ell);
  }
  if (const auto* t = detail::sub_table(root, "bound")) {
    detail::check_keys(*t, "[bound]", {"delta", "tau", "L_f", "eta_grid"});
    read(*t, "delta", c.bound.delta);
    read(*t, "tau", c.bound.tau);
    read(*t, "L_f", c.bound.L_f);
    std::int64_t g = c.bound.eta_grid;
    read(*t, "eta_grid", g);
    c.bound.eta_grid = static_cast<int>(g);
  }
  if (const toml::node* n = root.get("experts")) {
    const auto* arr = n->as_array();
    if (!arr || !arr->is_array_of_tables()) throw ConfigError("'experts' must be an array of tables");
    c.experts.clear();
    for (const auto& e : *arr) {
      const auto& t = *e.as_table();
      detail::check_keys(t, "[[experts]]",
                         {"phi_lo", "phi_hi", "omega_lo", "omega_hi", "n_phi", "n_omega", "noise_std"});
      RegionSpec r;
      read(t, "phi_lo", r.phi_lo);
      read(t, "phi_hi", r.phi_hi);
      read(t, "omega_lo", r.omega_lo);
      read(t, "omega_hi", r.omega_hi);
      std::int64_t np = r.n_phi, nw = r.n_omega;
      read(t, "n_phi", np);
      read(t, "n_omega", nw);
      r.n_phi = static_cast<int>(np);
      r.n_omega = static_cast<int>(nw);
      read(t, "noise_std", r.noise_std);
      c.experts.push_back(r);
    }
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace pmsm_gp
