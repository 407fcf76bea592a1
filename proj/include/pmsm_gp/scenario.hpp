// Scenario configuration: plant, reference, controller, experts and run settings.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmsm_gp/aggregation.hpp"
#include "pmsm_gp/control.hpp"
#include "pmsm_gp/datagen.hpp"
#include "pmsm_gp/dynamics.hpp"
#include "pmsm_gp/gp.hpp"

namespace pmsm_gp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How the control input is applied between controller ticks.
enum class ControlHold {
  zoh,        // computed at each tick, held until the next
  continuous  // re-evaluated at every integrator stage
};

struct BoundConfig {
  double delta = 0.01;
  double tau = 0.01;
  double L_f = kTrueTorqueLipschitz;
  int eta_grid = 101;  // points per axis for the sup of min_i eta_i
};

struct ScenarioConfig {
  MotorParams motor;
  MappingConfig mapping;
  ReferenceConfig reference;
  Gains gains;
  Mat2 Q = Mat2::Identity();
  std::vector<RegionSpec> experts = default_regions();
  SEKernel kernel;
  BoundConfig bound;
  Strategy strategy = Strategy::coaoe_eta;
  double t_end = 10.0;
  double dt_sim = 1e-5;
  double dt_ctrl = 1e-4;
  std::uint64_t seed = 1;
  ControlHold hold = ControlHold::zoh;
  bool check_bounds = true;
  /// Test hook: the controller receives the true load torque, re-evaluated at
  /// every integrator stage.
  bool perfect_prediction = false;

  long substeps() const { return std::lround(dt_ctrl / dt_sim); }
  long ticks() const { return std::lround(t_end / dt_ctrl); }

  void validate() const {
    try {
      motor.validate();
      mapping.validate();
      reference.validate();
      kernel.validate();
      build_A(gains);
      if (!is_positive_definite(Q)) throw std::invalid_argument("Q must be symmetric positive definite");
      if (experts.empty()) throw std::invalid_argument("at least one expert region is required");
      for (const auto& r : experts) r.validate();
      if (!(bound.delta > 0.0 && bound.delta < 1.0))
        throw std::invalid_argument("bound.delta must be in (0, 1)");
      if (!(bound.tau > 0.0)) throw std::invalid_argument("bound.tau must be > 0");
      if (!(bound.L_f >= 0.0)) throw std::invalid_argument("bound.L_f must be >= 0");
      if (bound.eta_grid < 2) throw std::invalid_argument("bound.eta_grid must be >= 2");
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(ex.what());
    }
    if (!(t_end > 0.0)) throw ConfigError("sim.t_end must be > 0");
    if (!(dt_sim > 0.0 && dt_ctrl > 0.0)) throw ConfigError("time steps must be > 0");
    const double ratio = dt_ctrl / dt_sim;
    if (substeps() < 1 || std::abs(ratio - static_cast<double>(substeps())) > 1e-9 * ratio)
      throw ConfigError("sim.dt_ctrl must be an integer multiple of sim.dt_sim");
    const double nt = t_end / dt_ctrl;
    if (std::abs(nt - static_cast<double>(ticks())) > 1e-9 * nt)
      throw ConfigError("sim.t_end must be an integer multiple of sim.dt_ctrl");
  }
};

}  // namespace pmsm_gp
