// PMSM motion dynamics, GP input mapping, external torque field and the
// tracking reference.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace pmsm_gp {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Converts revolutions per minute to rad/s.
constexpr double rpm_to_rad_per_s(double rpm) { return rpm * kTwoPi / 60.0; }

/// Physical constants of the motor. `B_damp` is the viscous damping ratio.
struct MotorParams {
  double J = 8e-5;
  int p = 5;
  double B_damp = 0.1;
  double psi = 0.008;

  void validate() const {
    if (!(J > 0.0)) throw std::invalid_argument("MotorParams: J must be > 0");
    if (p < 1) throw std::invalid_argument("MotorParams: p must be >= 1");
    if (!(B_damp >= 0.0)) throw std::invalid_argument("MotorParams: B must be >= 0");
    if (!(psi > 0.0)) throw std::invalid_argument("MotorParams: psi must be > 0");
  }

  /// Torque produced per ampere of q-axis current, 1.5 p psi.
  double torque_constant() const { return 1.5 * p * psi; }
};

struct State {
  double phi = 0.0;    // rad
  double omega = 0.0;  // rad/s

  bool finite() const { return std::isfinite(phi) && std::isfinite(omega); }
};

struct StateDerivative {
  double dphi = 0.0;
  double domega = 0.0;
};

struct MappingConfig {
  double upsilon = 0.1;
  double omega_lo = -rpm_to_rad_per_s(1000.0);
  double omega_hi = rpm_to_rad_per_s(1000.0);

  double omega_max() const { return std::max(std::abs(omega_lo), std::abs(omega_hi)); }

  void validate() const {
    if (!(upsilon > 0.0)) throw std::invalid_argument("MappingConfig: upsilon must be > 0");
    if (!(omega_max() > 0.0)) throw std::invalid_argument("MappingConfig: omega_max must be > 0");
    if (omega_lo > omega_hi) throw std::invalid_argument("MappingConfig: omega_lo > omega_hi");
  }
};

/// Point of the GP input domain [-pi, pi) x [-1, 1].
struct MappedInput {
  double phi_m = 0.0;
  double omega_m = 0.0;
};

/// Bounds of the compact GP input domain.
struct Domain {
  double phi_lo = -kPi;
  double phi_hi = kPi;
  double omega_lo = -1.0;
  double omega_hi = 1.0;

  bool contains(const MappedInput& x) const {
    return x.phi_m >= phi_lo && x.phi_m <= phi_hi && x.omega_m >= omega_lo &&
           x.omega_m <= omega_hi;
  }
};

inline constexpr Domain kInputDomain{};

/// Euclidean modulo into [0, m).
inline double euclid_mod(double x, double m) {
  double r = std::fmod(x, m);
  if (r < 0.0) r += m;
  // fmod of a tiny negative value plus m rounds up to m.
  if (r >= m) r = 0.0;
  return r;
}

inline MappedInput map_state(const State& s, const MappingConfig& cfg) {
  return {euclid_mod(cfg.upsilon * s.phi, kTwoPi) - kPi, s.omega / cfg.omega_max()};
}

inline StateDerivative dynamics_rhs(const State& s, double i_q, double torque,
                                    const MotorParams& params) {
  return {s.omega,
          (-params.B_damp * s.omega + params.torque_constant() * i_q - torque) / params.J};
}

/// External load torque of the validation scenario (N m).
inline double true_torque(const MappedInput& x) {
  return 2.0 * std::sin(x.phi_m) + 2e-4 * std::cos(x.phi_m) * x.omega_m * x.omega_m + 10.0;
}

/// Gradient of true_torque with respect to (phi_m, omega_m).
inline std::pair<double, double> true_torque_gradient(const MappedInput& x) {
  const double w2 = x.omega_m * x.omega_m;
  return {2.0 * std::cos(x.phi_m) - 2e-4 * std::sin(x.phi_m) * w2,
          4e-4 * std::cos(x.phi_m) * x.omega_m};
}

/// Lipschitz constant of true_torque over the input domain: |2 cos| + |2e-4 sin w^2|
/// and |4e-4 cos w| bounded termwise.
inline constexpr double kTrueTorqueLipschitz = 2.0002;

struct ReferenceConfig {
  double alpha = 50.0 * kPi / 3.0;  // rad/s^2
  double t_acc = 1.0;               // s

  void validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("ReferenceConfig: alpha must be > 0");
    if (!(t_acc > 0.0)) throw std::invalid_argument("ReferenceConfig: t_acc must be > 0");
  }
};

struct ReferencePoint {
  double phi_d = 0.0;
  double omega_d = 0.0;
  double accel_d = 0.0;
};

/// Constant-acceleration ramp up to t_acc, constant velocity afterwards.
inline ReferencePoint reference(double t, const ReferenceConfig& cfg) {
  if (t <= cfg.t_acc) return {0.5 * cfg.alpha * t * t, cfg.alpha * t, cfg.alpha};
  const double v = cfg.alpha * cfg.t_acc;
  return {v * t - 0.5 * cfg.alpha * cfg.t_acc * cfg.t_acc, v, 0.0};
}

/// One classical RK4 step of a generic state ODE `deriv(t, state)`.
template <typename Deriv>
State rk4_step(const State& s, double t, double dt, Deriv&& deriv) {
  auto shifted = [&](const StateDerivative& k, double h) {
    return State{s.phi + h * k.dphi, s.omega + h * k.domega};
  };
  const StateDerivative k1 = deriv(t, s);
  const StateDerivative k2 = deriv(t + 0.5 * dt, shifted(k1, 0.5 * dt));
  const StateDerivative k3 = deriv(t + 0.5 * dt, shifted(k2, 0.5 * dt));
  const StateDerivative k4 = deriv(t + dt, shifted(k3, dt));
  return {s.phi + dt / 6.0 * (k1.dphi + 2.0 * k2.dphi + 2.0 * k3.dphi + k4.dphi),
          s.omega + dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega)};
}

/// RK4 step of the motor with `i_q` held over the step. `torque_source(t, state)`
/// is re-evaluated at every stage.
template <typename TorqueSource>
State rk4_step(const State& s, double t, double dt, double i_q, TorqueSource&& torque_source,
               const MotorParams& params) {
  return rk4_step(s, t, dt, [&](double tau, const State& x) {
    return dynamics_rhs(x, i_q, torque_source(tau, x), params);
  });
}

/// Torque source that maps the state into the GP domain and evaluates true_torque.
struct TrueTorqueSource {
  MappingConfig mapping;
  double operator()(double /*t*/, const State& x) const {
    return true_torque(map_state(x, mapping));
  }
};

}  // namespace pmsm_gp
