// Training-data generation: encoder model, finite-difference derivatives,
// torque reconstruction, noise-variance propagation and grid datasets.
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "pmsm_gp/dynamics.hpp"
#include "pmsm_gp/gp.hpp"

namespace pmsm_gp {

using Rng = std::mt19937_64;

struct SensorConfig {
  double sigma_phi = 0.0;        // encoder noise std (rad)
  double delta_t = 1e-3;         // sampling interval (s)
  double sigma_lin_phi = 0.0;    // velocity linearization-error std
  double sigma_lin_omega = 0.0;  // acceleration linearization-error std
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_phi >= 0.0 && sigma_lin_phi >= 0.0 && sigma_lin_omega >= 0.0))
      throw std::invalid_argument("SensorConfig: standard deviations must be >= 0");
    if (!(delta_t > 0.0)) throw std::invalid_argument("SensorConfig: delta_t must be > 0");
  }
};

/// Input region and noise level of one expert's training set.
struct RegionSpec {
  double phi_lo = -kPi;
  double phi_hi = kPi;
  double omega_lo = -1.0;
  double omega_hi = 1.0;
  int n_phi = 10;
  int n_omega = 5;
  double noise_std = 0.01;

  Domain domain() const { return {phi_lo, phi_hi, omega_lo, omega_hi}; }

  void validate() const {
    if (!(phi_lo <= phi_hi && omega_lo <= omega_hi))
      throw std::invalid_argument("RegionSpec: lower bound above upper bound");
    if (phi_lo < kInputDomain.phi_lo || phi_hi > kInputDomain.phi_hi ||
        omega_lo < kInputDomain.omega_lo || omega_hi > kInputDomain.omega_hi)
      throw std::invalid_argument("RegionSpec: region not inside [-pi, pi] x [-1, 1]");
    if (n_phi < 1 || n_omega < 1) throw std::invalid_argument("RegionSpec: grid counts must be >= 1");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("RegionSpec: noise_std must be >= 0");
  }
};

/// Four equal angle slices over the full velocity range; the two middle
/// slices carry the noisier data.
inline std::vector<RegionSpec> default_regions() {
  const double h = 0.5 * kPi;
  return {{-kPi, -h, -1.0, 1.0, 10, 5, 0.01},
          {-h, 0.0, -1.0, 1.0, 10, 5, 0.1},
          {0.0, h, -1.0, 1.0, 10, 5, 0.1},
          {h, kPi, -1.0, 1.0, 10, 5, 0.01}};
}

inline double encoder_measure(double phi_m, const SensorConfig& cfg, Rng& rng) {
  if (cfg.sigma_phi == 0.0) return phi_m;
  std::normal_distribution<double> noise(0.0, cfg.sigma_phi);
  return phi_m + noise(rng);
}

inline double finite_diff_velocity(double z_next, double z_now, double delta_t) {
  return (z_next - z_now) / delta_t;
}

inline double finite_diff_accel(double z_2, double z_1, double z_0, double delta_t) {
  return (z_2 - 2.0 * z_1 + z_0) / (delta_t * delta_t);
}

/// T = -J domega/dt - B omega + 1.5 p psi I_q from velocity and acceleration estimates.
inline double torque_from_rates(double accel, double omega, double i_q, const MotorParams& params) {
  return -params.J * accel - params.B_damp * omega + params.torque_constant() * i_q;
}

/// torque_from_rates with the forward-difference acceleration of two velocity estimates.
inline double reconstruct_torque(double omega_tilde_next, double omega_tilde_now, double i_q,
                                 double delta_t, const MotorParams& params) {
  return torque_from_rates(finite_diff_velocity(omega_tilde_next, omega_tilde_now, delta_t),
                           omega_tilde_now, i_q, params);
}

inline double noise_variance_omega(const SensorConfig& cfg) {
  return 4.0 * cfg.sigma_phi * cfg.sigma_phi / (cfg.delta_t * cfg.delta_t) +
         cfg.sigma_lin_phi * cfg.sigma_lin_phi;
}

inline double noise_variance_domega(double sigma_omega_sq, const SensorConfig& cfg) {
  return 4.0 * sigma_omega_sq / (cfg.delta_t * cfg.delta_t) +
         cfg.sigma_lin_omega * cfg.sigma_lin_omega;
}

inline double noise_variance_torque(double sigma_omega_sq, const SensorConfig& cfg,
                                    const MotorParams& params) {
  const double J2 = params.J * params.J;
  return (4.0 * J2 / (cfg.delta_t * cfg.delta_t) + params.B_damp * params.B_damp) *
             sigma_omega_sq +
         J2 * cfg.sigma_lin_omega * cfg.sigma_lin_omega;
}

namespace detail {

inline double grid_point(double lo, double hi, int n, int i) {
  if (n == 1) return 0.5 * (lo + hi);
  if (i == n - 1) return hi;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace detail

/// Uniform n_phi x n_omega grid with outputs true_torque + N(0, noise_std^2).
/// Samples are drawn in row-major (phi outer, omega inner) order.
inline Dataset generate_grid_dataset(const RegionSpec& region, Rng& rng) {
  region.validate();
  Dataset d;
  d.noise_std = region.noise_std;
  d.inputs.reserve(static_cast<std::size_t>(region.n_phi) * region.n_omega);
  d.outputs.reserve(d.inputs.capacity());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < region.n_phi; ++i) {
    for (int j = 0; j < region.n_omega; ++j) {
      const MappedInput x{detail::grid_point(region.phi_lo, region.phi_hi, region.n_phi, i),
                          detail::grid_point(region.omega_lo, region.omega_hi, region.n_omega, j)};
      d.inputs.push_back(x);
      d.outputs.push_back(true_torque(x) + region.noise_std * noise(rng));
    }
  }
  return d;
}

/// Independent stream for expert `index` derived from a scenario seed.
inline Rng expert_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  return Rng(seq);
}

}  // namespace pmsm_gp
