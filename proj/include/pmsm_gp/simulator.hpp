// Closed-loop scenario runner, trajectory logs, Lyapunov diagnostics and the
// strategy comparison harness.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmsm_gp/aggregation.hpp"
#include "pmsm_gp/control.hpp"
#include "pmsm_gp/datagen.hpp"
#include "pmsm_gp/dynamics.hpp"
#include "pmsm_gp/gp.hpp"
#include "pmsm_gp/scenario.hpp"

namespace pmsm_gp {

/// Thrown when the simulated state stops being finite.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(double t, const std::string& what)
      : std::runtime_error(what + " at t = " + std::to_string(t) + " s"), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

/// Fitted GP experts with their error-bound constants.
class ExpertBank {
 public:
  static ExpertBank from_datasets(std::vector<Dataset> datasets, const SEKernel& kernel,
                                  const BoundConfig& bound) {
    ExpertBank bank;
    bank.bound_config_ = bound;
    for (auto& d : datasets) {
      bank.models_.push_back(GPModel::fit(std::move(d), kernel));
      bank.bounds_.push_back(
          make_bound_params(bank.models_.back(), bound.delta, bound.tau, bound.L_f));
    }
    return bank;
  }

  static std::vector<Dataset> generate_datasets(const ScenarioConfig& cfg) {
    std::vector<Dataset> out;
    for (std::size_t i = 0; i < cfg.experts.size(); ++i) {
      Rng rng = expert_rng(cfg.seed, i);
      out.push_back(generate_grid_dataset(cfg.experts[i], rng));
    }
    return out;
  }

  /// Generates the offline datasets of `cfg` and fits one expert per region.
  static ExpertBank build(const ScenarioConfig& cfg) {
    return from_datasets(generate_datasets(cfg), cfg.kernel, cfg.bound);
  }

  std::size_t size() const { return models_.size(); }
  const GPModel& model(std::size_t i) const { return models_.at(i); }
  const BoundParams& bound(std::size_t i) const { return bounds_.at(i); }
  const BoundConfig& bound_config() const { return bound_config_; }

  ExpertOutputs predict(const MappedInput& x, bool with_bounds) const {
    ExpertOutputs out;
    out.means.reserve(size());
    for (const auto& m : models_) out.means.push_back(m.posterior_mean(x));
    if (with_bounds) {
      std::vector<double> var, eta;
      for (std::size_t i = 0; i < size(); ++i) {
        var.push_back(models_[i].posterior_var(x));
        eta.push_back(eta_from_variance(bounds_[i], var.back()));
      }
      out.variances = std::move(var);
      out.etas = std::move(eta);
    }
    return out;
  }

  /// Dense-grid approximation of sup over the input domain of min_i eta_i.
  double eta_tilde_max(int grid) const {
    double best = 0.0;
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        const MappedInput x{detail::grid_point(kInputDomain.phi_lo, kInputDomain.phi_hi, grid, i),
                            detail::grid_point(kInputDomain.omega_lo, kInputDomain.omega_hi, grid, j)};
        best = std::max(best, eta_tilde(predict(x, true)));
      }
    }
    return best;
  }

 private:
  std::vector<GPModel> models_;
  std::vector<BoundParams> bounds_;
  BoundConfig bound_config_;
};

struct TorquePrediction {
  double T_hat = 0.0;
  Weights weights;
};

/// Fused torque prediction of `strategy` at one control instant.
inline TorquePrediction predict_torque(Strategy strategy, const ExpertBank& bank,
                                       const MappedInput& xm, const TrackingError& e,
                                       const ClosedLoopMatrices& clm) {
  const std::size_t n = bank.size();
  switch (strategy) {
    case Strategy::none:
      return {0.0, moe_weights(n)};
    case Strategy::moe: {
      auto w = moe_weights(n);
      return {aggregate_mean(bank.predict(xm, false), w), std::move(w)};
    }
    case Strategy::gpoe: {
      auto r = gpoe_aggregate(bank.predict(xm, true), moe_weights(n));
      return {r.mu, std::move(r.effective)};
    }
    case Strategy::coaoe_mean: {
      const auto out = bank.predict(xm, false);
      auto w = coaoe_mean_weights(out, clm.P, clm.B_in, e);
      return {aggregate_mean(out, w), std::move(w)};
    }
    case Strategy::coaoe_eta: {
      const auto out = bank.predict(xm, true);
      auto w = coaoe_eta_weights(out);
      return {aggregate_mean(out, w), std::move(w)};
    }
  }
  throw std::logic_error("unhandled strategy");
}

struct LogRow {
  double t, phi, omega, phi_d, omega_d, e1, e2, e_norm, T_true, T_hat, i_q, V;
};

/// One row per control tick; weights stored row-major, n_experts per row.
struct TrajectoryLog {
  Strategy strategy = Strategy::none;
  std::size_t n_experts = 0;
  std::vector<LogRow> rows;
  std::vector<double> weights;
  std::size_t bound_violations = 0;

  std::span<const double> weights_at(std::size_t row) const {
    return {weights.data() + row * n_experts, n_experts};
  }
};

inline std::string log_csv_header(std::size_t n_experts) {
  std::string h = "t,phi,omega,phi_d,omega_d,e1,e2,e_norm,T_true,T_hat,i_q";
  for (std::size_t i = 1; i <= n_experts; ++i) h += ",w" + std::to_string(i);
  return h + ",V";
}

inline void write_log_csv(std::ostream& os, const TrajectoryLog& log) {
  os << log_csv_header(log.n_experts) << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < log.rows.size(); ++k) {
    const auto& r = log.rows[k];
    os << r.t << ',' << r.phi << ',' << r.omega << ',' << r.phi_d << ',' << r.omega_d << ','
       << r.e1 << ',' << r.e2 << ',' << r.e_norm << ',' << r.T_true << ',' << r.T_hat << ','
       << r.i_q;
    for (double w : log.weights_at(k)) os << ',' << w;
    os << ',' << r.V << '\n';
  }
}

/// Runs the tracking experiment from x0 = 0 at t0 = 0 with pre-fitted experts.
inline TrajectoryLog run_closed_loop(const ScenarioConfig& cfg, const ExpertBank& bank) {
  cfg.validate();
  const auto clm = ClosedLoopMatrices::make(cfg.gains, cfg.Q, cfg.motor);
  const long n_ticks = cfg.ticks();
  const long n_sub = cfg.substeps();
  const double kt = cfg.motor.torque_constant();

  TrajectoryLog log;
  log.strategy = cfg.strategy;
  log.n_experts = bank.size();
  log.rows.reserve(static_cast<std::size_t>(n_ticks) + 1);
  log.weights.reserve(log.rows.capacity() * bank.size());

  auto torque_at = [&](const State& x) { return true_torque(map_state(x, cfg.mapping)); };
  // Full controller at (t, x): returns the current and the prediction used.
  auto controller = [&](double t, const State& x) {
    const auto ref = reference(t, cfg.reference);
    const auto e = tracking_error(x, ref);
    const MappedInput xm = map_state(x, cfg.mapping);
    TorquePrediction pred = cfg.perfect_prediction
                                ? TorquePrediction{true_torque(xm), moe_weights(bank.size())}
                                : predict_torque(cfg.strategy, bank, xm, e, clm);
    const double i_q = control_law(x, ref, pred.T_hat, cfg.motor, cfg.gains);
    return std::pair{i_q, std::move(pred)};
  };

  State x{0.0, 0.0};
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_ctrl;
    if (!x.finite()) throw NumericalAbort(t, "non-finite state");
    const auto ref = reference(t, cfg.reference);
    const auto e = tracking_error(x, ref);
    const MappedInput xm = map_state(x, cfg.mapping);
    const double T_true = true_torque(xm);
    auto [i_q, pred] = controller(t, x);
    if (!std::isfinite(i_q) || !std::isfinite(pred.T_hat))
      throw NumericalAbort(t, "non-finite control input");

    if (cfg.check_bounds) {
      const auto out = bank.predict(xm, true);
      for (std::size_t i = 0; i < bank.size(); ++i) {
        if (std::abs(T_true - out.means[i]) > (*out.etas)[i]) ++log.bound_violations;
      }
    }
    log.rows.push_back({t, x.phi, x.omega, ref.phi_d, ref.omega_d, e.e[0], e.e[1], e.norm(),
                        T_true, pred.T_hat, i_q, e.e.dot(clm.P * e.e)});
    log.weights.insert(log.weights.end(), pred.weights.w.begin(), pred.weights.w.end());
    if (k == n_ticks) break;

    const double T_hat_k = pred.T_hat;
    const double u_k = i_q;
    for (long j = 0; j < n_sub; ++j) {
      const double ts = t + static_cast<double>(j) * cfg.dt_sim;
      x = rk4_step(x, ts, cfg.dt_sim, [&](double tau, const State& xs) {
        const double T = torque_at(xs);
        double u = u_k;
        if (cfg.hold == ControlHold::continuous) {
          u = controller(tau, xs).first;
        } else if (cfg.perfect_prediction) {
          u += (T - T_hat_k) / kt;
        }
        return dynamics_rhs(xs, u, T, cfg.motor);
      });
    }
  }
  return log;
}

inline TrajectoryLog run_closed_loop(const ScenarioConfig& cfg) {
  return run_closed_loop(cfg, ExpertBank::build(cfg));
}

struct LyapunovSample {
  double t = 0.0;
  double V = 0.0;
  double vdot_fd = 0.0;        // central difference of V (one-sided at the ends)
  double vdot_analytic = 0.0;  // -e^T Q e + 2 e^T P B (T - T_hat)
};

inline std::vector<LyapunovSample> lyapunov_trace(const TrajectoryLog& log,
                                                  const ClosedLoopMatrices& clm) {
  const auto& rows = log.rows;
  std::vector<LyapunovSample> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const TrackingError e{Vec2(rows[k].e1, rows[k].e2)};
    out[k].t = rows[k].t;
    out[k].V = e.e.dot(clm.P * e.e);
    out[k].vdot_analytic = vdot_value(e, clm.P, clm.Q, clm.B_in, rows[k].T_true, rows[k].T_hat);
  }
  if (rows.size() < 2) return out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k + 1 == rows.size() ? k : k + 1;
    out[k].vdot_fd = (out[hi].V - out[lo].V) / (rows[hi].t - rows[lo].t);
  }
  return out;
}

struct Metrics {
  double rmse_e = 0.0;
  double max_e = 0.0;
  double steady_e = 0.0;
  std::size_t bound_violations = 0;
};

inline constexpr double kSteadyFraction = 0.2;

/// rmse_e covers the trailing `window_fraction` of the log; steady_e the final 20 %.
inline Metrics compute_metrics(const TrajectoryLog& log, double window_fraction = 1.0) {
  if (log.rows.empty()) throw std::invalid_argument("compute_metrics: empty log");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw std::invalid_argument("compute_metrics: window_fraction must be in (0, 1]");
  const auto& rows = log.rows;
  const double t0 = rows.front().t, t1 = rows.back().t;
  auto mean_over = [&](double frac, bool square) {
    const double start = t1 - frac * (t1 - t0);
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : rows) {
      if (r.t + 1e-12 < start) continue;
      acc += square ? r.e_norm * r.e_norm : r.e_norm;
      ++n;
    }
    return acc / static_cast<double>(n);
  };
  Metrics m;
  m.rmse_e = std::sqrt(mean_over(window_fraction, true));
  m.steady_e = mean_over(kSteadyFraction, false);
  for (const auto& r : rows) m.max_e = std::max(m.max_e, r.e_norm);
  m.bound_violations = log.bound_violations;
  return m;
}

struct ComparisonEntry {
  Strategy strategy = Strategy::none;
  std::optional<Metrics> metrics;
  std::optional<TrajectoryLog> log;
  std::string error;
};

/// Runs every strategy on the same plant, reference and fitted experts.
/// A failing strategy records its error; the others still run.
inline std::vector<ComparisonEntry> compare(const ScenarioConfig& cfg, const ExpertBank& bank,
                                            std::span<const Strategy> strategies,
                                            bool keep_logs = true) {
  std::vector<std::future<ComparisonEntry>> jobs;
  for (Strategy s : strategies) {
    jobs.push_back(std::async(std::launch::async, [&cfg, &bank, s, keep_logs] {
      ComparisonEntry entry;
      entry.strategy = s;
      try {
        ScenarioConfig c = cfg;
        c.strategy = s;
        auto log = run_closed_loop(c, bank);
        entry.metrics = compute_metrics(log);
        if (keep_logs) entry.log = std::move(log);
      } catch (const std::exception& ex) {
        entry.error = ex.what();
      }
      return entry;
    }));
  }
  std::vector<ComparisonEntry> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

inline std::vector<ComparisonEntry> compare(const ScenarioConfig& cfg, bool keep_logs = true) {
  return compare(cfg, ExpertBank::build(cfg), kAllStrategies, keep_logs);
}

struct ExpertCoverage {
  BoundParams bound;
  std::size_t points = 0;
  std::size_t covered = 0;  // points with |f - mu| <= eta

  double fraction() const {
    return points == 0 ? 1.0 : static_cast<double>(covered) / static_cast<double>(points);
  }
};

/// Fraction of an n x n grid over each expert's region where the bound holds.
inline std::vector<ExpertCoverage> bound_coverage(const ExpertBank& bank,
                                                  std::span<const RegionSpec> regions, int n = 50) {
  std::vector<ExpertCoverage> out;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    ExpertCoverage c;
    c.bound = bank.bound(i);
    const auto& r = regions[i];
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const MappedInput x{detail::grid_point(r.phi_lo, r.phi_hi, n, a),
                            detail::grid_point(r.omega_lo, r.omega_hi, n, b)};
        ++c.points;
        if (std::abs(true_torque(x) - bank.model(i).posterior_mean(x)) <= eta(bank.model(i), c.bound, x))
          ++c.covered;
      }
    }
    out.push_back(c);
  }
  return out;
}

struct BoundReport {
  std::vector<ExpertCoverage> coverage;
  double eta_tilde_max = 0.0;
  double ultimate_bound = 0.0;
  double steady_e = 0.0;  // coaoe-eta closed loop
  double max_e_steady = 0.0;
  bool within_bound() const { return max_e_steady <= ultimate_bound; }
};

/// Error-bound coverage per expert, the ultimate tracking-error bound and the
/// coaoe-eta steady-state error it should contain.
inline BoundReport bound_check(const ScenarioConfig& cfg, const ExpertBank& bank) {
  BoundReport rep;
  rep.coverage = bound_coverage(bank, cfg.experts);
  rep.eta_tilde_max = bank.eta_tilde_max(cfg.bound.eta_grid);
  const auto clm = ClosedLoopMatrices::make(cfg.gains, cfg.Q, cfg.motor);
  rep.ultimate_bound = ultimate_bound(clm.P, clm.Q, cfg.motor.J, rep.eta_tilde_max);
  ScenarioConfig c = cfg;
  c.strategy = Strategy::coaoe_eta;
  const auto log = run_closed_loop(c, bank);
  rep.steady_e = compute_metrics(log).steady_e;
  const double start = log.rows.back().t * (1.0 - kSteadyFraction);
  for (const auto& r : log.rows) {
    if (r.t + 1e-12 >= start) rep.max_e_steady = std::max(rep.max_e_steady, r.e_norm);
  }
  return rep;
}

inline void write_bound_report(std::ostream& os, const BoundReport& rep) {
  os << std::setprecision(10);
  for (std::size_t i = 0; i < rep.coverage.size(); ++i) {
    const auto& c = rep.coverage[i];
    os << "expert " << i + 1 << ": beta=" << c.bound.beta << " gamma=" << c.bound.gamma
       << " L_mu=" << c.bound.L_mu << " L_sigma=" << c.bound.L_sigma << " L_k=" << c.bound.L_k
       << " coverage=" << c.fraction() << " (" << c.covered << "/" << c.points << ")\n";
  }
  os << "eta_tilde_max=" << rep.eta_tilde_max << '\n'
     << "ultimate_bound=" << rep.ultimate_bound << '\n'
     << "coaoe_eta_steady_e=" << rep.steady_e << '\n'
     << "coaoe_eta_max_steady_e=" << rep.max_e_steady << '\n'
     << "within_bound=" << (rep.within_bound() ? "yes" : "no") << '\n';
}

}  // namespace pmsm_gp
