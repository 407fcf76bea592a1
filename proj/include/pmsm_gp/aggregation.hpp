// Fusion of distributed GP expert predictions.
//
// All strategies produce weights on the probability simplex. The two
// control-aware strategies pick a single simplex vertex:
//   coaoe-mean  maximizes (e^T P B_in) h^T w, the only w-dependent term of
//               -dV/dt; only the expert means are used. With B_in = -b / J this
//               is the vertex at min_j of h_j (b^T P e).
//   coaoe-eta   minimizes sum_i w_i eta_i, the weighted error bound.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pmsm_gp/control.hpp"

namespace pmsm_gp {

/// Per-expert predictions at one query point. Variances and bounds are only
/// present when the strategy asked for them.
struct ExpertOutputs {
  std::vector<double> means;
  std::optional<std::vector<double>> variances;
  std::optional<std::vector<double>> etas;

  std::size_t size() const { return means.size(); }
};

struct Weights {
  std::vector<double> w;

  std::size_t size() const { return w.size(); }
  double sum() const {
    double s = 0.0;
    for (double v : w) s += v;
    return s;
  }
  static Weights vertex(std::size_t n, std::size_t j) {
    Weights out{std::vector<double>(n, 0.0)};
    out.w.at(j) = 1.0;
    return out;
  }
};

enum class Strategy { none, moe, gpoe, coaoe_mean, coaoe_eta };

inline constexpr Strategy kAllStrategies[] = {Strategy::none, Strategy::moe, Strategy::gpoe,
                                              Strategy::coaoe_mean, Strategy::coaoe_eta};

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::moe: return "moe";
    case Strategy::gpoe: return "gpoe";
    case Strategy::coaoe_mean: return "coaoe-mean";
    case Strategy::coaoe_eta: return "coaoe-eta";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

inline bool needs_variance(Strategy s) { return s == Strategy::gpoe || s == Strategy::coaoe_eta; }

inline double aggregate_mean(const ExpertOutputs& outputs, const Weights& w) {
  if (outputs.size() != w.size())
    throw std::invalid_argument("aggregate_mean: " + std::to_string(outputs.size()) +
                                " predictions but " + std::to_string(w.size()) + " weights");
  double t = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) t += w.w[i] * outputs.means[i];
  return t;
}

inline Weights moe_weights(std::size_t n) {
  if (n == 0) throw std::invalid_argument("moe_weights: need at least one expert");
  return Weights{std::vector<double>(n, 1.0 / static_cast<double>(n))};
}

struct GpoeResult {
  double mu = 0.0;
  double sigma = 0.0;
  /// Effective weights w_i sigma^2 / sigma_i^2 applied to the means (sum to 1).
  Weights effective;
};

/// Generalized product of experts in precision-weighted form:
/// sigma^2 = 1 / sum w_i sigma_i^-2,  mu = sigma^2 sum w_i sigma_i^-2 mu_i.
/// An expert with zero variance dominates: its mean is returned with sigma = 0.
inline GpoeResult gpoe_aggregate(const ExpertOutputs& outputs, const Weights& w) {
  if (!outputs.variances) throw std::invalid_argument("gpoe_aggregate: variances required");
  const auto& var = *outputs.variances;
  const std::size_t n = outputs.size();
  if (var.size() != n || w.size() != n)
    throw std::invalid_argument("gpoe_aggregate: length mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (var[i] == 0.0 && w.w[i] > 0.0) return {outputs.means[i], 0.0, Weights::vertex(n, i)};
  }
  double precision = 0.0;
  for (std::size_t i = 0; i < n; ++i) precision += w.w[i] / var[i];
  const double sigma2 = 1.0 / precision;
  GpoeResult r;
  r.sigma = std::sqrt(sigma2);
  r.effective.w.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.effective.w[i] = sigma2 * w.w[i] / var[i];
    r.mu += r.effective.w[i] * outputs.means[i];
  }
  return r;
}

namespace detail {

template <typename Better>
std::size_t best_index(std::span<const double> v, Better better) {
  std::size_t j = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (better(v[i], v[j])) j = i;
  }
  return j;
}

}  // namespace detail

/// theta = h(x_m) (e^T P B_in).
inline std::vector<double> coaoe_theta(const ExpertOutputs& outputs, const Mat2& P,
                                       const Vec2& B_in, const TrackingError& e) {
  const double s = e.e.dot(P * B_in);
  std::vector<double> theta(outputs.means);
  for (double& t : theta) t *= s;
  return theta;
}

/// Simplex vertex maximizing theta^T w; lowest index wins ties.
inline Weights coaoe_mean_weights(const ExpertOutputs& outputs, const Mat2& P,
                                  const Vec2& B_in, const TrackingError& e) {
  if (outputs.means.empty()) throw std::invalid_argument("coaoe_mean_weights: no experts");
  const auto theta = coaoe_theta(outputs, P, B_in, e);
  const auto j = detail::best_index(theta, [](double a, double best) { return a > best; });
  return Weights::vertex(theta.size(), j);
}

/// Simplex vertex at the smallest error bound; lowest index wins ties.
inline Weights coaoe_eta_weights(const ExpertOutputs& outputs) {
  if (!outputs.etas) throw std::invalid_argument("coaoe_eta_weights: error bounds required");
  const auto& eta = *outputs.etas;
  if (eta.empty()) throw std::invalid_argument("coaoe_eta_weights: no experts");
  const auto j = detail::best_index(eta, [](double a, double best) { return a < best; });
  return Weights::vertex(eta.size(), j);
}

/// min_i eta_i, the bound achieved by coaoe_eta_weights.
inline double eta_tilde(const ExpertOutputs& outputs) {
  if (!outputs.etas || outputs.etas->empty())
    throw std::invalid_argument("eta_tilde: error bounds required");
  return *std::min_element(outputs.etas->begin(), outputs.etas->end());
}

/// dV/dt = -e^T Q e + 2 e^T P B (T - T_hat) along the error dynamics.
inline double vdot_value(const TrackingError& e, const Mat2& P, const Mat2& Q, const Vec2& B_in,
                         double T_true, double T_hat) {
  return -e.e.dot(Q * e.e) + 2.0 * e.e.dot(P * B_in) * (T_true - T_hat);
}

namespace detail {

inline Eigen::Vector2d sym_eigenvalues(const Mat2& M) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues();  // ascending
}

}  // namespace detail

/// Radius of the ball the tracking error ultimately enters:
/// 2 sqrt(lmax(P)/lmin(P)) ||P|| / (J lmin(Q)) eta_max.
inline double ultimate_bound(const Mat2& P, const Mat2& Q, double J, double eta_max) {
  const auto lp = detail::sym_eigenvalues(P);
  const auto lq = detail::sym_eigenvalues(Q);
  if (!(lp[0] > 0.0 && lq[0] > 0.0))
    throw std::invalid_argument("ultimate_bound: P and Q must be positive definite");
  return 2.0 * std::sqrt(lp[1] / lp[0]) * lp[1] / (J * lq[0]) * eta_max;
}

/// Error norm above which the bound on dV/dt is negative: 2 ||P|| eta / (J lmin(Q)).
inline double decrease_radius(const Mat2& P, const Mat2& Q, double J, double eta) {
  const auto lp = detail::sym_eigenvalues(P);
  const auto lq = detail::sym_eigenvalues(Q);
  return 2.0 * lp[1] / (J * lq[0]) * eta;
}

}  // namespace pmsm_gp
