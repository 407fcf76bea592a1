// Exact GP regression with a squared-exponential kernel and the uniform
// prediction-error bound eta(x) = sqrt(beta) sigma(x) + gamma.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "pmsm_gp/dynamics.hpp"

namespace pmsm_gp {

/// Thrown when K + sigma_T^2 I is not numerically positive definite.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SEKernel {
  double sigma_f = 1.0;
  double ell = 0.2;

  void validate() const {
    if (!(sigma_f > 0.0)) throw std::invalid_argument("SEKernel: sigma_f must be > 0");
    if (!(ell > 0.0)) throw std::invalid_argument("SEKernel: length scale must be > 0");
  }

  double operator()(const MappedInput& a, const MappedInput& b) const {
    const double dp = a.phi_m - b.phi_m;
    const double dw = a.omega_m - b.omega_m;
    return sigma_f * sigma_f * std::exp(-(dp * dp + dw * dw) / (2.0 * ell * ell));
  }
};

inline double kernel_eval(const SEKernel& k, const MappedInput& x, const MappedInput& x2) {
  return k(x, x2);
}

struct Dataset {
  std::vector<MappedInput> inputs;
  std::vector<double> outputs;
  double noise_std = 0.0;

  std::size_t size() const { return inputs.size(); }

  void validate(const Domain& domain = kInputDomain) const {
    if (inputs.size() != outputs.size())
      throw std::invalid_argument("Dataset: inputs and outputs differ in length");
    if (inputs.empty()) throw std::invalid_argument("Dataset: empty");
    if (!(noise_std >= 0.0)) throw std::invalid_argument("Dataset: noise_std must be >= 0");
    for (const auto& x : inputs) {
      if (!domain.contains(x))
        throw std::invalid_argument("Dataset: input outside the GP domain");
    }
  }
};

/// A fitted GP expert. Immutable after fit(); queries are thread-safe.
class GPModel {
 public:
  static GPModel fit(Dataset dataset, const SEKernel& kernel) {
    dataset.validate();
    kernel.validate();
    GPModel m;
    m.dataset_ = std::move(dataset);
    m.kernel_ = kernel;
    const auto n = static_cast<Eigen::Index>(m.dataset_.size());
    m.phi_.resize(n);
    m.omega_.resize(n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m.phi_[i] = m.dataset_.inputs[i].phi_m;
      m.omega_[i] = m.dataset_.inputs[i].omega_m;
      y[i] = m.dataset_.outputs[i];
    }
    Eigen::MatrixXd gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        gram(i, j) = gram(j, i) = kernel(m.dataset_.inputs[i], m.dataset_.inputs[j]);
      }
    }
    gram.diagonal().array() += m.dataset_.noise_std * m.dataset_.noise_std;
    m.llt_.compute(gram);
    if (m.llt_.info() != Eigen::Success) {
      throw FactorizationError(
          "GP fit: K + sigma_T^2 I is not positive definite (duplicate inputs with zero "
          "noise?); add jitter to noise_std");
    }
    m.alpha_ = m.llt_.solve(y);
    return m;
  }

  const Dataset& dataset() const { return dataset_; }
  const SEKernel& kernel() const { return kernel_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::LLT<Eigen::MatrixXd>& factorization() const { return llt_; }
  std::size_t size() const { return dataset_.size(); }

  Eigen::VectorXd kernel_vector(const MappedInput& x) const {
    const double s2 = kernel_.sigma_f * kernel_.sigma_f;
    const double inv = -0.5 / (kernel_.ell * kernel_.ell);
    return (s2 * (inv * ((phi_.array() - x.phi_m).square() + (omega_.array() - x.omega_m).square()))
                     .exp())
        .matrix();
  }

  double posterior_mean(const MappedInput& x) const { return kernel_vector(x).dot(alpha_); }

  /// Posterior variance, clamped at zero against round-off.
  double posterior_var(const MappedInput& x) const {
    Eigen::VectorXd v = kernel_vector(x);
    llt_.matrixL().solveInPlace(v);
    const double var = kernel_(x, x) - v.squaredNorm();
    return var > 0.0 ? var : 0.0;
  }

 private:
  GPModel() = default;

  Dataset dataset_;
  SEKernel kernel_;
  Eigen::VectorXd phi_;
  Eigen::VectorXd omega_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

/// L_mu = L_k sqrt(M) ||(K + sigma_T^2 I)^{-1} Y||.
inline double lipschitz_mu(const GPModel& model, double L_k) {
  return L_k * std::sqrt(static_cast<double>(model.size())) * model.alpha().norm();
}

/// Lipschitz constant of the posterior standard deviation for the SE kernel.
inline double lipschitz_sigma_se(const SEKernel& k) { return std::sqrt(2.0) * k.sigma_f / k.ell; }

/// Maximum gradient norm of the SE kernel, attained at distance ell.
inline double lipschitz_kernel_se(const SEKernel& k) {
  return k.sigma_f * k.sigma_f / k.ell * std::exp(-0.5);
}

inline double compute_beta(double delta, double tau, const Domain& domain = kInputDomain) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta: delta must be in (0,1)");
  if (!(tau > 0.0)) throw std::invalid_argument("beta: tau must be > 0");
  const double c = 1.0 / (std::sqrt(2.0) * tau);
  return 2.0 * (std::log(c * (domain.phi_hi - domain.phi_lo) + 1.0) +
                std::log(c * (domain.omega_hi - domain.omega_lo) + 1.0)) -
         2.0 * std::log(delta);
}

inline double compute_gamma(double beta, double L_sigma, double L_f, double L_mu, double tau) {
  return (std::sqrt(beta) * L_sigma + L_f + L_mu) * tau;
}

struct BoundParams {
  double delta = 0.01;
  double tau = 0.01;
  double L_f = kTrueTorqueLipschitz;
  double beta = 0.0;
  double gamma = 0.0;
  double L_mu = 0.0;
  double L_sigma = 0.0;
  double L_k = 0.0;
};

/// Evaluates every constant of the error bound for one fitted expert.
inline BoundParams make_bound_params(const GPModel& model, double delta, double tau, double L_f,
                                     const Domain& domain = kInputDomain) {
  if (!(L_f >= 0.0)) throw std::invalid_argument("bound: L_f must be >= 0");
  BoundParams bp;
  bp.delta = delta;
  bp.tau = tau;
  bp.L_f = L_f;
  bp.beta = compute_beta(delta, tau, domain);
  bp.L_k = lipschitz_kernel_se(model.kernel());
  bp.L_sigma = lipschitz_sigma_se(model.kernel());
  bp.L_mu = lipschitz_mu(model, bp.L_k);
  bp.gamma = compute_gamma(bp.beta, bp.L_sigma, bp.L_f, bp.L_mu, tau);
  return bp;
}

inline double eta_from_variance(const BoundParams& bp, double variance) {
  return std::sqrt(bp.beta) * std::sqrt(variance) + bp.gamma;
}

inline double eta(const GPModel& model, const BoundParams& bp, const MappedInput& x) {
  return eta_from_variance(bp, model.posterior_var(x));
}

}  // namespace pmsm_gp
