#include <cmath>
#include <random>
#include <vector>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "pmsm_gp/gp.hpp"

namespace pmsm_gp {
namespace {

Dataset RandomDataset(std::mt19937_64& rng, int m, double noise_std) {
  std::uniform_real_distribution<double> phi(-kPi, kPi), om(-1.0, 1.0), y(-5.0, 15.0);
  Dataset d;
  d.noise_std = noise_std;
  for (int i = 0; i < m; ++i) {
    d.inputs.push_back({phi(rng), om(rng)});
    d.outputs.push_back(y(rng));
  }
  return d;
}

// Posterior from an explicit inverse of the regularized Gram matrix.
struct DenseOracle {
  Eigen::MatrixXd Kinv;
  Eigen::VectorXd y;
  const Dataset* d;
  SEKernel k;

  DenseOracle(const Dataset& data, const SEKernel& kernel) : d(&data), k(kernel) {
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd K(n, n);
    y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y[i] = data.outputs[i];
      for (Eigen::Index j = 0; j < n; ++j) K(i, j) = k(data.inputs[i], data.inputs[j]);
      K(i, i) += data.noise_std * data.noise_std;
    }
    Kinv = K.inverse();
  }

  Eigen::VectorXd kv(const MappedInput& x) const {
    Eigen::VectorXd v(y.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = k(d->inputs[i], x);
    return v;
  }
  double mean(const MappedInput& x) const { return kv(x).dot(Kinv * y); }
  double var(const MappedInput& x) const {
    const auto v = kv(x);
    return k(x, x) - v.dot(Kinv * v);
  }
};

TEST(KernelTest, Examples) {
  const SEKernel k;
  EXPECT_EQ(kernel_eval(k, {0.3, 0.1}, {0.3, 0.1}), 1.0);
  EXPECT_NEAR(kernel_eval(k, {0.0, 0.0}, {0.2, 0.0}), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(kernel_eval(k, {0.0, 0.0}, {0.12, 0.16}), 0.60653, 1e-5);
}

TEST(KernelTest, RejectsInvalidHyperparameters) {
  EXPECT_THROW((SEKernel{0.0, 0.2}.validate()), std::invalid_argument);
  EXPECT_THROW((SEKernel{1.0, -1.0}.validate()), std::invalid_argument);
}

TEST(FitTest, SinglePointClosedForm) {
  const double y0 = 3.0, s = 0.5;
  const auto m = GPModel::fit({{{0.1, 0.2}}, {y0}, s}, SEKernel{});
  EXPECT_NEAR(m.alpha()[0], y0 / (1.0 + s * s), 1e-15);
  EXPECT_NEAR(m.posterior_mean({0.1, 0.2}), y0 / (1.0 + s * s), 1e-15);
  EXPECT_NEAR(m.posterior_var({0.1, 0.2}), 1.0 - 1.0 / (1.0 + s * s), 1e-15);
  EXPECT_NEAR(lipschitz_mu(m, 2.0), 2.0 * y0 / (1.0 + s * s), 1e-14);
}

TEST(FitTest, DuplicateNoiseFreeInputsFailToFactorize) {
  const Dataset d{{{0.5, 0.5}, {0.5, 0.5}}, {1.0, 1.0}, 0.0};
  try {
    GPModel::fit(d, SEKernel{});
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& ex) {
    EXPECT_NE(std::string(ex.what()).find("jitter"), std::string::npos);
  }
}

TEST(FitTest, RejectsInvalidDatasets) {
  const SEKernel k;
  EXPECT_THROW(GPModel::fit({{}, {}, 0.1}, k), std::invalid_argument);
  EXPECT_THROW(GPModel::fit({{{0.0, 0.0}}, {1.0, 2.0}, 0.1}, k), std::invalid_argument);
  EXPECT_THROW(GPModel::fit({{{0.0, 0.0}}, {1.0}, -0.1}, k), std::invalid_argument);
  EXPECT_THROW(GPModel::fit({{{4.0, 0.0}}, {1.0}, 0.1}, k), std::invalid_argument);
  EXPECT_THROW(GPModel::fit({{{0.0, 1.5}}, {1.0}, 0.1}, k), std::invalid_argument);
}

TEST(PosteriorTest, MatchesDenseInverseOracle) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> phi(-kPi, kPi), om(-1.0, 1.0);
  std::uniform_int_distribution<int> size(1, 50);
  const SEKernel k;
  for (int trial = 0; trial < 40; ++trial) {
    const int m = trial == 0 ? 20 : size(rng);
    const auto d = RandomDataset(rng, m, 0.1);
    const auto model = GPModel::fit(d, k);
    const DenseOracle oracle(d, k);
    for (int q = 0; q < 20; ++q) {
      const MappedInput x{phi(rng), om(rng)};
      const double mu = oracle.mean(x), var = oracle.var(x);
      EXPECT_NEAR(model.posterior_mean(x), mu, 1e-8 * std::max(1.0, std::abs(mu)));
      EXPECT_NEAR(model.posterior_var(x), var, 1e-8 * std::max(1.0, std::abs(var)));
    }
  }
}

TEST(PosteriorTest, NoiseFreeInterpolation) {
  Dataset d;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 3; ++j) {
      const MappedInput x{-2.0 + i, -1.0 + j};
      d.inputs.push_back(x);
      d.outputs.push_back(std::sin(x.phi_m) + x.omega_m);
    }
  }
  const auto m = GPModel::fit(d, SEKernel{});
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(m.posterior_mean(d.inputs[i]), d.outputs[i], 1e-10);
    EXPECT_NEAR(m.posterior_var(d.inputs[i]), 0.0, 1e-12);
  }
}

TEST(PosteriorTest, RevertsToPriorFarFromData) {
  Dataset d{{{-3.0, -1.0}, {-2.9, -0.9}}, {10.0, 12.0}, 0.01};
  const auto m = GPModel::fit(d, SEKernel{});
  const MappedInput far{3.0, 1.0};
  EXPECT_LT(std::abs(m.posterior_mean(far)), 1e-6 * 12.0);
  EXPECT_NEAR(m.posterior_var(far), 1.0, 1e-12);
}

TEST(PosteriorTest, VarianceWithinPriorAndNonNegative) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phi(-kPi, kPi), om(-1.0, 1.0);
  const auto d = RandomDataset(rng, 40, 0.01);
  const auto m = GPModel::fit(d, SEKernel{});
  for (int q = 0; q < 2000; ++q) {
    const double v = m.posterior_var({phi(rng), om(rng)});
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(PosteriorTest, MoreDataNeverIncreasesVariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> phi(-kPi, kPi), om(-1.0, 1.0);
  const auto big = RandomDataset(rng, 30, 0.05);
  Dataset small{{big.inputs.begin(), big.inputs.begin() + 15},
                {big.outputs.begin(), big.outputs.begin() + 15}, 0.05};
  const auto ms = GPModel::fit(small, SEKernel{});
  const auto mb = GPModel::fit(big, SEKernel{});
  for (int q = 0; q < 500; ++q) {
    const MappedInput x{phi(rng), om(rng)};
    EXPECT_LE(mb.posterior_var(x), ms.posterior_var(x) + 1e-12);
  }
}

TEST(PosteriorTest, RefitIsBitwiseIdentical) {
  std::mt19937_64 rng(9);
  const auto d = RandomDataset(rng, 25, 0.1);
  const auto a = GPModel::fit(d, SEKernel{});
  const auto b = GPModel::fit(d, SEKernel{});
  for (double phi : {-2.0, 0.0, 1.3}) {
    EXPECT_EQ(a.posterior_mean({phi, 0.3}), b.posterior_mean({phi, 0.3}));
    EXPECT_EQ(a.posterior_var({phi, 0.3}), b.posterior_var({phi, 0.3}));
  }
}

TEST(LipschitzTest, SquaredExponentialConstants) {
  const SEKernel se;
  EXPECT_DOUBLE_EQ(lipschitz_sigma_se(se), 5.0 * std::sqrt(2.0));
  EXPECT_NEAR(lipschitz_sigma_se(se), 7.0711, 1e-4);
  EXPECT_DOUBLE_EQ(lipschitz_kernel_se(se), 5.0 * std::exp(-0.5));
  EXPECT_NEAR(lipschitz_kernel_se(se), 3.0327, 1e-4);
  EXPECT_DOUBLE_EQ(lipschitz_sigma_se({1.0, 1.0}), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(lipschitz_kernel_se({1.0, 1.0}), std::exp(-0.5));
}

TEST(LipschitzTest, KernelConstantBoundsNumericalGradient) {
  // Gradient of k(x, 0) in x over a fine radial grid.
  const SEKernel k;
  double worst = 0.0;
  const double h = 1e-7;
  for (int i = 0; i <= 20000; ++i) {
    const double r = 1.0 * i / 20000.0;
    const double g = (k({r + h, 0.0}, {0.0, 0.0}) - k({r - h, 0.0}, {0.0, 0.0})) / (2 * h);
    worst = std::max(worst, std::abs(g));
  }
  EXPECT_LE(worst, lipschitz_kernel_se(k) + 1e-8);
  EXPECT_NEAR(worst, lipschitz_kernel_se(k), 1e-6);
}

TEST(LipschitzTest, MeanConstantIsLinearInOutputs) {
  std::mt19937_64 rng(1);
  auto d = RandomDataset(rng, 10, 0.1);
  const double base = lipschitz_mu(GPModel::fit(d, SEKernel{}), 3.0);
  for (double& y : d.outputs) y *= -2.5;
  EXPECT_NEAR(lipschitz_mu(GPModel::fit(d, SEKernel{}), 3.0), 2.5 * base, 1e-10 * base);
  for (double& y : d.outputs) y = 0.0;
  EXPECT_EQ(lipschitz_mu(GPModel::fit(d, SEKernel{}), 3.0), 0.0);
}

TEST(LipschitzTest, MeanConstantBoundsNumericalGradient) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> phi(-kPi, kPi), om(-1.0, 1.0);
  const auto m = GPModel::fit(RandomDataset(rng, 30, 0.1), SEKernel{});
  const double L = lipschitz_mu(m, lipschitz_kernel_se(m.kernel()));
  const double h = 1e-6;
  for (int q = 0; q < 2000; ++q) {
    const MappedInput x{phi(rng), om(rng)};
    const double gp = (m.posterior_mean({x.phi_m + h, x.omega_m}) -
                       m.posterior_mean({x.phi_m - h, x.omega_m})) / (2 * h);
    const double gw = (m.posterior_mean({x.phi_m, x.omega_m + h}) -
                       m.posterior_mean({x.phi_m, x.omega_m - h})) / (2 * h);
    EXPECT_LE(std::hypot(gp, gw), L);
  }
}

TEST(BoundTest, BetaForValidationDomain) {
  // 2 (log(2 pi / (sqrt(2) 0.01) + 1) + log(2 / (sqrt(2) 0.01) + 1)) - 2 log 0.01.
  EXPECT_NEAR(compute_beta(0.01, 0.01), 31.32536414194081, 1e-12);
  EXPECT_NEAR(compute_beta(0.01, 0.01), 31.33, 5e-3);
}

TEST(BoundTest, BetaVanishesOnPointDomainAsDeltaApproachesOne) {
  const Domain point{0.0, 0.0, 0.0, 0.0};
  const double b = compute_beta(1.0 - 1e-12, 0.01, point);
  EXPECT_GT(b, 0.0);
  EXPECT_LT(b, 1e-10);
}

TEST(BoundTest, BetaRejectsInvalidArguments) {
  EXPECT_THROW(compute_beta(0.0, 0.01), std::invalid_argument);
  EXPECT_THROW(compute_beta(1.0, 0.01), std::invalid_argument);
  EXPECT_THROW(compute_beta(0.01, 0.0), std::invalid_argument);
}

TEST(BoundTest, GammaExamples) {
  EXPECT_DOUBLE_EQ(compute_gamma(4.0, 1.0, 1.0, 1.0, 0.5), 2.0);
  EXPECT_EQ(compute_gamma(31.3, 7.07, 2.0, 100.0, 0.0), 0.0);
}

TEST(BoundTest, EtaLimits) {
  Dataset d{{{-3.0, -1.0}, {0.0, 0.0}}, {10.0, 11.0}, 0.0};
  const auto m = GPModel::fit(d, SEKernel{});
  const auto bp = make_bound_params(m, 0.01, 0.01, kTrueTorqueLipschitz);
  EXPECT_NEAR(eta(m, bp, {0.0, 0.0}), bp.gamma, 1e-6);
  EXPECT_NEAR(eta(m, bp, {3.0, 1.0}), std::sqrt(bp.beta) + bp.gamma, 1e-9);
  EXPECT_EQ(eta_from_variance(bp, 0.0), bp.gamma);
}

TEST(BoundTest, BoundParamsCombineConstants) {
  std::mt19937_64 rng(2);
  const auto m = GPModel::fit(RandomDataset(rng, 20, 0.1), SEKernel{});
  const auto bp = make_bound_params(m, 0.01, 0.01, 2.0002);
  EXPECT_EQ(bp.beta, compute_beta(0.01, 0.01));
  EXPECT_EQ(bp.L_sigma, lipschitz_sigma_se(m.kernel()));
  EXPECT_EQ(bp.L_k, lipschitz_kernel_se(m.kernel()));
  EXPECT_EQ(bp.L_mu, lipschitz_mu(m, bp.L_k));
  EXPECT_NEAR(bp.gamma, (std::sqrt(bp.beta) * bp.L_sigma + 2.0002 + bp.L_mu) * 0.01, 1e-12);
  EXPECT_THROW(make_bound_params(m, 0.01, 0.01, -1.0), std::invalid_argument);
}

}  // namespace
}  // namespace pmsm_gp
