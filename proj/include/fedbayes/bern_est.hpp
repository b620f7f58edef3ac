#pragma once

#include <cstdint>
#include <vector>

#include "fedbayes/data.hpp"

namespace fedbayes {

// Leave-self-out prior moments over the published per-client rates, plus the
// resulting combination weight for one client. sigma_hat_sq_i is floored at
// kVarianceFloor and a_hat_i is clamped to [0,1].
struct MomentEstimates {
  double mu_hat_i = 0.0;
  double sigma_hat_sq_i = 0.0;
  double a_hat_i = 0.0;
};

inline constexpr double kVarianceFloor = 1e-12;

// Output of the Bernoulli-rate estimators. estimates[i] is client i's
// combined rate, clamped to [0,1]. local_mse is the empirical risk of the raw
// per-client rates on the same data; gain_pct = 100 * (1 - mse / local_mse).
struct BernEstimateReport {
  std::int64_t m = 0;
  std::int64_t n = 0;
  std::vector<double> estimates;
  std::vector<MomentEstimates> moments;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
  double local_mse = 0.0;
  double gain_pct = 0.0;
  double epsilon0 = 0.0;  // 0 for the non-private estimator
};

// Posterior mean of a rate under a known Beta(alpha, beta) prior after
// observing z successes in n trials: (alpha + z) / (alpha + beta + n).
double posterior_mean_known(double alpha, double beta, std::int64_t n, std::int64_t z);

// Exact Bayes risk of posterior_mean_known and of the raw empirical rate.
struct KnownPriorRisk {
  double mse = 0.0;          // local_mse * gain_factor
  double local_mse = 0.0;    // alpha*beta / (n (alpha+beta)(alpha+beta+1))
  double gain_factor = 0.0;  // n / (n + alpha + beta)
};
KnownPriorRisk mse_known(double alpha, double beta, std::int64_t n);

// Leave-self-out mean and variance of `published` (one value per client)
// excluding index i, and the weight for client i. The default weight is
// n / (mu(1-mu)/sigma^2 - 1 + n); with private_weights the -1 is dropped and
// the mean is projected onto [0,1] before forming mu(1-mu), matching the
// published-value channel it is paired with. Requires published.size() >= 3.
MomentEstimates moment_weights(const std::vector<double>& published, std::int64_t n, std::int64_t i,
                               bool private_weights = false);

// Per-client shrinkage of the empirical rate toward the leave-self-out mean,
// with data-driven weights. Dataset must be a binary population (d = 1).
BernEstimateReport personalized_bernoulli(const SyntheticDataset& data);

// Same estimator, but each client publishes a randomized binary response of
// its rate (budget epsilon0) and the moments are formed from the published
// values. Client i's own rate enters its estimate unperturbed.
BernEstimateReport private_personalized_bernoulli(const SyntheticDataset& data, double epsilon0,
                                                  std::uint64_t seed);

}  // namespace fedbayes
