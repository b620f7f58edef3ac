#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedbayes/data.hpp"
#include "fedbayes/mechanisms.hpp"
#include "fedbayes/priors.hpp"

namespace fedbayes {

// Result of one personalized-estimation pass over a Gaussian population.
// estimates holds client i's d-vector at [i*d, (i+1)*d). The two empirical
// MSE figures differ only when the channel projection actually clipped a
// client: mse_unclipped conditions on the clip having stayed inactive, which
// is the event the closed-form error analysis assumes.
struct GaussEstimateReport {
  int m = 0;
  int d = 0;
  double a = 0.0;
  std::vector<double> estimates;
  std::vector<double> mu_hat;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
  double mse_unclipped = 0.0;
  int clipped_clients = 0;
  double theoretical_mse = 0.0;
  std::string mechanism = "identity";
  bool epsilon_out_of_range = false;
};

// Weight on the local average: (s_t + s_q/(m-1)) / (s_t + s_q/(m-1) + s_x/n),
// which collapses to s_t / (s_t + s_x/n) over a noiseless channel.
double shrinkage_weight(double sigma_theta_sq, double sigma_x_sq, std::int64_t n,
                        double sigma_q_sq, std::int64_t m);

// theta_hat_i = a*Xbar_i + (1-a)*mu_hat with mu_hat the plain average of the
// client means; exact population MSE attached when the dataset carries a
// Gaussian prior.
GaussEstimateReport personalized_gaussian(const SyntheticDataset& data, double a);

// d * (s_x/n) * ((1-a)/m + a).
double theoretical_mse_gaussian(const GaussianPrior& prior, std::int64_t n, std::int64_t m,
                                double a);

// Channel-constrained variant: every client projects its mean to the
// mechanism's range per coordinate, pushes it through the channel, and the
// server averages the channel outputs instead of the raw means.
GaussEstimateReport constrained_personalized_gaussian(const SyntheticDataset& data,
                                                      const MechanismSpec& mechanism,
                                                      std::uint64_t seed);

// High-probability bound on |Xbar| coordinates: r + (sigma_theta +
// sigma_x/sqrt(n)) * sqrt(log(m^2 n)).
double clip_radius_b(double r, double sigma_theta, double sigma_x, std::int64_t n,
                     std::int64_t m);

enum class VanTreesMode { known_prior, estimated_mean };

// Bayesian Cramer-Rao floor for the per-client MSE.
double van_trees_bound(double sigma_theta_sq, double sigma_x_sq, std::int64_t n, int d,
                       std::int64_t m, VanTreesMode mode);

}  // namespace fedbayes
