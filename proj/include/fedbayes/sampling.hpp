#pragma once

#include <cstdint>

#include "fedbayes/data.hpp"
#include "fedbayes/priors.hpp"
#include "fedbayes/rng.hpp"

namespace fedbayes {

// All samplers draw per-client substreams keyed by (seed, client_id), so a
// client's data depends only on its id and the seed: reruns are bit-identical
// and relabeling clients permutes datasets without changing them.

// theta_i ~ N(mu, sigma_theta_sq I), X_ij ~ N(theta_i, sigma_x_sq I)
SyntheticDataset sample_gaussian_population(const GaussianPrior& prior, std::int64_t m, std::int64_t n,
                                            std::uint64_t seed);

// p_i ~ prior, X_ij ~ Bernoulli(p_i) stored as 0/1 doubles
SyntheticDataset sample_bernoulli_population(const ScalarPrior& prior, std::int64_t m, std::int64_t n,
                                             std::uint64_t seed);

// theta_i = centers[l] with probability probs[l]; X_ij ~ N(theta_i, sigma_x_sq I)
SyntheticDataset sample_mixture_population(const DiscretePrior& prior, std::int64_t m, std::int64_t n,
                                           double sigma_x_sq, std::uint64_t seed);

// theta_i ~ N(mu, sigma_theta_sq I); features X_ij ~ N(0, feature_sd^2) i.i.d.;
// responses y_ij = <X_ij, theta_i> + w_ij with w_ij ~ N(0, sigma_x_sq)
SyntheticDataset sample_regression_population(const GaussianPrior& prior, std::int64_t m, std::int64_t n,
                                              double feature_sd, std::uint64_t seed);

// standalone scalar draws (also used by the samplers)
double scalar_prior_draw(const ScalarPrior& prior, Rng& rng);
double gamma_draw(Rng& rng, double shape);
double beta_draw(Rng& rng, double alpha, double beta);

}  // namespace fedbayes
