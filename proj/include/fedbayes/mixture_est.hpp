#pragma once

#include <cstdint>
#include <vector>

#include "fedbayes/data.hpp"
#include "fedbayes/mechanisms.hpp"
#include "fedbayes/priors.hpp"
#include "fedbayes/rng.hpp"

namespace fedbayes {

// Per-component posterior weights for one client; nonnegative, sum to 1.
using PosteriorWeights = std::vector<double>;

// Output of one clustering pass. centers is k*d (component l at [l*d, (l+1)*d)),
// probs are the cluster-size fractions, assignment maps each input point to a
// component, and inertia_path records the objective after every Lloyd update.
struct ClusterModel {
  std::int64_t k = 0;
  std::int64_t d = 0;
  std::vector<double> centers;
  std::vector<double> probs;
  std::vector<int> assignment;
  double inertia = 0.0;
  std::vector<double> inertia_path;
};

// Minimum-cost pairing of two equal-sized center sets under the Euclidean
// distance; assignment[row in a] = column in b.
struct CenterMatching {
  std::vector<int> assignment;
  double total_cost = 0.0;
};

// Output of the alternating-minimization estimator. estimates is m*d; rounds
// holds the server-side cluster model broadcast at each round.
struct AltMinResult {
  std::int64_t m = 0;
  std::int64_t d = 0;
  std::vector<double> estimates;
  std::vector<ClusterModel> rounds;
  double empirical_mse = 0.0;
  double empirical_mse_stderr = 0.0;
  double local_mse = 0.0;
  double gain_pct = 0.0;
};

// Optional lossy channel applied to each client's parameter upload before the
// server clusters. clip_radius > 0 first projects onto that L2 ball.
struct UploadChannel {
  MechanismSpec mechanism;
  double clip_radius = 0.0;
};

// Posterior component weights of one client's data under a known discrete
// prior: w_l proportional to p_l exp(-sum_j ||X_ij - mu_l||^2 / (2 sigma_x_sq)),
// evaluated in log space with max subtraction.
PosteriorWeights posterior_weights(const ClientDataset& client, const DiscretePrior& prior,
                                   double sigma_x_sq);

// Convex combination of the prior centers under the given weights.
std::vector<double> posterior_mean_mixture(const PosteriorWeights& weights, const DiscretePrior& prior);

// Lloyd iterations from distance-weighted seeding. points is count*d. A
// cluster left empty after an assignment pass is reseeded at the point
// farthest from its current center.
ClusterModel lloyd_cluster(const std::vector<double>& points, std::int64_t count, std::int64_t d,
                           std::int64_t k, Rng& rng, int max_iters = 100);

// Alternating minimization when the discrete prior is unknown: parameters
// start at the local means; each round the server clusters the (optionally
// channel-degraded) parameter uploads and every client re-estimates against
// the broadcast mixture.
AltMinResult alt_min_estimation(const SyntheticDataset& data, std::int64_t k, std::int64_t T,
                                double sigma_x_sq, std::uint64_t seed,
                                const UploadChannel* upload = nullptr);

// High-probability radius containing every client's local mean:
// 4 sqrt(d sigma_x_sq / n) + 2 sqrt(log(m^2 n) sigma_x_sq / n) + r.
double concentration_radius(std::int64_t d, double sigma_x_sq, std::int64_t n, std::int64_t m, double r);

// Hungarian assignment between two center sets of k d-vectors each.
CenterMatching match_centers(const std::vector<double>& a, const std::vector<double>& b,
                             std::int64_t k, std::int64_t d);

}  // namespace fedbayes
