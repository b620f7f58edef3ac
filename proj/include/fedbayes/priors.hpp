#pragma once

#include <cstdint>
#include <vector>

namespace fedbayes {

// Population law of the per-client parameter vectors, isotropic Gaussian.
// sigma_theta_sq = 0 collapses every client onto mu.
struct GaussianPrior {
  std::vector<double> mu;
  double sigma_theta_sq = 0.0;
  double sigma_x_sq = 1.0;  // per-coordinate observation variance
  std::int64_t d = 1;

  void validate() const;
};

struct BetaPrior {
  double alpha = 1.0;
  double beta = 1.0;

  void validate() const;
  double mean() const { return alpha / (alpha + beta); }
  double variance() const {
    const double s = alpha + beta;
    return alpha * beta / (s * s * (s + 1.0));
  }
};

enum class ScalarPriorKind { beta, three_spike, uniform, clipped_normal };

// Scalar priors supported for binary-rate populations; support is [0,1].
// three_spike puts mass 1/3 on each of 1/4, 1/2, 3/4. clipped_normal is a
// normal rejection-sampled into [0,1] (defaults 0.5 / 0.15).
struct ScalarPrior {
  ScalarPriorKind kind = ScalarPriorKind::uniform;
  BetaPrior beta_params;
  double normal_mean = 0.5;
  double normal_sd = 0.15;

  void validate() const;
  double mean() const;
  double variance() const;
};

// Finite set of candidate parameter vectors with sampling probabilities.
// centers stores candidate l at [l*d, (l+1)*d); all centers lie in the
// centered L2 ball of radius radius_r.
struct DiscretePrior {
  std::vector<double> probs;
  std::vector<double> centers;
  std::int64_t k = 0;
  std::int64_t d = 0;
  double radius_r = 0.0;

  void validate() const;
};

struct GaussianMixturePrior {
  std::vector<double> probs;
  std::vector<double> centers;  // k*d, same layout as DiscretePrior
  std::vector<double> component_sds;
  std::int64_t k = 0;
  std::int64_t d = 0;

  void validate() const;
};

}  // namespace fedbayes
