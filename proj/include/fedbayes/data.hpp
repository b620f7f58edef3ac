#pragma once

#include <cstdint>
#include <vector>

#include "fedbayes/priors.hpp"

namespace fedbayes {

// One client's local data. x is column-major (coordinate/feature j occupies
// [j*n, (j+1)*n)) so per-coordinate scans and matrix maps are contiguous.
// y carries responses or class labels for learning tasks; empty otherwise.
struct ClientDataset {
  std::int64_t client_id = 0;
  std::int64_t n = 0;
  std::int64_t d = 1;
  std::vector<double> x;
  std::vector<double> y;

  void validate() const;
  void mean(double* out) const;  // out has length d
  double mean_scalar() const;    // d == 1 convenience
  double z_sum() const;          // sum of entries; the sufficient statistic for binary data
};

// Which population law generated a synthetic dataset (at most one is set).
enum class PriorKind { none, gaussian, scalar, discrete, gaussian_mixture };

struct SyntheticDataset {
  std::int64_t m = 0;
  std::int64_t n = 0;
  std::int64_t d = 1;
  // true per-client parameters, client i at [i*d, (i+1)*d); for binary
  // populations this holds the true rates (d = 1)
  std::vector<double> true_params;
  // mixture component index per client; empty when not a mixture draw
  std::vector<int> true_labels;
  std::vector<ClientDataset> clients;

  PriorKind prior_kind = PriorKind::none;
  GaussianPrior gaussian_prior;
  ScalarPrior scalar_prior;
  DiscretePrior discrete_prior;
  GaussianMixturePrior mixture_prior;

  const double* true_param(std::int64_t i) const { return true_params.data() + i * d; }
};

}  // namespace fedbayes
