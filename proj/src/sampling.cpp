#include "fedbayes/sampling.hpp"

#include <cmath>
#include <string>

#include "fedbayes/errors.hpp"

namespace fedbayes {

namespace {

double normal_pdf(double z) { return 0.3989422804014326779399461 * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244008444); }

}  // namespace

void GaussianPrior::validate() const {
  if (d < 1) throw param_error("gaussian prior: d must be >= 1");
  if (!(sigma_theta_sq >= 0.0)) throw param_error("gaussian prior: sigma_theta_sq must be >= 0");
  if (!(sigma_x_sq > 0.0)) throw param_error("gaussian prior: sigma_x_sq must be > 0");
  if (static_cast<std::int64_t>(mu.size()) != d) throw param_error("gaussian prior: mu length != d");
}

void BetaPrior::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw param_error("beta prior: alpha and beta must be > 0");
}

void ScalarPrior::validate() const {
  switch (kind) {
    case ScalarPriorKind::beta:
      beta_params.validate();
      return;
    case ScalarPriorKind::three_spike:
    case ScalarPriorKind::uniform:
      return;
    case ScalarPriorKind::clipped_normal: {
      if (!(normal_sd > 0.0)) throw param_error("clipped_normal prior: sd must be > 0");
      const double lo = (0.0 - normal_mean) / normal_sd;
      const double hi = (1.0 - normal_mean) / normal_sd;
      if (normal_cdf(hi) - normal_cdf(lo) < 1e-12)
        throw param_error("clipped_normal prior: [0,1] carries negligible mass");
      return;
    }
  }
  throw param_error("scalar prior: unknown kind");
}

double ScalarPrior::mean() const {
  switch (kind) {
    case ScalarPriorKind::beta:
      return beta_params.mean();
    case ScalarPriorKind::three_spike:
    case ScalarPriorKind::uniform:
      return 0.5;
    case ScalarPriorKind::clipped_normal: {
      const double a = (0.0 - normal_mean) / normal_sd;
      const double b = (1.0 - normal_mean) / normal_sd;
      const double z = normal_cdf(b) - normal_cdf(a);
      return normal_mean + normal_sd * (normal_pdf(a) - normal_pdf(b)) / z;
    }
  }
  throw param_error("scalar prior: unknown kind");
}

double ScalarPrior::variance() const {
  switch (kind) {
    case ScalarPriorKind::beta:
      return beta_params.variance();
    case ScalarPriorKind::three_spike:
      // mass 1/3 on each of 1/4, 1/2, 3/4
      return 1.0 / 24.0;
    case ScalarPriorKind::uniform:
      return 1.0 / 12.0;
    case ScalarPriorKind::clipped_normal: {
      const double a = (0.0 - normal_mean) / normal_sd;
      const double b = (1.0 - normal_mean) / normal_sd;
      const double z = normal_cdf(b) - normal_cdf(a);
      const double r = (normal_pdf(a) - normal_pdf(b)) / z;
      return normal_sd * normal_sd * (1.0 + (a * normal_pdf(a) - b * normal_pdf(b)) / z - r * r);
    }
  }
  throw param_error("scalar prior: unknown kind");
}

void DiscretePrior::validate() const {
  if (k < 1) throw param_error("discrete prior: k must be >= 1");
  if (d < 1) throw param_error("discrete prior: d must be >= 1");
  if (static_cast<std::int64_t>(probs.size()) != k) throw param_error("discrete prior: probs length != k");
  if (static_cast<std::int64_t>(centers.size()) != k * d) throw param_error("discrete prior: centers length != k*d");
  if (radius_r < 0.0) throw param_error("discrete prior: radius must be >= 0");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw param_error("discrete prior: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw param_error("discrete prior: probabilities sum to " + std::to_string(total));
  for (std::int64_t l = 0; l < k; ++l) {
    double nrm = 0.0;
    for (std::int64_t j = 0; j < d; ++j) nrm += centers[l * d + j] * centers[l * d + j];
    if (std::sqrt(nrm) > radius_r + 1e-9) throw param_error("discrete prior: center norm exceeds radius");
  }
}

void GaussianMixturePrior::validate() const {
  if (k < 1 || d < 1) throw param_error("mixture prior: k and d must be >= 1");
  if (static_cast<std::int64_t>(probs.size()) != k) throw param_error("mixture prior: probs length != k");
  if (static_cast<std::int64_t>(centers.size()) != k * d) throw param_error("mixture prior: centers length != k*d");
  if (static_cast<std::int64_t>(component_sds.size()) != k) throw param_error("mixture prior: sds length != k");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw param_error("mixture prior: negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw param_error("mixture prior: probabilities must sum to 1");
  for (double s : component_sds) {
    if (!(s > 0.0)) throw param_error("mixture prior: component sd must be > 0");
  }
}

void ClientDataset::validate() const {
  if (n < 1) throw input_error("client dataset: n must be >= 1");
  if (d < 1) throw input_error("client dataset: d must be >= 1");
  if (static_cast<std::int64_t>(x.size()) != n * d) throw input_error("client dataset: x size != n*d");
  if (!y.empty() && static_cast<std::int64_t>(y.size()) != n) throw input_error("client dataset: y size != n");
}

void ClientDataset::mean(double* out) const {
  for (std::int64_t j = 0; j < d; ++j) {
    double acc = 0.0;
    const double* col = x.data() + j * n;
    for (std::int64_t i = 0; i < n; ++i) acc += col[i];
    out[j] = acc / static_cast<double>(n);
  }
}

double ClientDataset::mean_scalar() const {
  double v = 0.0;
  mean(&v);
  return v;
}

double ClientDataset::z_sum() const {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc;
}

double gamma_draw(Rng& rng, double shape) {
  // Marsaglia-Tsang squeeze; shapes below 1 are boosted through U^(1/shape)
  if (shape < 1.0) {
    const double u = rng.uniform();
    return gamma_draw(rng, shape + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / shape);
  }
  const double dd = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * dd);
  for (;;) {
    double z = rng.gaussian();
    double v = 1.0 + c * z;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * z * z * z * z) return dd * v;
    if (u > 0.0 && std::log(u) < 0.5 * z * z + dd * (1.0 - v + std::log(v))) return dd * v;
  }
}

double beta_draw(Rng& rng, double alpha, double beta) {
  const double ga = gamma_draw(rng, alpha);
  const double gb = gamma_draw(rng, beta);
  return ga / (ga + gb);
}

double scalar_prior_draw(const ScalarPrior& prior, Rng& rng) {
  switch (prior.kind) {
    case ScalarPriorKind::beta:
      return beta_draw(rng, prior.beta_params.alpha, prior.beta_params.beta);
    case ScalarPriorKind::three_spike:
      return 0.25 + 0.25 * static_cast<double>(rng.below(3));
    case ScalarPriorKind::uniform:
      return rng.uniform();
    case ScalarPriorKind::clipped_normal:
      for (int attempt = 0; attempt < 1000000; ++attempt) {
        const double v = rng.gaussian(prior.normal_mean, prior.normal_sd);
        if (v >= 0.0 && v <= 1.0) return v;
      }
      throw param_error("clipped_normal prior: rejection sampling failed to hit [0,1]");
  }
  throw param_error("scalar prior: unknown kind");
}

namespace {

void check_mn(std::int64_t m, std::int64_t n) {
  if (m < 1) throw param_error("sampling: m must be >= 1");
  if (n < 1) throw param_error("sampling: n must be >= 1");
}

}  // namespace

SyntheticDataset sample_gaussian_population(const GaussianPrior& prior, std::int64_t m, std::int64_t n,
                                            std::uint64_t seed) {
  prior.validate();
  check_mn(m, n);
  SyntheticDataset out;
  out.m = m;
  out.n = n;
  out.d = prior.d;
  out.prior_kind = PriorKind::gaussian;
  out.gaussian_prior = prior;
  out.true_params.resize(m * prior.d);
  out.clients.resize(m);
  const double theta_sd = std::sqrt(prior.sigma_theta_sq);
  const double x_sd = std::sqrt(prior.sigma_x_sq);
  for (std::int64_t i = 0; i < m; ++i) {
    Rng pop = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::population);
    double* theta = out.true_params.data() + i * prior.d;
    for (std::int64_t j = 0; j < prior.d; ++j) theta[j] = prior.mu[j] + theta_sd * pop.gaussian();
    ClientDataset& c = out.clients[i];
    c.client_id = i;
    c.n = n;
    c.d = prior.d;
    c.x.resize(n * prior.d);
    Rng obs = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::observation);
    for (std::int64_t j = 0; j < prior.d; ++j) {
      double* col = c.x.data() + j * n;
      for (std::int64_t t = 0; t < n; ++t) col[t] = theta[j] + x_sd * obs.gaussian();
    }
  }
  return out;
}

SyntheticDataset sample_bernoulli_population(const ScalarPrior& prior, std::int64_t m, std::int64_t n,
                                             std::uint64_t seed) {
  prior.validate();
  check_mn(m, n);
  SyntheticDataset out;
  out.m = m;
  out.n = n;
  out.d = 1;
  out.prior_kind = PriorKind::scalar;
  out.scalar_prior = prior;
  out.true_params.resize(m);
  out.clients.resize(m);
  for (std::int64_t i = 0; i < m; ++i) {
    Rng pop = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::population);
    const double p = scalar_prior_draw(prior, pop);
    out.true_params[i] = p;
    ClientDataset& c = out.clients[i];
    c.client_id = i;
    c.n = n;
    c.d = 1;
    c.x.resize(n);
    Rng obs = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::observation);
    for (std::int64_t t = 0; t < n; ++t) c.x[t] = obs.bernoulli(p) ? 1.0 : 0.0;
  }
  return out;
}

SyntheticDataset sample_mixture_population(const DiscretePrior& prior, std::int64_t m, std::int64_t n,
                                           double sigma_x_sq, std::uint64_t seed) {
  prior.validate();
  check_mn(m, n);
  if (!(sigma_x_sq > 0.0)) throw param_error("sampling: sigma_x_sq must be > 0");
  SyntheticDataset out;
  out.m = m;
  out.n = n;
  out.d = prior.d;
  out.prior_kind = PriorKind::discrete;
  out.discrete_prior = prior;
  out.true_params.resize(m * prior.d);
  out.true_labels.resize(m);
  out.clients.resize(m);
  const double x_sd = std::sqrt(sigma_x_sq);
  for (std::int64_t i = 0; i < m; ++i) {
    Rng pop = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::population);
    const double u = pop.uniform();
    int label = 0;
    double acc = 0.0;
    for (std::int64_t l = 0; l < prior.k; ++l) {
      if (prior.probs[l] > 0.0) label = static_cast<int>(l);  // rounding fallback: last positive-mass component
      acc += prior.probs[l];
      if (u < acc) {
        label = static_cast<int>(l);
        break;
      }
    }
    out.true_labels[i] = label;
    double* theta = out.true_params.data() + i * prior.d;
    const double* center = prior.centers.data() + label * prior.d;
    for (std::int64_t j = 0; j < prior.d; ++j) theta[j] = center[j];
    ClientDataset& c = out.clients[i];
    c.client_id = i;
    c.n = n;
    c.d = prior.d;
    c.x.resize(n * prior.d);
    Rng obs = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::observation);
    for (std::int64_t j = 0; j < prior.d; ++j) {
      double* col = c.x.data() + j * n;
      for (std::int64_t t = 0; t < n; ++t) col[t] = theta[j] + x_sd * obs.gaussian();
    }
  }
  return out;
}

SyntheticDataset sample_regression_population(const GaussianPrior& prior, std::int64_t m, std::int64_t n,
                                              double feature_sd, std::uint64_t seed) {
  prior.validate();
  check_mn(m, n);
  if (!(feature_sd > 0.0)) throw param_error("sampling: feature_sd must be > 0");
  SyntheticDataset out;
  out.m = m;
  out.n = n;
  out.d = prior.d;
  out.prior_kind = PriorKind::gaussian;
  out.gaussian_prior = prior;
  out.true_params.resize(m * prior.d);
  out.clients.resize(m);
  const double theta_sd = std::sqrt(prior.sigma_theta_sq);
  const double w_sd = std::sqrt(prior.sigma_x_sq);
  for (std::int64_t i = 0; i < m; ++i) {
    Rng pop = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::population);
    double* theta = out.true_params.data() + i * prior.d;
    for (std::int64_t j = 0; j < prior.d; ++j) theta[j] = prior.mu[j] + theta_sd * pop.gaussian();
    ClientDataset& c = out.clients[i];
    c.client_id = i;
    c.n = n;
    c.d = prior.d;
    c.x.resize(n * prior.d);
    c.y.resize(n);
    Rng obs = substream(seed, static_cast<std::uint64_t>(i), 0, StreamTag::observation);
    // features first (row by row), then noise, in one fixed draw order
    for (std::int64_t t = 0; t < n; ++t) {
      for (std::int64_t j = 0; j < prior.d; ++j) c.x[j * n + t] = feature_sd * obs.gaussian();
    }
    for (std::int64_t t = 0; t < n; ++t) {
      double dotv = 0.0;
      for (std::int64_t j = 0; j < prior.d; ++j) dotv += c.x[j * n + t] * theta[j];
      c.y[t] = dotv + w_sd * obs.gaussian();
    }
  }
  return out;
}

}  // namespace fedbayes
