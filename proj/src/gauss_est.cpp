#include "fedbayes/gauss_est.hpp"

#include <algorithm>
#include <cmath>

#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"

namespace fedbayes {

namespace {

const char* mechanism_name(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::identity: return "identity";
    case MechanismKind::quantizer: return "quantizer";
    case MechanismKind::gaussian_ldp: return "gaussian_ldp";
    case MechanismKind::binary_response: return "binary_response";
  }
  return "unknown";
}

void require_gaussian_population(const SyntheticDataset& data) {
  if (data.m < 1 || data.clients.empty()) throw input_error("gauss estimator: empty dataset");
  if (data.prior_kind != PriorKind::gaussian)
    throw input_error("gauss estimator: dataset does not carry a gaussian prior");
  const int d = data.clients.front().d;
  for (const ClientDataset& c : data.clients)
    if (c.d != d) throw input_error("gauss estimator: clients disagree on dimension");
}

// Fills the report's error statistics against the dataset's true parameters.
void attach_errors(const SyntheticDataset& data, const std::vector<int>& clipped,
                   GaussEstimateReport& rep) {
  const int m = rep.m;
  const int d = rep.d;
  std::vector<double> sq(static_cast<std::size_t>(m));
  double total = 0.0;
  double total_unclipped = 0.0;
  int unclipped = 0;
  for (int i = 0; i < m; ++i) {
    const double* est = rep.estimates.data() + static_cast<std::size_t>(i) * d;
    const double* truth = data.true_param(i);
    const double e = kern::dist_sq(est, truth, static_cast<std::size_t>(d));
    sq[static_cast<std::size_t>(i)] = e;
    total += e;
    if (clipped.empty() || clipped[static_cast<std::size_t>(i)] == 0) {
      total_unclipped += e;
      unclipped++;
    }
  }
  rep.empirical_mse = total / m;
  double var = 0.0;
  for (double e : sq) var += (e - rep.empirical_mse) * (e - rep.empirical_mse);
  rep.empirical_mse_stderr = m > 1 ? std::sqrt(var / (m - 1) / m) : 0.0;
  rep.mse_unclipped = unclipped > 0 ? total_unclipped / unclipped : rep.empirical_mse;
}

}  // namespace

double shrinkage_weight(double sigma_theta_sq, double sigma_x_sq, std::int64_t n,
                        double sigma_q_sq, std::int64_t m) {
  if (sigma_theta_sq < 0.0) throw param_error("shrinkage weight: sigma_theta_sq must be >= 0");
  if (!(sigma_x_sq > 0.0)) throw param_error("shrinkage weight: sigma_x_sq must be > 0");
  if (n < 1) throw param_error("shrinkage weight: n must be >= 1");
  if (sigma_q_sq < 0.0) throw param_error("shrinkage weight: sigma_q_sq must be >= 0");
  if (sigma_q_sq > 0.0 && m < 2)
    throw param_error("shrinkage weight: noisy channel needs m >= 2");
  const double widened = sigma_theta_sq + (sigma_q_sq > 0.0 ? sigma_q_sq / (m - 1) : 0.0);
  const double a = widened / (widened + sigma_x_sq / static_cast<double>(n));
  return std::clamp(a, 0.0, 1.0);
}

GaussEstimateReport personalized_gaussian(const SyntheticDataset& data, double a) {
  require_gaussian_population(data);
  if (a < 0.0 || a > 1.0) throw param_error("gauss estimator: weight must lie in [0,1]");

  GaussEstimateReport rep;
  rep.m = data.m;
  rep.d = data.clients.front().d;
  rep.a = a;

  const int m = rep.m;
  const int d = rep.d;
  std::vector<double> means(static_cast<std::size_t>(m) * d);
  rep.mu_hat.assign(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < m; ++i) {
    double* row = means.data() + static_cast<std::size_t>(i) * d;
    data.clients[static_cast<std::size_t>(i)].mean(row);
    kern::axpy(1.0, row, rep.mu_hat.data(), static_cast<std::size_t>(d));
  }
  kern::scal(1.0 / m, rep.mu_hat.data(), static_cast<std::size_t>(d));
  rep.estimates.resize(static_cast<std::size_t>(m) * d);
  for (int i = 0; i < m; ++i) {
    const double* row = means.data() + static_cast<std::size_t>(i) * d;
    double* out = rep.estimates.data() + static_cast<std::size_t>(i) * d;
    kern::combine(a, row, 1.0 - a, rep.mu_hat.data(), out, static_cast<std::size_t>(d));
  }

  attach_errors(data, {}, rep);
  rep.theoretical_mse =
      theoretical_mse_gaussian(data.gaussian_prior, data.clients.front().n, m, a);
  return rep;
}

double theoretical_mse_gaussian(const GaussianPrior& prior, std::int64_t n, std::int64_t m,
                                double a) {
  prior.validate();
  if (n < 1 || m < 1) throw param_error("theoretical mse: need n >= 1 and m >= 1");
  const double local = prior.d * prior.sigma_x_sq / static_cast<double>(n);
  return local * ((1.0 - a) / static_cast<double>(m) + a);
}

GaussEstimateReport constrained_personalized_gaussian(const SyntheticDataset& data,
                                                      const MechanismSpec& mechanism,
                                                      std::uint64_t seed) {
  require_gaussian_population(data);
  mechanism.validate();
  if (mechanism.kind == MechanismKind::binary_response)
    throw unsupported_error("gauss estimator: binary channel applies to the Bernoulli model");

  const int m = data.m;
  const int d = data.clients.front().d;
  const std::int64_t n = data.clients.front().n;
  const double sigma_q = mechanism.sigma_q();
  const double a = shrinkage_weight(data.gaussian_prior.sigma_theta_sq,
                                    data.gaussian_prior.sigma_x_sq, n, sigma_q * sigma_q, m);

  GaussEstimateReport rep;
  rep.m = m;
  rep.d = d;
  rep.a = a;
  rep.mechanism = mechanism_name(mechanism.kind);
  rep.epsilon_out_of_range = mechanism.epsilon_out_of_range();

  std::vector<double> means(static_cast<std::size_t>(m) * d);
  std::vector<int> clipped(static_cast<std::size_t>(m), 0);
  rep.mu_hat.assign(static_cast<std::size_t>(d), 0.0);
  const double bound = mechanism.range_half_width;
  for (int i = 0; i < m; ++i) {
    double* row = means.data() + static_cast<std::size_t>(i) * d;
    data.clients[static_cast<std::size_t>(i)].mean(row);
    Rng channel = substream(seed, i, 0, StreamTag::mechanism);
    for (int j = 0; j < d; ++j) {
      double sent = row[j];
      if (mechanism.kind != MechanismKind::identity) {
        const double projected = std::clamp(sent, -bound, bound);
        if (projected != sent) clipped[static_cast<std::size_t>(i)] = 1;
        sent = projected;
      }
      rep.mu_hat[static_cast<std::size_t>(j)] += mechanism.apply(sent, channel);
    }
  }
  kern::scal(1.0 / m, rep.mu_hat.data(), static_cast<std::size_t>(d));

  rep.estimates.resize(static_cast<std::size_t>(m) * d);
  for (int i = 0; i < m; ++i) {
    const double* row = means.data() + static_cast<std::size_t>(i) * d;
    double* out = rep.estimates.data() + static_cast<std::size_t>(i) * d;
    kern::combine(a, row, 1.0 - a, rep.mu_hat.data(), out, static_cast<std::size_t>(d));
  }

  for (int flag : clipped) rep.clipped_clients += flag;
  attach_errors(data, clipped, rep);
  rep.theoretical_mse = theoretical_mse_gaussian(data.gaussian_prior, n, m, a);
  return rep;
}

double clip_radius_b(double r, double sigma_theta, double sigma_x, std::int64_t n,
                     std::int64_t m) {
  if (r < 0.0) throw param_error("clip radius: r must be >= 0");
  if (sigma_theta < 0.0 || sigma_x < 0.0)
    throw param_error("clip radius: deviations must be >= 0");
  if (n < 1 || m < 1) throw param_error("clip radius: need n >= 1 and m >= 1");
  const double log_term =
      std::sqrt(std::log(static_cast<double>(m) * static_cast<double>(m) * static_cast<double>(n)));
  return r + sigma_theta * log_term + sigma_x / std::sqrt(static_cast<double>(n)) * log_term;
}

double van_trees_bound(double sigma_theta_sq, double sigma_x_sq, std::int64_t n, int d,
                       std::int64_t m, VanTreesMode mode) {
  if (!(sigma_theta_sq > 0.0) || !(sigma_x_sq > 0.0))
    throw param_error("van trees: variances must be > 0");
  if (n < 1 || m < 1 || d < 1) throw param_error("van trees: need n, m, d >= 1");
  const double denom = static_cast<double>(n) * sigma_theta_sq + sigma_x_sq;
  if (mode == VanTreesMode::known_prior) return d * sigma_theta_sq * sigma_x_sq / denom;
  const double mn = static_cast<double>(m) * static_cast<double>(n);
  return d * (sigma_theta_sq * sigma_x_sq + sigma_x_sq * sigma_x_sq / mn) / denom;
}

}  // namespace fedbayes
