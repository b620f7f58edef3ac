#include "fedbayes/bern_est.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fedbayes/errors.hpp"
#include "fedbayes/mechanisms.hpp"
#include "fedbayes/rng.hpp"

namespace fedbayes {

namespace {

// Global sums over the published rates, centered for stable per-client
// leave-self-out corrections.
struct PublishedSums {
  std::int64_t m = 0;
  double mean = 0.0;
  double t2 = 0.0;  // sum of squared deviations from mean
};

PublishedSums accumulate_published(const std::vector<double>& published) {
  PublishedSums sums;
  sums.m = static_cast<std::int64_t>(published.size());
  double s = 0.0;
  for (double v : published) s += v;
  sums.mean = s / static_cast<double>(sums.m);
  double t2 = 0.0;
  for (double v : published) {
    const double dev = v - sums.mean;
    t2 += dev * dev;
  }
  sums.t2 = t2;
  return sums;
}

MomentEstimates leave_self_out(const PublishedSums& sums, double value_i, std::int64_t n,
                               bool private_weights) {
  const double m = static_cast<double>(sums.m);
  const double dev_i = value_i - sums.mean;
  MomentEstimates out;
  out.mu_hat_i = sums.mean - dev_i / (m - 1.0);
  const double rss = sums.t2 - dev_i * dev_i * (m / (m - 1.0));
  out.sigma_hat_sq_i = std::max(rss / (m - 2.0), kVarianceFloor);

  double mu = out.mu_hat_i;
  if (private_weights) mu = std::clamp(mu, 0.0, 1.0);
  const double nn = static_cast<double>(n);
  const double ratio = mu * (1.0 - mu) / out.sigma_hat_sq_i;
  const double denom = private_weights ? ratio + nn : ratio - 1.0 + nn;
  out.a_hat_i = std::clamp(nn / denom, 0.0, 1.0);
  return out;
}

// Per-client empirical rates; requires a one-dimensional binary population.
std::vector<double> client_rates(const SyntheticDataset& data) {
  if (data.m < 3) throw input_error("bernoulli estimator: needs at least 3 clients");
  if (data.n < 1) throw input_error("bernoulli estimator: clients have no samples");
  if (data.d != 1) throw input_error("bernoulli estimator: rates are one-dimensional");
  if (static_cast<std::int64_t>(data.true_params.size()) != data.m)
    throw input_error("bernoulli estimator: missing true rates");
  std::vector<double> rates(static_cast<std::size_t>(data.m));
  for (std::int64_t i = 0; i < data.m; ++i) {
    const ClientDataset& c = data.clients[static_cast<std::size_t>(i)];
    if (c.n != data.n || c.d != 1)
      throw input_error("bernoulli estimator: client " + std::to_string(i) + " has mismatched shape");
    rates[static_cast<std::size_t>(i)] = c.z_sum() / static_cast<double>(c.n);
  }
  return rates;
}

BernEstimateReport build_report(const SyntheticDataset& data, const std::vector<double>& rates,
                                const std::vector<double>& published, bool private_weights) {
  const PublishedSums sums = accumulate_published(published);
  BernEstimateReport report;
  report.m = data.m;
  report.n = data.n;
  report.estimates.resize(static_cast<std::size_t>(data.m));
  report.moments.resize(static_cast<std::size_t>(data.m));

  std::vector<double> sq_err(static_cast<std::size_t>(data.m));
  double local_sum = 0.0;
  for (std::int64_t i = 0; i < data.m; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const MomentEstimates mom = leave_self_out(sums, published[s], data.n, private_weights);
    const double mu = private_weights ? std::clamp(mom.mu_hat_i, 0.0, 1.0) : mom.mu_hat_i;
    const double p_hat = std::clamp(mom.a_hat_i * rates[s] + (1.0 - mom.a_hat_i) * mu, 0.0, 1.0);
    report.moments[s] = mom;
    report.estimates[s] = p_hat;
    const double err = p_hat - data.true_params[s];
    const double local_err = rates[s] - data.true_params[s];
    sq_err[s] = err * err;
    local_sum += local_err * local_err;
  }

  double mean = 0.0;
  for (double v : sq_err) mean += v;
  mean /= static_cast<double>(data.m);
  double var = 0.0;
  for (double v : sq_err) var += (v - mean) * (v - mean);
  var /= static_cast<double>(data.m - 1);

  report.empirical_mse = mean;
  report.empirical_mse_stderr = std::sqrt(var / static_cast<double>(data.m));
  report.local_mse = local_sum / static_cast<double>(data.m);
  report.gain_pct = 100.0 * (1.0 - report.empirical_mse / report.local_mse);
  return report;
}

}  // namespace

double posterior_mean_known(double alpha, double beta, std::int64_t n, std::int64_t z) {
  if (!(alpha > 0.0) || !(beta > 0.0))
    throw param_error("posterior_mean_known: alpha and beta must be positive");
  if (n < 0) throw param_error("posterior_mean_known: n must be non-negative");
  if (z < 0 || z > n) throw input_error("posterior_mean_known: success count outside [0, n]");
  return (alpha + static_cast<double>(z)) / (alpha + beta + static_cast<double>(n));
}

KnownPriorRisk mse_known(double alpha, double beta, std::int64_t n) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw param_error("mse_known: alpha and beta must be positive");
  if (n < 1) throw param_error("mse_known: n must be positive");
  const double s = alpha + beta;
  KnownPriorRisk risk;
  risk.local_mse = alpha * beta / (static_cast<double>(n) * s * (s + 1.0));
  risk.gain_factor = static_cast<double>(n) / (static_cast<double>(n) + s);
  risk.mse = risk.local_mse * risk.gain_factor;
  return risk;
}

MomentEstimates moment_weights(const std::vector<double>& published, std::int64_t n, std::int64_t i,
                               bool private_weights) {
  const std::int64_t m = static_cast<std::int64_t>(published.size());
  if (m < 3) throw input_error("moment_weights: needs at least 3 clients");
  if (n < 1) throw param_error("moment_weights: n must be positive");
  if (i < 0 || i >= m) throw input_error("moment_weights: client index out of range");
  const PublishedSums sums = accumulate_published(published);
  return leave_self_out(sums, published[static_cast<std::size_t>(i)], n, private_weights);
}

BernEstimateReport personalized_bernoulli(const SyntheticDataset& data) {
  const std::vector<double> rates = client_rates(data);
  return build_report(data, rates, rates, false);
}

BernEstimateReport private_personalized_bernoulli(const SyntheticDataset& data, double epsilon0,
                                                  std::uint64_t seed) {
  if (!(epsilon0 > 0.0)) throw param_error("private_personalized_bernoulli: epsilon0 must be positive");
  const std::vector<double> rates = client_rates(data);
  std::vector<double> published(rates.size());
  for (std::int64_t i = 0; i < data.m; ++i) {
    Rng rng = substream(seed, i, 0, StreamTag::mechanism);
    published[static_cast<std::size_t>(i)] = binary_response(rates[static_cast<std::size_t>(i)], epsilon0, rng);
  }
  BernEstimateReport report = build_report(data, rates, published, true);
  report.epsilon0 = epsilon0;
  return report;
}

}  // namespace fedbayes
