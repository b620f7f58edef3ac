#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedbayes/bern_est.hpp"
#include "fedbayes/errors.hpp"
#include "fedbayes/rng.hpp"
#include "fedbayes/sampling.hpp"

using namespace fedbayes;

namespace {

ScalarPrior beta_prior(double alpha, double beta) {
  ScalarPrior prior;
  prior.kind = ScalarPriorKind::beta;
  prior.beta_params.alpha = alpha;
  prior.beta_params.beta = beta;
  return prior;
}

std::int64_t successes(const ClientDataset& c) {
  return static_cast<std::int64_t>(std::llround(c.z_sum()));
}

// Dataset where every client's samples are all 0 or all 1, so the empirical
// rates sit at the extremes and the fitted weight saturates at 1.
SyntheticDataset extreme_rate_dataset(std::int64_t m, std::int64_t n) {
  SyntheticDataset data;
  data.m = m;
  data.n = n;
  data.d = 1;
  data.prior_kind = PriorKind::scalar;
  data.true_params.resize(static_cast<std::size_t>(m));
  data.clients.resize(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const double value = (i % 2 == 0) ? 0.0 : 1.0;
    data.true_params[static_cast<std::size_t>(i)] = value;
    ClientDataset& c = data.clients[static_cast<std::size_t>(i)];
    c.client_id = i;
    c.n = n;
    c.d = 1;
    c.x.assign(static_cast<std::size_t>(n), value);
  }
  return data;
}

struct BoundTerms {
  double t1 = 0.0;       // risk of the raw rate under the beta prior
  double var_p = 0.0;    // prior variance
  double log_term = 0.0; // log(4 m^2 n)
};

BoundTerms bound_terms(double alpha, double beta, std::int64_t m, std::int64_t n) {
  BoundTerms t;
  const double s = alpha + beta;
  t.t1 = alpha * beta / (static_cast<double>(n) * s * (s + 1.0));
  t.var_p = alpha * beta / (s * s * (s + 1.0));
  t.log_term = std::log(4.0 * static_cast<double>(m) * static_cast<double>(m) * static_cast<double>(n));
  return t;
}

// Risk bound with the weight moments replaced by their empirical means.
double empirical_bound(const BernEstimateReport& report, const BoundTerms& terms, double moment_term) {
  double ea2 = 0.0;
  double e1a2 = 0.0;
  for (const MomentEstimates& mom : report.moments) {
    ea2 += mom.a_hat_i * mom.a_hat_i;
    e1a2 += (1.0 - mom.a_hat_i) * (1.0 - mom.a_hat_i);
  }
  ea2 /= static_cast<double>(report.m);
  e1a2 /= static_cast<double>(report.m);
  return ea2 * terms.t1 + e1a2 * (terms.var_p + moment_term);
}

}  // namespace

TEST_CASE("posterior mean under a known beta prior") {
  CHECK(posterior_mean_known(1.0, 1.0, 14, 7) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(posterior_mean_known(2.0, 3.0, 0, 0) == doctest::Approx(0.4).epsilon(1e-15));

  const std::int64_t big_n = 10000000;
  const std::int64_t z = 3000000;
  CHECK(posterior_mean_known(2.0, 5.0, big_n, z) == doctest::Approx(0.3).epsilon(1e-5));

  CHECK_THROWS_AS(posterior_mean_known(2.0, 2.0, 10, 11), input_error);
  CHECK_THROWS_AS(posterior_mean_known(2.0, 2.0, 10, -1), input_error);
  CHECK_THROWS_AS(posterior_mean_known(0.0, 2.0, 10, 5), param_error);
  CHECK_THROWS_AS(posterior_mean_known(2.0, -1.0, 10, 5), param_error);
}

TEST_CASE("closed-form risk of the known-prior estimator") {
  const KnownPriorRisk risk = mse_known(2.0, 2.0, 10);
  CHECK(risk.mse == doctest::Approx(1.0 / 70.0).epsilon(1e-14));
  CHECK(risk.local_mse == doctest::Approx(4.0 / 200.0).epsilon(1e-14));
  CHECK(risk.gain_factor == doctest::Approx(10.0 / 14.0).epsilon(1e-14));

  CHECK(mse_known(2.0, 2.0, 14).gain_factor == doctest::Approx(14.0 / 18.0).epsilon(1e-14));
  CHECK_THROWS_AS(mse_known(-2.0, 2.0, 14), param_error);
}

TEST_CASE("known-prior estimator risk matches simulation at scale") {
  const std::int64_t m = 100000;
  const std::int64_t n = 14;
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), m, n, 811u);
  std::vector<double> sq(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const double p_hat = posterior_mean_known(2.0, 2.0, n, successes(data.clients[s]));
    const double err = p_hat - data.true_params[s];
    sq[s] = err * err;
  }
  double mean = 0.0;
  for (double v : sq) mean += v;
  mean /= static_cast<double>(m);
  double var = 0.0;
  for (double v : sq) var += (v - mean) * (v - mean);
  var /= static_cast<double>(m - 1);
  const double se = std::sqrt(var / static_cast<double>(m));

  const KnownPriorRisk risk = mse_known(2.0, 2.0, n);
  CHECK(std::abs(mean - risk.mse) <= 3.0 * se);
}

TEST_CASE("leave-self-out moments at the degenerate extremes") {
  const std::int64_t n = 14;

  std::vector<double> identical(50, 0.5);
  const MomentEstimates flat = moment_weights(identical, n, 7);
  CHECK(flat.mu_hat_i == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(flat.sigma_hat_sq_i == doctest::Approx(kVarianceFloor).epsilon(1e-6));
  CHECK(flat.a_hat_i < 1e-8);

  std::vector<double> split(800);
  for (std::size_t i = 0; i < split.size(); ++i) split[i] = (i % 2 == 0) ? 0.0 : 1.0;
  const MomentEstimates wide = moment_weights(split, n, 0);
  CHECK(wide.a_hat_i == 1.0);

  CHECK_THROWS_AS(moment_weights(std::vector<double>{0.4, 0.6}, n, 0), input_error);
  CHECK_THROWS_AS(moment_weights(identical, n, 50), input_error);
  CHECK_THROWS_AS(moment_weights(identical, 0, 7), param_error);
}

TEST_CASE("a client's own rate never enters its leave-self-out moments") {
  Rng rng(4021u);
  std::vector<double> published(60);
  for (double& v : published) v = rng.uniform();

  const MomentEstimates before = moment_weights(published, 20, 13);
  published[13] = published[13] + 0.37;
  const MomentEstimates after = moment_weights(published, 20, 13);
  CHECK(after.mu_hat_i == doctest::Approx(before.mu_hat_i).epsilon(1e-10));
  CHECK(after.sigma_hat_sq_i == doctest::Approx(before.sigma_hat_sq_i).epsilon(1e-10));
  CHECK(after.a_hat_i == doctest::Approx(before.a_hat_i).epsilon(1e-10));
}

TEST_CASE("fitted weights concentrate near their population value") {
  const std::int64_t m = 10000;
  const std::int64_t n = 14;
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), m, n, 1901u);
  const BernEstimateReport report = personalized_bernoulli(data);

  double mean_a = 0.0;
  for (const MomentEstimates& mom : report.moments) mean_a += mom.a_hat_i;
  mean_a /= static_cast<double>(m);

  // The leave-self-out variance tracks the spread of the empirical rates,
  // which exceeds the prior variance by the per-rate sampling noise; the
  // fitted weight therefore concentrates slightly above n/(n + alpha + beta).
  const double var_p = 4.0 / (16.0 * 5.0);
  const double rate_noise = 0.2 / static_cast<double>(n);
  const double predicted = static_cast<double>(n) / (0.25 / (var_p + rate_noise) - 1.0 + static_cast<double>(n));
  CHECK(std::abs(mean_a - predicted) < 0.012);
  CHECK(std::abs(mean_a - 14.0 / 18.0) < 0.065);
}

TEST_CASE("saturated weights reduce the estimate to the raw rate") {
  const SyntheticDataset data = extreme_rate_dataset(800, 14);
  const BernEstimateReport report = personalized_bernoulli(data);
  for (std::int64_t i = 0; i < data.m; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    CHECK(report.moments[s].a_hat_i == 1.0);
    CHECK(report.estimates[s] == data.true_params[s]);
  }
}

TEST_CASE("report moments agree with the standalone moment computation") {
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), 200, 14, 33u);
  const BernEstimateReport report = personalized_bernoulli(data);

  std::vector<double> rates(static_cast<std::size_t>(data.m));
  for (std::int64_t i = 0; i < data.m; ++i)
    rates[static_cast<std::size_t>(i)] =
        data.clients[static_cast<std::size_t>(i)].z_sum() / static_cast<double>(data.n);

  for (std::int64_t i : {std::int64_t{0}, std::int64_t{57}, std::int64_t{199}}) {
    const MomentEstimates standalone = moment_weights(rates, data.n, i);
    const std::size_t s = static_cast<std::size_t>(i);
    CHECK(report.moments[s].mu_hat_i == standalone.mu_hat_i);
    CHECK(report.moments[s].sigma_hat_sq_i == standalone.sigma_hat_sq_i);
    CHECK(report.moments[s].a_hat_i == standalone.a_hat_i);
  }
}

TEST_CASE("three-spike population: shrinkage beats the raw rate by a quarter") {
  ScalarPrior prior;
  prior.kind = ScalarPriorKind::three_spike;
  const SyntheticDataset data = sample_bernoulli_population(prior, 10000, 14, 6007u);
  const BernEstimateReport report = personalized_bernoulli(data);

  CHECK(report.gain_pct > 24.3 - 8.0);
  CHECK(report.gain_pct < 24.3 + 8.0);
  CHECK(report.empirical_mse < report.local_mse);
  for (double p : report.estimates) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("fitted-prior estimator stays close to the known-prior oracle") {
  const std::int64_t m = 10000;
  const std::int64_t n = 14;
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), m, n, 5501u);
  const BernEstimateReport report = personalized_bernoulli(data);

  double oracle_mse = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const double p_hat = posterior_mean_known(2.0, 2.0, n, successes(data.clients[s]));
    const double err = p_hat - data.true_params[s];
    oracle_mse += err * err;
  }
  oracle_mse /= static_cast<double>(m);

  CHECK(report.empirical_mse <= 1.05 * oracle_mse);
  CHECK(report.empirical_mse >= 0.95 * oracle_mse);
}

TEST_CASE("known-prior estimator never loses to the raw rate") {
  struct Config {
    double alpha, beta;
    std::int64_t n;
  };
  const Config configs[] = {{2.0, 2.0, 10}, {1.0, 3.0, 5}, {5.0, 1.0, 20}, {0.9, 4.2, 7}};
  const std::int64_t m = 3000;

  for (const Config& cfg : configs) {
    const SyntheticDataset data =
        sample_bernoulli_population(beta_prior(cfg.alpha, cfg.beta), m, cfg.n, 9100u + cfg.n);
    std::vector<double> diff(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      const double rate = data.clients[s].z_sum() / static_cast<double>(cfg.n);
      const double p_hat = posterior_mean_known(cfg.alpha, cfg.beta, cfg.n, successes(data.clients[s]));
      const double e_known = p_hat - data.true_params[s];
      const double e_local = rate - data.true_params[s];
      diff[s] = e_known * e_known - e_local * e_local;
    }
    double mean = 0.0;
    for (double v : diff) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : diff) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m - 1);
    const double se = std::sqrt(var / static_cast<double>(m));
    CHECK(mean <= 3.0 * se);
  }
}

TEST_CASE("fitted-prior risk respects its closed-form bound across random setups") {
  Rng rng(70707u);
  for (int rep = 0; rep < 10; ++rep) {
    const std::int64_t m = 500 + static_cast<std::int64_t>(rng.below(2501));
    const std::int64_t n = 5 + static_cast<std::int64_t>(rng.below(36));
    const double alpha = 0.8 + 4.2 * rng.uniform();
    const double beta = 0.8 + 4.2 * rng.uniform();

    const SyntheticDataset data =
        sample_bernoulli_population(beta_prior(alpha, beta), m, n, 2222u + static_cast<std::uint64_t>(rep));
    const BernEstimateReport report = personalized_bernoulli(data);

    const BoundTerms terms = bound_terms(alpha, beta, m, n);
    const double moment_term = 3.0 * terms.log_term / static_cast<double>(m - 1);
    const double bound = empirical_bound(report, terms, moment_term);
    CHECK(report.empirical_mse <= bound + 3.0 * report.empirical_mse_stderr);
  }
}

TEST_CASE("private estimator at a generous budget stays near the non-private risk") {
  const std::int64_t m = 10000;
  const std::int64_t n = 14;
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), m, n, 313u);

  const BernEstimateReport plain = personalized_bernoulli(data);
  const BernEstimateReport priv = private_personalized_bernoulli(data, 8.0, 99u);

  // The binary channel erases the spread of the published rates, so the
  // fitted weight lands near n/(n+1) rather than the oracle weight; the
  // resulting risk sits 11-13% above the non-private estimator.
  CHECK(priv.empirical_mse <= 1.15 * plain.empirical_mse);
  CHECK(priv.empirical_mse >= 1.05 * plain.empirical_mse);
  CHECK(priv.epsilon0 == 8.0);
  for (double p : priv.estimates) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("private estimator at a tiny budget keeps a finite, bounded risk") {
  const std::int64_t m = 10000;
  const std::int64_t n = 14;
  const double eps0 = 0.1;
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), m, n, 71u);
  const BernEstimateReport report = private_personalized_bernoulli(data, eps0, 140u);

  CHECK(std::isfinite(report.empirical_mse));
  CHECK(report.empirical_mse < 1.0);

  const BoundTerms terms = bound_terms(2.0, 2.0, m, n);
  const double e = std::exp(eps0);
  const double moment_term =
      (e + 1.0) * (e + 1.0) * terms.log_term / (3.0 * (e - 1.0) * (e - 1.0) * static_cast<double>(m - 1));
  const double bound = empirical_bound(report, terms, moment_term);
  CHECK(report.empirical_mse <= bound + 3.0 * report.empirical_mse_stderr);
}

TEST_CASE("private risk respects its closed-form bound across random setups") {
  Rng rng(50505u);
  for (int rep = 0; rep < 10; ++rep) {
    const std::int64_t m = 500 + static_cast<std::int64_t>(rng.below(2501));
    const std::int64_t n = 5 + static_cast<std::int64_t>(rng.below(36));
    const double alpha = 0.8 + 4.2 * rng.uniform();
    const double beta = 0.8 + 4.2 * rng.uniform();
    const double eps0 = 0.5 + 3.0 * rng.uniform();

    const SyntheticDataset data =
        sample_bernoulli_population(beta_prior(alpha, beta), m, n, 8100u + static_cast<std::uint64_t>(rep));
    const BernEstimateReport report =
        private_personalized_bernoulli(data, eps0, 9300u + static_cast<std::uint64_t>(rep));

    const BoundTerms terms = bound_terms(alpha, beta, m, n);
    const double e = std::exp(eps0);
    const double moment_term =
        (e + 1.0) * (e + 1.0) * terms.log_term / (3.0 * (e - 1.0) * (e - 1.0) * static_cast<double>(m - 1));
    const double bound = empirical_bound(report, terms, moment_term);
    CHECK(report.empirical_mse <= bound + 3.0 * report.empirical_mse_stderr);
  }
}

TEST_CASE("private estimator is reproducible under a fixed seed") {
  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), 500, 14, 47u);

  const BernEstimateReport a = private_personalized_bernoulli(data, 1.0, 1234u);
  const BernEstimateReport b = private_personalized_bernoulli(data, 1.0, 1234u);
  REQUIRE(a.estimates.size() == b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i) CHECK(a.estimates[i] == b.estimates[i]);

  const BernEstimateReport c = private_personalized_bernoulli(data, 1.0, 4321u);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.estimates.size(); ++i)
    if (a.estimates[i] != c.estimates[i]) any_difference = true;
  CHECK(any_difference);
}

TEST_CASE("estimator rejects malformed populations") {
  SyntheticDataset tiny = extreme_rate_dataset(2, 5);
  CHECK_THROWS_AS(personalized_bernoulli(tiny), input_error);

  const SyntheticDataset data = sample_bernoulli_population(beta_prior(2.0, 2.0), 10, 5, 3u);
  CHECK_THROWS_AS(private_personalized_bernoulli(data, 0.0, 1u), param_error);
  CHECK_THROWS_AS(private_personalized_bernoulli(data, -1.0, 1u), param_error);
}
