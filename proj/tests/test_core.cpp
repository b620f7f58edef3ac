#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fedbayes/data.hpp"
#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"
#include "fedbayes/priors.hpp"
#include "fedbayes/rng.hpp"
#include "fedbayes/sampling.hpp"

using namespace fedbayes;

namespace {

double vec_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double vec_variance(const std::vector<double>& v) {
  const double m = vec_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size());
}

double vec_fourth_central(const std::vector<double>& v) {
  const double m = vec_mean(v);
  double acc = 0.0;
  for (double x : v) {
    const double d = x - m;
    acc += d * d * d * d;
  }
  return acc / static_cast<double>(v.size());
}

// 4-standard-error band for the sample mean and sample variance of n draws.
void check_moments(const std::vector<double>& draws, double want_mean, double want_var) {
  const double n = static_cast<double>(draws.size());
  const double m = vec_mean(draws);
  const double s2 = vec_variance(draws);
  const double se_mean = std::sqrt(s2 / n);
  CHECK(std::abs(m - want_mean) <= 4.0 * se_mean);
  const double m4 = vec_fourth_central(draws);
  const double se_var = std::sqrt(std::max(m4 - s2 * s2, 0.0) / n);
  CHECK(std::abs(s2 - want_var) <= 4.0 * se_var);
}

std::vector<double> scalar_draws(const ScalarPrior& prior, int count, std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  Rng rng = substream(seed, 0, 0, StreamTag::population);
  for (int i = 0; i < count; ++i) out.push_back(scalar_prior_draw(prior, rng));
  return out;
}

}  // namespace

TEST_CASE("rng: identical seeds reproduce the stream, distinct seeds do not") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t x = a.next();
    all_equal = all_equal && (x == b.next());
    any_diff = any_diff || (x != c.next());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng: uniform lies in [0,1) and bernoulli(1) always fires") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng rb(8);
  for (int i = 0; i < 10000; ++i) CHECK(rb.bernoulli(1.0));
  Rng rz(9);
  for (int i = 0; i < 10000; ++i) CHECK_FALSE(rz.bernoulli(0.0));
}

TEST_CASE("rng: below(k) is uniform over 0..k-1") {
  Rng rng(11);
  std::array<int, 3> counts{0, 0, 0};
  const int total = 30000;
  for (int i = 0; i < total; ++i) counts[rng.below(3)]++;
  for (int c : counts) CHECK(std::abs(c - total / 3) < 600);
}

TEST_CASE("rng: gaussian matches N(0,1) moments") {
  Rng rng(13);
  std::vector<double> draws(100000);
  for (double& x : draws) x = rng.gaussian();
  check_moments(draws, 0.0, 1.0);
}

TEST_CASE("rng: substreams are reproducible and collision-free over a tuple sweep") {
  // Same derivation tuple twice gives the same stream.
  Rng a = substream(99, 5, 7, StreamTag::observation);
  Rng b = substream(99, 5, 7, StreamTag::observation);
  for (int i = 0; i < 16; ++i) CHECK(a.next() == b.next());

  // 10^4 distinct (client, round, tag) tuples: no two streams share their
  // first 16 draws.
  constexpr int kClients = 500;
  constexpr int kRounds = 5;
  const std::array<StreamTag, 4> tags{StreamTag::population, StreamTag::observation,
                                      StreamTag::mechanism, StreamTag::minibatch};
  std::vector<std::array<std::uint64_t, 16>> prefixes;
  prefixes.reserve(kClients * kRounds * tags.size());
  for (int c = 0; c < kClients; ++c)
    for (int r = 0; r < kRounds; ++r)
      for (StreamTag tag : tags) {
        Rng s = substream(2024, c, r, tag);
        std::array<std::uint64_t, 16> p{};
        for (auto& x : p) x = s.next();
        prefixes.push_back(p);
      }
  std::sort(prefixes.begin(), prefixes.end());
  CHECK(std::adjacent_find(prefixes.begin(), prefixes.end()) == prefixes.end());
}

TEST_CASE("kernels: simd path agrees with scalar reference") {
  const kern::Ops scalar = kern::scalar_ops();
  std::vector<kern::Ops> tables{scalar};
#if defined(FEDBAYES_HAVE_AVX2)
  if (kern::cpu_has_avx2()) tables.push_back(kern::avx2_ops());
#endif
  Rng rng(17);
  for (std::size_t len : {std::size_t{1}, std::size_t{2}, std::size_t{3}, std::size_t{4},
                          std::size_t{5}, std::size_t{7}, std::size_t{8}, std::size_t{64},
                          std::size_t{1003}}) {
    std::vector<double> x(len), y(len);
    for (std::size_t i = 0; i < len; ++i) {
      x[i] = rng.gaussian();
      y[i] = rng.gaussian();
    }
    for (const kern::Ops& t : tables) {
      const double tol = 1e-12 * static_cast<double>(len);
      CHECK(t.dot(x.data(), y.data(), len) ==
            doctest::Approx(scalar.dot(x.data(), y.data(), len)).epsilon(tol));
      CHECK(t.sum(x.data(), len) == doctest::Approx(scalar.sum(x.data(), len)).epsilon(tol));
      CHECK(t.sum_sq(x.data(), len) ==
            doctest::Approx(scalar.sum_sq(x.data(), len)).epsilon(tol));
      CHECK(t.dist_sq(x.data(), y.data(), len) ==
            doctest::Approx(scalar.dist_sq(x.data(), y.data(), len)).epsilon(tol));

      std::vector<double> ya = y, yb = y;
      scalar.axpy(0.75, x.data(), ya.data(), len);
      t.axpy(0.75, x.data(), yb.data(), len);
      for (std::size_t i = 0; i < len; ++i) CHECK(ya[i] == doctest::Approx(yb[i]).epsilon(1e-14));

      std::vector<double> oa(len), ob(len);
      scalar.combine(0.3, x.data(), -1.2, y.data(), oa.data(), len);
      t.combine(0.3, x.data(), -1.2, y.data(), ob.data(), len);
      for (std::size_t i = 0; i < len; ++i) CHECK(oa[i] == doctest::Approx(ob[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("kernels: dispatcher reports an available table") {
  const kern::Ops& active = kern::ops();
  const bool known = std::string(active.name) == "scalar" || std::string(active.name) == "avx2";
  CHECK(known);
}

TEST_CASE("sampling: gaussian population honors a zero-variance prior") {
  GaussianPrior prior;
  prior.d = 3;
  prior.mu = {1.0, -2.0, 0.5};
  prior.sigma_theta_sq = 0.0;
  prior.sigma_x_sq = 1.0;
  SyntheticDataset data = sample_gaussian_population(prior, 20, 4, 101);
  for (int i = 0; i < data.m; ++i) {
    const double* theta = data.true_param(i);
    for (int j = 0; j < prior.d; ++j) CHECK(theta[j] == prior.mu[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("sampling: rerun with one seed is bit-identical, prefix-stable in m") {
  GaussianPrior prior;
  prior.d = 2;
  prior.mu = {0.0, 0.0};
  prior.sigma_theta_sq = 1.0;
  prior.sigma_x_sq = 0.5;
  SyntheticDataset a = sample_gaussian_population(prior, 30, 5, 7);
  SyntheticDataset b = sample_gaussian_population(prior, 30, 5, 7);
  CHECK(a.true_params == b.true_params);
  for (int i = 0; i < a.m; ++i) CHECK(a.clients[static_cast<std::size_t>(i)].x ==
                                      b.clients[static_cast<std::size_t>(i)].x);

  // A longer client roster must not perturb earlier clients' data.
  SyntheticDataset big = sample_gaussian_population(prior, 50, 5, 7);
  for (int i = 0; i < a.m; ++i) {
    CHECK(big.clients[static_cast<std::size_t>(i)].x == a.clients[static_cast<std::size_t>(i)].x);
    CHECK(big.true_param(i)[0] == a.true_param(i)[0]);
    CHECK(big.true_param(i)[1] == a.true_param(i)[1]);
  }
}

TEST_CASE("sampling: gaussian population mean concentrates") {
  GaussianPrior prior;
  prior.d = 1;
  prior.mu = {0.0};
  prior.sigma_theta_sq = 1.0;
  prior.sigma_x_sq = 1.0;
  const int m = 10000;
  SyntheticDataset data = sample_gaussian_population(prior, m, 1, 3);
  std::vector<double> thetas(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) thetas[static_cast<std::size_t>(i)] = data.true_param(i)[0];
  CHECK(std::abs(vec_mean(thetas)) <= 4.0 / std::sqrt(static_cast<double>(m)));
}

TEST_CASE("sampling: bernoulli population stores consistent per-client sums") {
  ScalarPrior prior;
  prior.kind = ScalarPriorKind::beta;
  prior.beta_params = {2.0, 2.0};
  const int m = 10000, n = 10;
  SyntheticDataset data = sample_bernoulli_population(prior, m, n, 5);
  std::vector<double> rates;
  rates.reserve(static_cast<std::size_t>(m));
  for (const ClientDataset& c : data.clients) {
    double z = 0.0;
    for (double bit : c.x) {
      const bool binary = bit == 0.0 || bit == 1.0;
      CHECK(binary);
      z += bit;
    }
    CHECK(c.z_sum() == z);
    rates.push_back(z / static_cast<double>(n));
  }
  // Var(Z/n) = Var(p) + E[p(1-p)]/n = 0.05 + 0.02 for beta(2,2), n=10.
  const double se = std::sqrt(0.07 / static_cast<double>(m));
  CHECK(std::abs(vec_mean(rates) - 0.5) <= 3.0 * se);
}

TEST_CASE("sampling: three-spike prior hits only its atoms with symmetric mass") {
  ScalarPrior prior;
  prior.kind = ScalarPriorKind::three_spike;
  const int m = 30000;
  SyntheticDataset data = sample_bernoulli_population(prior, m, 1, 21);
  std::vector<double> ps(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double p = data.true_param(i)[0];
    ps[static_cast<std::size_t>(i)] = p;
    const bool atom = p == 0.25 || p == 0.5 || p == 0.75;
    CHECK(atom);
  }
  CHECK(std::abs(vec_mean(ps) - 0.5) <= 0.01);
}

TEST_CASE("sampling: mixture population respects component probabilities") {
  DiscretePrior prior;
  prior.k = 2;
  prior.d = 2;
  prior.centers = {1.0, 0.0, -1.0, 0.0};
  prior.radius_r = 1.0;

  prior.probs = {1.0, 0.0};
  SyntheticDataset sure = sample_mixture_population(prior, 100, 3, 1.0, 31);
  for (int i = 0; i < sure.m; ++i) {
    CHECK(sure.true_labels[static_cast<std::size_t>(i)] == 0);
    CHECK(sure.true_param(i)[0] == 1.0);
  }

  prior.probs = {0.5, 0.5};
  const int m = 10000;
  SyntheticDataset even = sample_mixture_population(prior, m, 3, 1.0, 37);
  int ones = 0;
  for (int label : even.true_labels) ones += label;
  CHECK(std::abs(static_cast<double>(ones) / m - 0.5) <= 0.02);

  prior.k = 1;
  prior.d = 2;
  prior.probs = {1.0};
  prior.centers = {0.25, -0.75};
  SyntheticDataset single = sample_mixture_population(prior, 50, 2, 1.0, 41);
  for (int i = 0; i < single.m; ++i) {
    CHECK(single.true_param(i)[0] == 0.25);
    CHECK(single.true_param(i)[1] == -0.75);
  }
}

TEST_CASE("sampling: regression responses equal the linear model plus noise") {
  GaussianPrior prior;
  prior.d = 3;
  prior.mu = {0.1, -0.2, 0.3};
  prior.sigma_theta_sq = 0.01;
  prior.sigma_x_sq = 1e-30;
  SyntheticDataset data = sample_regression_population(prior, 10, 6, 0.5, 51);
  for (int i = 0; i < data.m; ++i) {
    const ClientDataset& c = data.clients[static_cast<std::size_t>(i)];
    const double* theta = data.true_param(i);
    for (int j = 0; j < c.n; ++j) {
      double fit = 0.0;
      for (int t = 0; t < c.d; ++t) fit += c.x[static_cast<std::size_t>(t * c.n + j)] * theta[t];
      CHECK(c.y[static_cast<std::size_t>(j)] == doctest::Approx(fit).epsilon(1e-10));
    }
  }
}

TEST_CASE("sampling: scalar prior moments match closed forms") {
  ScalarPrior beta22;
  beta22.kind = ScalarPriorKind::beta;
  beta22.beta_params = {2.0, 2.0};
  check_moments(scalar_draws(beta22, 100000, 61), beta22.mean(), beta22.variance());

  ScalarPrior uni;
  uni.kind = ScalarPriorKind::uniform;
  check_moments(scalar_draws(uni, 100000, 67), 0.5, 1.0 / 12.0);

  ScalarPrior spike;
  spike.kind = ScalarPriorKind::three_spike;
  check_moments(scalar_draws(spike, 100000, 71), 0.5, 1.0 / 24.0);

  ScalarPrior clipped;
  clipped.kind = ScalarPriorKind::clipped_normal;
  clipped.normal_mean = 0.5;
  clipped.normal_sd = 0.15;
  clipped.validate();
  check_moments(scalar_draws(clipped, 100000, 73), clipped.mean(), clipped.variance());

  ScalarPrior lopsided;
  lopsided.kind = ScalarPriorKind::clipped_normal;
  lopsided.normal_mean = 0.9;
  lopsided.normal_sd = 0.3;
  check_moments(scalar_draws(lopsided, 100000, 79), lopsided.mean(), lopsided.variance());
}

TEST_CASE("sampling: invalid parameters are rejected") {
  GaussianPrior bad;
  bad.d = 2;
  bad.mu = {0.0};  // wrong length
  bad.sigma_theta_sq = 1.0;
  bad.sigma_x_sq = 1.0;
  CHECK_THROWS_AS(sample_gaussian_population(bad, 1, 1, 0), param_error);

  DiscretePrior unnorm;
  unnorm.k = 2;
  unnorm.d = 1;
  unnorm.probs = {0.7, 0.7};
  unnorm.centers = {0.0, 0.0};
  unnorm.radius_r = 1.0;
  CHECK_THROWS_AS(sample_mixture_population(unnorm, 1, 1, 1.0, 0), param_error);

  ScalarPrior offside;
  offside.kind = ScalarPriorKind::clipped_normal;
  offside.normal_mean = 9.0;
  offside.normal_sd = 0.1;
  CHECK_THROWS_AS(offside.validate(), param_error);

  CHECK_THROWS_AS(sample_gaussian_population(GaussianPrior{}, 0, 1, 0), param_error);
}
