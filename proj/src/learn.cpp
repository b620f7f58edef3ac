#include "fedbayes/learn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"
#include "fedbayes/mixture_est.hpp"
#include "fedbayes/rng.hpp"

namespace fedbayes {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Learning tolerates empty clients (a client with no data still follows the
// prior pulls), so this is looser than ClientDataset::validate.
void require_learn_client(const ClientDataset& data, std::int64_t d, bool binary_labels) {
  if (data.n < 0) throw input_error("learn: client n must be >= 0");
  if (data.d != d) throw input_error("learn: client dimension mismatch");
  if (static_cast<std::int64_t>(data.x.size()) != data.n * data.d)
    throw input_error("learn: feature size != n*d");
  if (static_cast<std::int64_t>(data.y.size()) != data.n)
    throw input_error("learn: response size != n");
  if (binary_labels) {
    for (double v : data.y) {
      if (v != 0.0 && v != 1.0) throw input_error("learn: labels must be 0 or 1");
    }
  }
}

void require_population(const SyntheticDataset& data, bool binary_labels) {
  if (data.m < 1) throw input_error("learn: need at least one client");
  if (data.d < 1) throw input_error("learn: d must be >= 1");
  if (static_cast<std::int64_t>(data.clients.size()) != data.m)
    throw input_error("learn: client count != m");
  for (const ClientDataset& c : data.clients) require_learn_client(c, data.d, binary_labels);
}

void require_config(const LearnConfig& config) {
  if (!(config.eta > 0.0) || !std::isfinite(config.eta))
    throw param_error("learn: eta must be positive");
  if (config.rounds < 1) throw param_error("learn: rounds must be >= 1");
  if (!(config.eta_decay > 0.0) || config.eta_decay > 1.0)
    throw param_error("learn: eta_decay must be in (0, 1]");
  if (config.weight_decay < 0.0) throw param_error("learn: weight_decay must be >= 0");
  if (config.sync_every < 1) throw param_error("learn: sync_every must be >= 1");
  if (!(config.variance_floor > 0.0)) throw param_error("learn: variance_floor must be positive");
  if (!(config.divergence_limit > 0.0))
    throw param_error("learn: divergence_limit must be positive");
}

void require_variance(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw param_error(std::string("learn: ") + what + " must be positive and finite");
}

std::vector<double> expand_theta0(const LearnInit& init, std::int64_t m, std::int64_t d) {
  const std::int64_t len = static_cast<std::int64_t>(init.theta0.size());
  if (len == 0) return std::vector<double>(m * d, 0.0);
  if (len == d) {
    std::vector<double> out(m * d);
    for (std::int64_t i = 0; i < m; ++i)
      std::copy(init.theta0.begin(), init.theta0.end(), out.begin() + i * d);
    return out;
  }
  if (len == m * d) return init.theta0;
  throw param_error("learn: theta0 length must be 0, d, or m*d");
}

std::vector<double> expand_mu0(const LearnInit& init, std::int64_t d) {
  if (init.mu0.empty()) return std::vector<double>(d, 0.0);
  if (static_cast<std::int64_t>(init.mu0.size()) == d) return init.mu0;
  throw param_error("learn: mu0 length must be 0 or d");
}

// Residual r = y - X theta for one client; returns the residual sum of
// squares. x is column-major, so the update runs one axpy per coordinate.
double fill_residual(const ClientDataset& data, const double* theta, std::vector<double>& r) {
  const std::size_t n = static_cast<std::size_t>(data.n);
  r.assign(data.y.begin(), data.y.end());
  for (std::int64_t c = 0; c < data.d; ++c)
    kern::axpy(-theta[c], data.x.data() + c * data.n, r.data(), n);
  return kern::sum_sq(r.data(), n);
}

// Logit vector z = X theta.
void fill_logits(const ClientDataset& data, const double* theta, std::vector<double>& z) {
  const std::size_t n = static_cast<std::size_t>(data.n);
  z.assign(n, 0.0);
  for (std::int64_t c = 0; c < data.d; ++c)
    kern::axpy(theta[c], data.x.data() + c * data.n, z.data(), n);
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double linreg_objective_core(const ClientDataset& data, const double* theta, const double* mu,
                             double st, double sx, std::vector<double>& scratch) {
  const double rss = fill_residual(data, theta, scratch);
  const double n = static_cast<double>(data.n);
  const double d = static_cast<double>(data.d);
  const double prior = kern::dist_sq(theta, mu, static_cast<std::size_t>(data.d));
  return rss / (2.0 * sx) + 0.5 * n * std::log(kTwoPi * sx) + prior / (2.0 * st) +
         0.5 * d * std::log(kTwoPi * st);
}

void linreg_gradients_core(const ClientDataset& data, const double* theta, const double* mu,
                           double st, double sx, double* g_theta, double* g_mu, double& g_st,
                           double& g_sx, std::vector<double>& scratch) {
  const double rss = fill_residual(data, theta, scratch);
  const std::size_t n = static_cast<std::size_t>(data.n);
  for (std::int64_t c = 0; c < data.d; ++c) {
    const double data_pull = kern::dot(data.x.data() + c * data.n, scratch.data(), n);
    g_theta[c] = -data_pull / sx + (theta[c] - mu[c]) / st;
    g_mu[c] = (mu[c] - theta[c]) / st;
  }
  const double prior = kern::dist_sq(theta, mu, static_cast<std::size_t>(data.d));
  g_st = 0.5 * static_cast<double>(data.d) / st - prior / (2.0 * st * st);
  g_sx = 0.5 * static_cast<double>(data.n) / sx - rss / (2.0 * sx * sx);
}

double logreg_objective_core(const ClientDataset& data, const double* theta, const double* mu,
                             double st, std::vector<double>& scratch) {
  fill_logits(data, theta, scratch);
  double loss = 0.0;
  for (std::int64_t j = 0; j < data.n; ++j) loss += softplus(scratch[j]) - data.y[j] * scratch[j];
  const double prior = kern::dist_sq(theta, mu, static_cast<std::size_t>(data.d));
  return loss + prior / (2.0 * st) + 0.5 * static_cast<double>(data.d) * std::log(kTwoPi * st);
}

void logreg_gradients_core(const ClientDataset& data, const double* theta, const double* mu,
                           double st, double* g_theta, double* g_mu, double& g_st,
                           std::vector<double>& scratch) {
  fill_logits(data, theta, scratch);
  for (std::int64_t j = 0; j < data.n; ++j) scratch[j] = sigmoid(scratch[j]) - data.y[j];
  const std::size_t n = static_cast<std::size_t>(data.n);
  for (std::int64_t c = 0; c < data.d; ++c) {
    const double data_pull = kern::dot(data.x.data() + c * data.n, scratch.data(), n);
    g_theta[c] = data_pull + (theta[c] - mu[c]) / st;
    g_mu[c] = (mu[c] - theta[c]) / st;
  }
  const double prior = kern::dist_sq(theta, mu, static_cast<std::size_t>(data.d));
  g_st = 0.5 * static_cast<double>(data.d) / st - prior / (2.0 * st * st);
}

// Squared-loss value and gradient without any prior term, shared by the
// mixture loop and the averaged baseline.
double linreg_data_loss(const ClientDataset& data, const double* theta, double sx, double* g_theta,
                        std::vector<double>& scratch) {
  const double rss = fill_residual(data, theta, scratch);
  if (g_theta != nullptr) {
    const std::size_t n = static_cast<std::size_t>(data.n);
    for (std::int64_t c = 0; c < data.d; ++c)
      g_theta[c] = -kern::dot(data.x.data() + c * data.n, scratch.data(), n) / sx;
  }
  return rss / (2.0 * sx);
}

double logreg_data_loss(const ClientDataset& data, const double* theta, double* g_theta,
                        std::vector<double>& scratch) {
  fill_logits(data, theta, scratch);
  double loss = 0.0;
  for (std::int64_t j = 0; j < data.n; ++j) loss += softplus(scratch[j]) - data.y[j] * scratch[j];
  if (g_theta != nullptr) {
    for (std::int64_t j = 0; j < data.n; ++j) scratch[j] = sigmoid(scratch[j]) - data.y[j];
    const std::size_t n = static_cast<std::size_t>(data.n);
    for (std::int64_t c = 0; c < data.d; ++c)
      g_theta[c] = kern::dot(data.x.data() + c * data.n, scratch.data(), n);
  }
  return loss;
}

void check_divergence(double objective, const std::vector<double>& theta, double limit,
                      std::int64_t round) {
  bool bad = !std::isfinite(objective) || std::abs(objective) > limit;
  if (!bad) {
    for (double v : theta) {
      if (!std::isfinite(v) || std::abs(v) > limit) {
        bad = true;
        break;
      }
    }
  }
  if (bad)
    throw divergence_error("learn: run diverged at round " + std::to_string(round) +
                           " (objective " + std::to_string(objective) + ")");
}

// Mean over clients of |theta_i - truth_i|^2, plus the least-squares baseline
// and the headline improvement percentage.
template <typename Result>
void fill_learn_mse(Result& out, const SyntheticDataset& data, const std::vector<double>& theta) {
  const std::int64_t m = data.m;
  const std::int64_t d = data.d;
  if (static_cast<std::int64_t>(data.true_params.size()) != m * d) return;
  double err_sum = 0.0;
  double err_sq_sum = 0.0;
  double local_sum = 0.0;
  for (std::int64_t i = 0; i < m; ++i) {
    const double e = kern::dist_sq(theta.data() + i * d, data.true_param(i),
                                   static_cast<std::size_t>(d));
    err_sum += e;
    err_sq_sum += e * e;
    const std::vector<double> fit = ols_local(data.clients[i]);
    local_sum += kern::dist_sq(fit.data(), data.true_param(i), static_cast<std::size_t>(d));
  }
  const double md = static_cast<double>(m);
  out.has_mse = true;
  out.empirical_mse = err_sum / md;
  out.local_mse = local_sum / md;
  if (m > 1) {
    const double var = (err_sq_sum - md * out.empirical_mse * out.empirical_mse) / (md - 1.0);
    out.empirical_mse_stderr = std::sqrt(std::max(var, 0.0) / md);
  }
  if (out.local_mse > 0.0) out.gain_pct = 100.0 * (1.0 - out.empirical_mse / out.local_mse);
}

void require_mixture_structural(const GaussianMixturePrior& prior) {
  if (prior.k < 1 || prior.d < 1) throw param_error("mixture prior: k and d must be >= 1");
  if (static_cast<std::int64_t>(prior.probs.size()) != prior.k)
    throw param_error("mixture prior: probs length != k");
  if (static_cast<std::int64_t>(prior.centers.size()) != prior.k * prior.d)
    throw param_error("mixture prior: centers length != k*d");
  if (static_cast<std::int64_t>(prior.component_sds.size()) != prior.k)
    throw param_error("mixture prior: sds length != k");
  double total = 0.0;
  for (double p : prior.probs) {
    if (!(p >= 0.0)) throw param_error("mixture prior: negative probability");
    total += p;
  }
  if (!(total > 0.0)) throw param_error("mixture prior: no probability mass");
  for (double s : prior.component_sds) {
    if (!(s > 0.0) || !std::isfinite(s)) throw param_error("mixture prior: component sd must be > 0");
  }
}

RegularizerValue gmm_regularizer_core(const double* theta, const GaussianMixturePrior& prior) {
  const std::int64_t k = prior.k;
  const std::int64_t d = prior.d;
  std::vector<double> log_terms(k, -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t l = 0; l < k; ++l) {
    if (prior.probs[l] <= 0.0) continue;
    const double var = prior.component_sds[l] * prior.component_sds[l];
    const double dist = kern::dist_sq(theta, prior.centers.data() + l * d,
                                      static_cast<std::size_t>(d));
    log_terms[l] = std::log(prior.probs[l]) -
                   0.5 * static_cast<double>(d) * std::log(kTwoPi * var) - dist / (2.0 * var);
    best = std::max(best, log_terms[l]);
  }
  double total = 0.0;
  for (std::int64_t l = 0; l < k; ++l) {
    if (prior.probs[l] <= 0.0) continue;
    total += std::exp(log_terms[l] - best);
  }
  const double lse = best + std::log(total);
  RegularizerValue out;
  out.value = -lse;
  out.gradient.assign(d, 0.0);
  for (std::int64_t l = 0; l < k; ++l) {
    if (prior.probs[l] <= 0.0) continue;
    const double w = std::exp(log_terms[l] - lse);
    const double var = prior.component_sds[l] * prior.component_sds[l];
    const double* center = prior.centers.data() + l * d;
    for (std::int64_t c = 0; c < d; ++c) out.gradient[c] += w * (theta[c] - center[c]) / var;
  }
  return out;
}

// Re-fit a mixture from a clustering of the current parameters: cluster
// weights and centers carry over, the component sd is the within-cluster root
// mean square deviation per coordinate (floored; empty clusters keep zero
// weight and the floor sd).
GaussianMixturePrior mixture_from_cluster(const ClusterModel& model,
                                          const std::vector<double>& theta, std::int64_t m,
                                          double variance_floor) {
  GaussianMixturePrior mix;
  mix.k = model.k;
  mix.d = model.d;
  mix.probs = model.probs;
  mix.centers = model.centers;
  std::vector<double> ss(model.k, 0.0);
  std::vector<std::int64_t> counts(model.k, 0);
  for (std::int64_t i = 0; i < m; ++i) {
    const int a = model.assignment[i];
    ss[a] += kern::dist_sq(theta.data() + i * model.d, model.centers.data() + a * model.d,
                           static_cast<std::size_t>(model.d));
    ++counts[a];
  }
  mix.component_sds.assign(model.k, std::sqrt(variance_floor));
  for (std::int64_t l = 0; l < model.k; ++l) {
    if (counts[l] == 0) continue;
    const double ms = ss[l] / (static_cast<double>(counts[l]) * static_cast<double>(model.d));
    mix.component_sds[l] = std::sqrt(std::max(ms, variance_floor));
  }
  return mix;
}

LearnResult gd_run(const SyntheticDataset& data, const LearnConfig& config, const LearnInit& init,
                   bool logistic) {
  require_population(data, logistic);
  require_config(config);
  require_variance(init.sigma_theta_sq0, "sigma_theta_sq0");
  require_variance(init.sigma_x_sq0, "sigma_x_sq0");
  const std::int64_t m = data.m;
  const std::int64_t d = data.d;

  LearnResult out;
  LearnState& s = out.state;
  s.m = m;
  s.d = d;
  s.theta = expand_theta0(init, m, d);
  s.mu = expand_mu0(init, d);
  s.sigma_theta_sq = init.sigma_theta_sq0;
  s.sigma_x_sq = init.sigma_x_sq0;
  s.mu_local.resize(m * d);
  for (std::int64_t i = 0; i < m; ++i)
    std::copy(s.mu.begin(), s.mu.end(), s.mu_local.begin() + i * d);
  s.sigma_theta_sq_local.assign(m, s.sigma_theta_sq);
  s.sigma_x_sq_local.assign(m, s.sigma_x_sq);

  out.rounds.reserve(static_cast<std::size_t>(config.rounds));
  std::vector<double> g_theta(d), g_mu(d), scratch;
  std::vector<double> mu_bar(d);
  double eta = config.eta;

  for (std::int64_t t = 1; t <= config.rounds; ++t) {
    for (std::int64_t i = 0; i < m; ++i) {
      const ClientDataset& ds = data.clients[i];
      double* th = s.theta.data() + i * d;
      double* mul = s.mu_local.data() + i * d;
      double& stl = s.sigma_theta_sq_local[i];
      double& sxl = s.sigma_x_sq_local[i];
      double g_st = 0.0;
      double g_sx = 0.0;
      if (logistic) {
        logreg_gradients_core(ds, th, mul, stl, g_theta.data(), g_mu.data(), g_st, scratch);
      } else {
        linreg_gradients_core(ds, th, mul, stl, sxl, g_theta.data(), g_mu.data(), g_st, g_sx,
                              scratch);
      }
      // every block reads the pre-step values; commits happen together
      if (config.update_theta) {
        for (std::int64_t c = 0; c < d; ++c)
          th[c] -= eta * (g_theta[c] + config.weight_decay * th[c]);
      }
      if (config.update_mu) {
        for (std::int64_t c = 0; c < d; ++c) mul[c] -= eta * g_mu[c];
      }
      if (config.update_sigma_theta)
        stl = std::max(stl * std::exp(-eta * stl * g_st), config.variance_floor);
      if (!logistic && config.update_sigma_x)
        sxl = std::max(sxl * std::exp(-eta * sxl * g_sx), config.variance_floor);
    }

    // fixed client order keeps the aggregates bit-reproducible
    std::fill(mu_bar.begin(), mu_bar.end(), 0.0);
    double st_bar = 0.0;
    double sx_bar = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t c = 0; c < d; ++c) mu_bar[c] += s.mu_local[i * d + c];
      st_bar += s.sigma_theta_sq_local[i];
      sx_bar += s.sigma_x_sq_local[i];
    }
    const double md = static_cast<double>(m);
    for (std::int64_t c = 0; c < d; ++c) mu_bar[c] /= md;
    st_bar = std::max(st_bar / md, config.variance_floor);
    sx_bar = std::max(sx_bar / md, config.variance_floor);

    if (t % config.sync_every == 0) {
      s.mu = mu_bar;
      s.sigma_theta_sq = st_bar;
      s.sigma_x_sq = sx_bar;
      for (std::int64_t i = 0; i < m; ++i)
        std::copy(s.mu.begin(), s.mu.end(), s.mu_local.begin() + i * d);
      std::fill(s.sigma_theta_sq_local.begin(), s.sigma_theta_sq_local.end(), s.sigma_theta_sq);
      std::fill(s.sigma_x_sq_local.begin(), s.sigma_x_sq_local.end(), s.sigma_x_sq);
    }

    double objective = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double* th = s.theta.data() + i * d;
      objective += logistic
                       ? logreg_objective_core(data.clients[i], th, mu_bar.data(), st_bar, scratch)
                       : linreg_objective_core(data.clients[i], th, mu_bar.data(), st_bar, sx_bar,
                                               scratch);
    }
    check_divergence(objective, s.theta, config.divergence_limit, t);

    RoundRecord rec;
    rec.round = t;
    rec.objective = objective;
    rec.mu = mu_bar;
    rec.sigma_theta_sq = st_bar;
    rec.sigma_x_sq = logistic ? s.sigma_x_sq : sx_bar;
    out.rounds.push_back(std::move(rec));

    s.round = t;
    eta *= config.eta_decay;
  }

  if (!logistic) fill_learn_mse(out, data, s.theta);
  return out;
}

}  // namespace

std::vector<double> linreg_closed_form(const ClientDataset& data, const std::vector<double>& mu,
                                       double sigma_theta_sq, double sigma_x_sq) {
  require_learn_client(data, data.d, false);
  if (static_cast<std::int64_t>(mu.size()) != data.d)
    throw param_error("learn: mu length != d");
  require_variance(sigma_theta_sq, "sigma_theta_sq");
  require_variance(sigma_x_sq, "sigma_x_sq");
  const Eigen::Map<const Eigen::MatrixXd> x(data.x.data(), data.n, data.d);
  const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), data.n);
  const Eigen::Map<const Eigen::VectorXd> mean(mu.data(), data.d);
  Eigen::MatrixXd a = x.transpose() * x / sigma_x_sq;
  a.diagonal().array() += 1.0 / sigma_theta_sq;
  const Eigen::VectorXd b = x.transpose() * y / sigma_x_sq + mean / sigma_theta_sq;
  const Eigen::VectorXd sol = a.ldlt().solve(b);
  return std::vector<double>(sol.data(), sol.data() + data.d);
}

double linreg_mse_trace(const ClientDataset& data, double sigma_theta_sq, double sigma_x_sq) {
  if (data.n < 0 || data.d < 1 ||
      static_cast<std::int64_t>(data.x.size()) != data.n * data.d)
    throw input_error("learn: feature size != n*d");
  require_variance(sigma_theta_sq, "sigma_theta_sq");
  require_variance(sigma_x_sq, "sigma_x_sq");
  const Eigen::Map<const Eigen::MatrixXd> x(data.x.data(), data.n, data.d);
  Eigen::MatrixXd a = x.transpose() * x / sigma_x_sq;
  a.diagonal().array() += 1.0 / sigma_theta_sq;
  const Eigen::MatrixXd inv = a.ldlt().solve(Eigen::MatrixXd::Identity(data.d, data.d));
  return inv.trace();
}

std::vector<double> ols_local(const ClientDataset& data) {
  require_learn_client(data, data.d, false);
  if (data.n == 0) return std::vector<double>(data.d, 0.0);
  const Eigen::Map<const Eigen::MatrixXd> x(data.x.data(), data.n, data.d);
  const Eigen::Map<const Eigen::VectorXd> y(data.y.data(), data.n);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(x);
  const Eigen::VectorXd sol = cod.solve(y);
  return std::vector<double>(sol.data(), sol.data() + data.d);
}

double linreg_client_objective(const ClientDataset& data, const std::vector<double>& theta,
                               const std::vector<double>& mu, double sigma_theta_sq,
                               double sigma_x_sq) {
  require_learn_client(data, data.d, false);
  if (static_cast<std::int64_t>(theta.size()) != data.d ||
      static_cast<std::int64_t>(mu.size()) != data.d)
    throw param_error("learn: parameter length != d");
  require_variance(sigma_theta_sq, "sigma_theta_sq");
  require_variance(sigma_x_sq, "sigma_x_sq");
  std::vector<double> scratch;
  return linreg_objective_core(data, theta.data(), mu.data(), sigma_theta_sq, sigma_x_sq, scratch);
}

ClientGradients linreg_client_gradients(const ClientDataset& data, const std::vector<double>& theta,
                                        const std::vector<double>& mu, double sigma_theta_sq,
                                        double sigma_x_sq) {
  require_learn_client(data, data.d, false);
  if (static_cast<std::int64_t>(theta.size()) != data.d ||
      static_cast<std::int64_t>(mu.size()) != data.d)
    throw param_error("learn: parameter length != d");
  require_variance(sigma_theta_sq, "sigma_theta_sq");
  require_variance(sigma_x_sq, "sigma_x_sq");
  ClientGradients g;
  g.theta.resize(data.d);
  g.mu.resize(data.d);
  std::vector<double> scratch;
  linreg_gradients_core(data, theta.data(), mu.data(), sigma_theta_sq, sigma_x_sq, g.theta.data(),
                        g.mu.data(), g.sigma_theta_sq, g.sigma_x_sq, scratch);
  return g;
}

double logreg_client_objective(const ClientDataset& data, const std::vector<double>& theta,
                               const std::vector<double>& mu, double sigma_theta_sq) {
  require_learn_client(data, data.d, true);
  if (static_cast<std::int64_t>(theta.size()) != data.d ||
      static_cast<std::int64_t>(mu.size()) != data.d)
    throw param_error("learn: parameter length != d");
  require_variance(sigma_theta_sq, "sigma_theta_sq");
  std::vector<double> scratch;
  return logreg_objective_core(data, theta.data(), mu.data(), sigma_theta_sq, scratch);
}

ClientGradients logreg_client_gradients(const ClientDataset& data, const std::vector<double>& theta,
                                        const std::vector<double>& mu, double sigma_theta_sq) {
  require_learn_client(data, data.d, true);
  if (static_cast<std::int64_t>(theta.size()) != data.d ||
      static_cast<std::int64_t>(mu.size()) != data.d)
    throw param_error("learn: parameter length != d");
  require_variance(sigma_theta_sq, "sigma_theta_sq");
  ClientGradients g;
  g.theta.resize(data.d);
  g.mu.resize(data.d);
  std::vector<double> scratch;
  logreg_gradients_core(data, theta.data(), mu.data(), sigma_theta_sq, g.theta.data(), g.mu.data(),
                        g.sigma_theta_sq, scratch);
  return g;
}

LearnResult linreg_gd_run(const SyntheticDataset& data, const LearnConfig& config,
                          const LearnInit& init) {
  return gd_run(data, config, init, false);
}

LearnResult logreg_gd_run(const SyntheticDataset& data, const LearnConfig& config,
                          const LearnInit& init) {
  return gd_run(data, config, init, true);
}

RegularizerValue gmm_prior_regularizer(const std::vector<double>& theta,
                                       const GaussianMixturePrior& prior) {
  require_mixture_structural(prior);
  if (static_cast<std::int64_t>(theta.size()) != prior.d)
    throw param_error("learn: theta length != prior dimension");
  return gmm_regularizer_core(theta.data(), prior);
}

GmmLearnResult gmm_prior_learning(const SyntheticDataset& data, std::int64_t k,
                                  const LearnConfig& config, const LearnInit& init,
                                  std::uint64_t seed, const GaussianMixturePrior* prior0) {
  require_population(data, false);
  require_config(config);
  require_variance(init.sigma_x_sq0, "sigma_x_sq0");
  if (k < 1) throw param_error("learn: k must be >= 1");
  if (k > data.m) throw param_error("learn: k must not exceed the client count");
  const std::int64_t m = data.m;
  const std::int64_t d = data.d;
  const double sx = init.sigma_x_sq0;

  GmmLearnResult out;
  out.m = m;
  out.d = d;
  out.k = k;
  out.theta = expand_theta0(init, m, d);

  GaussianMixturePrior mix;
  if (prior0 != nullptr) {
    require_mixture_structural(*prior0);
    if (prior0->k != k || prior0->d != d)
      throw param_error("learn: prior0 shape does not match k and d");
    mix = *prior0;
  } else {
    Rng rc = substream(seed, 0, 0, StreamTag::cluster_seed);
    const ClusterModel model = lloyd_cluster(out.theta, m, d, k, rc);
    mix = mixture_from_cluster(model, out.theta, m, config.variance_floor);
  }

  out.objective_path.reserve(static_cast<std::size_t>(config.rounds));
  std::vector<double> g_data(d), theta_i(d), scratch;
  double eta = config.eta;

  for (std::int64_t t = 1; t <= config.rounds; ++t) {
    for (std::int64_t i = 0; i < m; ++i) {
      double* th = out.theta.data() + i * d;
      for (std::int64_t step = 0; step < config.sync_every; ++step) {
        theta_i.assign(th, th + d);
        const RegularizerValue reg = gmm_regularizer_core(theta_i.data(), mix);
        linreg_data_loss(data.clients[i], theta_i.data(), sx, g_data.data(), scratch);
        for (std::int64_t c = 0; c < d; ++c)
          th[c] -= eta * (g_data[c] + reg.gradient[c] + config.weight_decay * th[c]);
      }
    }

    Rng rc = substream(seed, 0, t, StreamTag::cluster_seed);
    const ClusterModel model = lloyd_cluster(out.theta, m, d, k, rc);
    mix = mixture_from_cluster(model, out.theta, m, config.variance_floor);

    double objective = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double* th = out.theta.data() + i * d;
      theta_i.assign(th, th + d);
      objective += linreg_data_loss(data.clients[i], theta_i.data(), sx, nullptr, scratch) +
                   gmm_regularizer_core(theta_i.data(), mix).value;
    }
    objective /= static_cast<double>(m);
    check_divergence(objective, out.theta, config.divergence_limit, t);
    out.objective_path.push_back(objective);
    eta *= config.eta_decay;
  }

  out.mixture = mix;
  fill_learn_mse(out, data, out.theta);
  return out;
}

DiscreteRegressionResult discrete_prior_regression(const SyntheticDataset& data, std::int64_t k,
                                                   std::int64_t rounds, double sigma_x_sq,
                                                   std::uint64_t seed) {
  require_population(data, false);
  if (k < 1) throw param_error("learn: k must be >= 1");
  if (k > data.m) throw param_error("learn: k must not exceed the client count");
  if (rounds < 1) throw param_error("learn: rounds must be >= 1");
  require_variance(sigma_x_sq, "sigma_x_sq");
  const std::int64_t m = data.m;
  const std::int64_t d = data.d;

  DiscreteRegressionResult out;
  out.m = m;
  out.d = d;
  out.k = k;
  out.theta.resize(m * d);
  for (std::int64_t i = 0; i < m; ++i) {
    const std::vector<double> fit = ols_local(data.clients[i]);
    std::copy(fit.begin(), fit.end(), out.theta.begin() + i * d);
  }

  std::vector<double> probs;
  std::vector<double> centers;
  {
    Rng rc = substream(seed, 0, 0, StreamTag::cluster_seed);
    const ClusterModel model = lloyd_cluster(out.theta, m, d, k, rc);
    probs = model.probs;
    centers = model.centers;
  }

  std::vector<double> log_terms(k), weights(k), scratch;
  auto combine_round = [&](std::vector<double>* weights_out) {
    for (std::int64_t i = 0; i < m; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::int64_t l = 0; l < k; ++l) {
        if (probs[l] <= 0.0) {
          log_terms[l] = -std::numeric_limits<double>::infinity();
          continue;
        }
        const double rss = fill_residual(data.clients[i], centers.data() + l * d, scratch);
        log_terms[l] = std::log(probs[l]) - rss / (2.0 * sigma_x_sq);
        best = std::max(best, log_terms[l]);
      }
      double total = 0.0;
      for (std::int64_t l = 0; l < k; ++l) {
        weights[l] = probs[l] > 0.0 ? std::exp(log_terms[l] - best) : 0.0;
        total += weights[l];
      }
      double* th = out.theta.data() + i * d;
      std::fill(th, th + d, 0.0);
      for (std::int64_t l = 0; l < k; ++l) {
        weights[l] /= total;
        kern::axpy(weights[l], centers.data() + l * d, th, static_cast<std::size_t>(d));
      }
      if (weights_out != nullptr)
        std::copy(weights.begin(), weights.end(), weights_out->begin() + i * k);
    }
  };

  for (std::int64_t t = 1; t <= rounds; ++t) {
    combine_round(nullptr);
    Rng rc = substream(seed, 0, t, StreamTag::cluster_seed);
    const ClusterModel model = lloyd_cluster(out.theta, m, d, k, rc);
    probs = model.probs;
    centers = model.centers;
  }

  out.weights.resize(m * k);
  combine_round(&out.weights);

  out.prior.k = k;
  out.prior.d = d;
  out.prior.probs = probs;
  out.prior.centers = centers;
  fill_learn_mse(out, data, out.theta);
  return out;
}

FedAvgResult fedavg_baseline(const SyntheticDataset& data, ModelFamily family,
                             const LearnConfig& config, const LearnInit& init) {
  const bool logistic = family == ModelFamily::logistic_regression;
  require_population(data, logistic);
  require_config(config);
  require_variance(init.sigma_x_sq0, "sigma_x_sq0");
  const std::int64_t m = data.m;
  const std::int64_t d = data.d;
  if (!init.theta0.empty() && static_cast<std::int64_t>(init.theta0.size()) != d)
    throw param_error("learn: baseline theta0 length must be 0 or d");
  const double sx = init.sigma_x_sq0;

  FedAvgResult out;
  out.m = m;
  out.d = d;
  out.global = init.theta0.empty() ? std::vector<double>(d, 0.0) : init.theta0;
  out.objective_path.reserve(static_cast<std::size_t>(config.rounds));

  std::vector<double> next(d), local(d), grad(d), scratch;
  double eta = config.eta;
  for (std::int64_t t = 1; t <= config.rounds; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
      local = out.global;
      for (std::int64_t step = 0; step < config.sync_every; ++step) {
        if (logistic) {
          logreg_data_loss(data.clients[i], local.data(), grad.data(), scratch);
        } else {
          linreg_data_loss(data.clients[i], local.data(), sx, grad.data(), scratch);
        }
        for (std::int64_t c = 0; c < d; ++c)
          local[c] -= eta * (grad[c] + config.weight_decay * local[c]);
      }
      for (std::int64_t c = 0; c < d; ++c) next[c] += local[c];
    }
    for (std::int64_t c = 0; c < d; ++c) out.global[c] = next[c] / static_cast<double>(m);

    double objective = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      objective += logistic
                       ? logreg_data_loss(data.clients[i], out.global.data(), nullptr, scratch)
                       : linreg_data_loss(data.clients[i], out.global.data(), sx, nullptr, scratch);
    }
    objective /= static_cast<double>(m);
    check_divergence(objective, out.global, config.divergence_limit, t);
    out.objective_path.push_back(objective);
    eta *= config.eta_decay;
  }

  out.client_loss.resize(m);
  for (std::int64_t i = 0; i < m; ++i) {
    out.client_loss[i] = logistic
                             ? logreg_data_loss(data.clients[i], out.global.data(), nullptr, scratch)
                             : linreg_data_loss(data.clients[i], out.global.data(), sx, nullptr,
                                                scratch);
  }

  if (static_cast<std::int64_t>(data.true_params.size()) == m * d) {
    double err_sum = 0.0;
    double err_sq_sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double e = kern::dist_sq(out.global.data(), data.true_param(i),
                                     static_cast<std::size_t>(d));
      err_sum += e;
      err_sq_sum += e * e;
    }
    const double md = static_cast<double>(m);
    out.has_mse = true;
    out.empirical_mse = err_sum / md;
    if (m > 1) {
      const double var = (err_sq_sum - md * out.empirical_mse * out.empirical_mse) / (md - 1.0);
      out.empirical_mse_stderr = std::sqrt(std::max(var, 0.0) / md);
    }
  }
  return out;
}

}  // namespace fedbayes
