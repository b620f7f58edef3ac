#include "fedbayes/adaped.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"
#include "fedbayes/rng.hpp"

namespace fedbayes {

namespace {

struct Layout {
  std::int64_t w1 = 0;
  std::int64_t b1 = 0;
  std::int64_t w2 = 0;
  std::int64_t b2 = 0;
};

Layout layout_of(const Classifier& model) {
  Layout l;
  if (model.arch == ClassifierArch::linear_softmax) {
    l.w1 = 0;
    l.b1 = model.classes * model.d_in;
  } else {
    l.w1 = 0;
    l.b1 = model.hidden * model.d_in;
    l.w2 = l.b1 + model.hidden;
    l.b2 = l.w2 + model.classes * model.hidden;
  }
  return l;
}

// Per-example activations kept around for the backward pass.
struct Forward {
  std::vector<double> act;
  std::vector<double> logits;
  std::vector<double> logp;
  std::vector<double> probs;
};

void softmax_stable(const std::vector<double>& z, std::vector<double>& logp,
                    std::vector<double>& probs) {
  const std::size_t c = z.size();
  logp.resize(c);
  probs.resize(c);
  double zmax = z[0];
  for (std::size_t i = 1; i < c; ++i) zmax = std::max(zmax, z[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < c; ++i) total += std::exp(z[i] - zmax);
  const double lse = zmax + std::log(total);
  for (std::size_t i = 0; i < c; ++i) {
    logp[i] = z[i] - lse;
    probs[i] = std::exp(logp[i]);
  }
}

void forward_example(const Classifier& model, const Layout& l, const double* params,
                     const double* x, Forward& f) {
  f.logits.resize(static_cast<std::size_t>(model.classes));
  if (model.arch == ClassifierArch::linear_softmax) {
    for (std::int64_t c = 0; c < model.classes; ++c)
      f.logits[c] = kern::dot(params + c * model.d_in, x, static_cast<std::size_t>(model.d_in)) +
                    params[l.b1 + c];
  } else {
    f.act.resize(static_cast<std::size_t>(model.hidden));
    for (std::int64_t h = 0; h < model.hidden; ++h)
      f.act[h] = std::tanh(
          kern::dot(params + h * model.d_in, x, static_cast<std::size_t>(model.d_in)) +
          params[l.b1 + h]);
    for (std::int64_t c = 0; c < model.classes; ++c)
      f.logits[c] =
          kern::dot(params + l.w2 + c * model.hidden, f.act.data(),
                    static_cast<std::size_t>(model.hidden)) +
          params[l.b2 + c];
  }
  softmax_stable(f.logits, f.logp, f.probs);
}

void backward_example(const Classifier& model, const Layout& l, const double* params,
                      const double* x, const Forward& f, const double* dlogits, double* grad,
                      std::vector<double>& dpre) {
  if (model.arch == ClassifierArch::linear_softmax) {
    for (std::int64_t c = 0; c < model.classes; ++c) {
      kern::axpy(dlogits[c], x, grad + c * model.d_in, static_cast<std::size_t>(model.d_in));
      grad[l.b1 + c] += dlogits[c];
    }
    return;
  }
  dpre.assign(static_cast<std::size_t>(model.hidden), 0.0);
  for (std::int64_t c = 0; c < model.classes; ++c) {
    kern::axpy(dlogits[c], f.act.data(), grad + l.w2 + c * model.hidden,
               static_cast<std::size_t>(model.hidden));
    grad[l.b2 + c] += dlogits[c];
    kern::axpy(dlogits[c], params + l.w2 + c * model.hidden, dpre.data(),
               static_cast<std::size_t>(model.hidden));
  }
  for (std::int64_t h = 0; h < model.hidden; ++h) {
    const double dh = dpre[h] * (1.0 - f.act[h] * f.act[h]);
    kern::axpy(dh, x, grad + h * model.d_in, static_cast<std::size_t>(model.d_in));
    grad[l.b1 + h] += dh;
  }
}

void require_batch(const Classifier& model, const ClientDataset& batch) {
  if (batch.n < 1) throw input_error("classifier batch: needs at least one example");
  if (batch.d != model.d_in) throw input_error("classifier batch: feature width mismatch");
  if (batch.x.size() != static_cast<std::size_t>(batch.n * batch.d))
    throw input_error("classifier batch: feature buffer size mismatch");
  if (batch.y.size() != static_cast<std::size_t>(batch.n))
    throw input_error("classifier batch: label buffer size mismatch");
  for (std::int64_t j = 0; j < batch.n; ++j) {
    const double y = batch.y[j];
    if (!(y >= 0.0) || y >= static_cast<double>(model.classes) || y != std::floor(y))
      throw input_error("classifier batch: labels must be whole numbers in [0, classes)");
  }
}

void require_params(const Classifier& model, const std::vector<double>& params, const char* name) {
  if (params.size() != static_cast<std::size_t>(model.dim()))
    throw param_error(std::string("classifier: ") + name + " has wrong length");
}

void gather_example(const ClientDataset& batch, std::int64_t j, std::vector<double>& xrow) {
  for (std::int64_t c = 0; c < batch.d; ++c) xrow[c] = batch.x[c * batch.n + j];
}

}  // namespace

std::int64_t Classifier::dim() const {
  if (arch == ClassifierArch::linear_softmax) return classes * (d_in + 1);
  return hidden * (d_in + 1) + classes * (hidden + 1);
}

void Classifier::validate() const {
  if (d_in < 1) throw config_error("classifier: d_in must be >= 1");
  if (classes < 2) throw config_error("classifier: needs at least two classes");
  if (arch == ClassifierArch::one_hidden && hidden < 1)
    throw config_error("classifier: hidden width must be >= 1");
  if (arch == ClassifierArch::linear_softmax && hidden != 0)
    throw config_error("classifier: hidden width set on a linear model");
}

void classifier_forward(const Classifier& model, const std::vector<double>& params,
                        const double* x, double* probs) {
  model.validate();
  require_params(model, params, "params");
  const Layout l = layout_of(model);
  Forward f;
  forward_example(model, l, params.data(), x, f);
  std::copy(f.probs.begin(), f.probs.end(), probs);
}

double ce_loss(const Classifier& model, const std::vector<double>& params,
               const ClientDataset& batch, double* grad) {
  model.validate();
  require_params(model, params, "params");
  require_batch(model, batch);
  const Layout l = layout_of(model);
  if (grad != nullptr) std::fill(grad, grad + model.dim(), 0.0);

  const double inv = 1.0 / static_cast<double>(batch.n);
  std::vector<double> xrow(batch.d), dz(model.classes), dpre;
  Forward f;
  double loss = 0.0;
  for (std::int64_t j = 0; j < batch.n; ++j) {
    gather_example(batch, j, xrow);
    forward_example(model, l, params.data(), xrow.data(), f);
    const std::int64_t y = static_cast<std::int64_t>(batch.y[j]);
    loss += -f.logp[y];
    if (grad != nullptr) {
      for (std::int64_t c = 0; c < model.classes; ++c)
        dz[c] = (f.probs[c] - (c == y ? 1.0 : 0.0)) * inv;
      backward_example(model, l, params.data(), xrow.data(), f, dz.data(), grad, dpre);
    }
  }
  return loss * inv;
}

KdValue kd_loss(const Classifier& model, const std::vector<double>& theta,
                const std::vector<double>& mu, const ClientDataset& batch, bool reverse) {
  model.validate();
  require_params(model, theta, "theta");
  require_params(model, mu, "mu");
  require_batch(model, batch);
  const Layout l = layout_of(model);

  KdValue out;
  out.grad_theta.assign(static_cast<std::size_t>(model.dim()), 0.0);
  out.grad_mu.assign(static_cast<std::size_t>(model.dim()), 0.0);

  const double inv = 1.0 / static_cast<double>(batch.n);
  std::vector<double> xrow(batch.d), dzt(model.classes), dzm(model.classes), dpre;
  Forward ft, fm;
  double total = 0.0;
  for (std::int64_t j = 0; j < batch.n; ++j) {
    gather_example(batch, j, xrow);
    forward_example(model, l, theta.data(), xrow.data(), ft);
    forward_example(model, l, mu.data(), xrow.data(), fm);
    // the teacher is whichever side sits on the left of the divergence
    const Forward& lead = reverse ? ft : fm;
    const Forward& follow = reverse ? fm : ft;
    double kl = 0.0;
    for (std::int64_t c = 0; c < model.classes; ++c)
      kl += lead.probs[c] * (lead.logp[c] - follow.logp[c]);
    total += kl;
    for (std::int64_t c = 0; c < model.classes; ++c) {
      const double lead_grad = lead.probs[c] * ((lead.logp[c] - follow.logp[c]) - kl) * inv;
      const double follow_grad = (follow.probs[c] - lead.probs[c]) * inv;
      dzt[c] = reverse ? lead_grad : follow_grad;
      dzm[c] = reverse ? follow_grad : lead_grad;
    }
    backward_example(model, l, theta.data(), xrow.data(), ft, dzt.data(), out.grad_theta.data(),
                     dpre);
    backward_example(model, l, mu.data(), xrow.data(), fm, dzm.data(), out.grad_mu.data(), dpre);
  }
  out.value = std::max(0.0, total * inv);
  return out;
}

double local_objective(const Classifier& model, const std::vector<double>& theta,
                       const std::vector<double>& mu, double psi, const ClientDataset& batch,
                       bool reverse) {
  if (!(psi > 0.0)) throw param_error("local_objective: psi must be positive");
  const double ce = ce_loss(model, theta, batch, nullptr);
  const KdValue kd = kd_loss(model, theta, mu, batch, reverse);
  return ce + 0.5 * std::log(2.0 * psi) + kd.value / (2.0 * psi);
}

double psi_gradient(double psi, double f_kd) {
  return 1.0 / (2.0 * psi) - f_kd / (2.0 * psi * psi);
}

void AdaPedConfig::validate() const {
  model.validate();
  if (rounds < 1) throw config_error("adaped: rounds must be >= 1");
  if (tau < 1) throw config_error("adaped: tau must be >= 1");
  if (clients_per_round < 0) throw config_error("adaped: clients_per_round must be >= 0");
  if (!(eta1 >= 0.0) || !(eta2 >= 0.0) || !(eta3 >= 0.0))
    throw config_error("adaped: learning rates must be >= 0");
  if (!(psi0 > 0.0)) throw config_error("adaped: psi0 must be positive");
  if (!(psi_floor > 0.0)) throw config_error("adaped: psi_floor must be positive");
  if (batch_size < 0) throw config_error("adaped: batch_size must be >= 0");
  if (!(kd_weight >= 0.0)) throw config_error("adaped: kd_weight must be >= 0");
  if (!(divergence_limit > 0.0)) throw config_error("adaped: divergence_limit must be positive");
}

void DpAdaPedConfig::validate() const {
  clip.validate();
  if (!(sigma_q1 >= 0.0) || !(sigma_q2 >= 0.0))
    throw param_error("dp-adaped: noise scales must be >= 0");
}

namespace {

std::vector<double> expand_adaped_theta0(const AdaPedConfig& cfg, std::int64_t m, std::int64_t d) {
  std::vector<double> theta(static_cast<std::size_t>(m * d), 0.0);
  if (cfg.theta0.empty()) return theta;
  if (cfg.theta0.size() == static_cast<std::size_t>(d)) {
    for (std::int64_t i = 0; i < m; ++i)
      std::copy(cfg.theta0.begin(), cfg.theta0.end(), theta.begin() + i * d);
    return theta;
  }
  if (cfg.theta0.size() == static_cast<std::size_t>(m * d)) {
    std::copy(cfg.theta0.begin(), cfg.theta0.end(), theta.begin());
    return theta;
  }
  throw param_error("adaped: theta0 must be empty, dim, or m*dim long");
}

std::vector<double> expand_adaped_mu0(const AdaPedConfig& cfg, std::int64_t d) {
  if (cfg.mu0.empty()) return std::vector<double>(static_cast<std::size_t>(d), 0.0);
  if (cfg.mu0.size() == static_cast<std::size_t>(d)) return cfg.mu0;
  throw param_error("adaped: mu0 must be empty or dim long");
}

void make_minibatch(const ClientDataset& full, std::int64_t b, Rng& rng, ClientDataset& out) {
  out.client_id = full.client_id;
  out.n = b;
  out.d = full.d;
  out.x.resize(static_cast<std::size_t>(b * full.d));
  out.y.resize(static_cast<std::size_t>(b));
  for (std::int64_t j = 0; j < b; ++j) {
    const std::int64_t pick =
        static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(full.n)));
    for (std::int64_t c = 0; c < full.d; ++c) out.x[c * b + j] = full.x[c * full.n + pick];
    out.y[j] = full.y[pick];
  }
}

bool all_within(const std::vector<double>& v, double limit) {
  for (const double x : v)
    if (!std::isfinite(x) || std::abs(x) > limit) return false;
  return true;
}

AdaPedResult run_engine(const std::vector<ClientDataset>& train, const AdaPedConfig& cfg,
                        const DpAdaPedConfig* dp, std::uint64_t seed,
                        const std::vector<ClientDataset>* test, bool finetune,
                        double* max_norm_out, double* max_scalar_out) {
  cfg.validate();
  if (train.empty()) throw input_error("adaped: empty client list");
  const std::int64_t m = static_cast<std::int64_t>(train.size());
  const Classifier& model = cfg.model;
  const std::int64_t d = model.dim();
  for (const ClientDataset& client : train) require_batch(model, client);

  const std::int64_t K = cfg.clients_per_round == 0 ? m : cfg.clients_per_round;
  if (K < 1 || K > m) throw param_error("adaped: clients_per_round must be in [1, m]");
  const bool joint = dp != nullptr && dp->clip.mode == ClipSpec::Mode::joint;

  std::vector<double> theta = expand_adaped_theta0(cfg, m, d);
  std::vector<double> mu_server = expand_adaped_mu0(cfg, d);
  double psi_server = std::max(cfg.psi0, cfg.psi_floor);
  std::vector<double> mu_local(static_cast<std::size_t>(m * d));
  for (std::int64_t i = 0; i < m; ++i)
    std::copy(mu_server.begin(), mu_server.end(), mu_local.begin() + i * d);
  std::vector<double> psi_local(static_cast<std::size_t>(m), psi_server);

  AdaPedResult res;
  res.m = m;
  res.dim = d;
  res.rounds.reserve(static_cast<std::size_t>(cfg.rounds));

  std::vector<std::int64_t> sampled;
  std::vector<std::int64_t> unsync(static_cast<std::size_t>(m), 0);
  std::vector<double> g_ce(d), step(d), h(d);
  std::vector<std::int64_t> pool(static_cast<std::size_t>(m));
  ClientDataset scratch;
  double max_norm = 0.0;
  double max_scalar = 0.0;

  for (std::int64_t t = 0; t < cfg.rounds; ++t) {
    if (t % cfg.tau == 0) {
      for (std::int64_t i = 0; i < m; ++i) pool[i] = i;
      Rng pick = substream(seed, 0, static_cast<std::uint64_t>(t), StreamTag::client_sample);
      for (std::int64_t j = 0; j < K; ++j) {
        const std::int64_t r =
            j + static_cast<std::int64_t>(pick.below(static_cast<std::uint64_t>(m - j)));
        std::swap(pool[j], pool[r]);
      }
      sampled.assign(pool.begin(), pool.begin() + K);
      std::sort(sampled.begin(), sampled.end());
      for (const std::int64_t i : sampled) {
        std::copy(mu_server.begin(), mu_server.end(), mu_local.begin() + i * d);
        psi_local[i] = psi_server;
        unsync[i] = 0;
      }
    }

    double kd_sum = 0.0;
    double ce_sum = 0.0;
    for (const std::int64_t i : sampled) {
      const ClientDataset* batch = &train[i];
      if (cfg.batch_size > 0) {
        Rng rb = substream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                           StreamTag::minibatch);
        make_minibatch(train[i], cfg.batch_size, rb, scratch);
        batch = &scratch;
      }
      std::vector<double> theta_i(theta.begin() + i * d, theta.begin() + (i + 1) * d);
      std::vector<double> mu_i(mu_local.begin() + i * d, mu_local.begin() + (i + 1) * d);
      const double psi = psi_local[i];

      const double ce = ce_loss(model, theta_i, *batch, g_ce.data());
      ce_sum += ce;
      if (cfg.kd_weight != 0.0) {
        const KdValue kd0 = kd_loss(model, theta_i, mu_i, *batch, cfg.reverse_kd);
        const double scale = cfg.kd_weight / (2.0 * psi);
        for (std::int64_t c = 0; c < d; ++c) step[c] = g_ce[c] + scale * kd0.grad_theta[c];
      } else {
        std::copy(g_ce.begin(), g_ce.end(), step.begin());
      }
      for (std::int64_t c = 0; c < d; ++c) theta_i[c] -= cfg.eta1 * step[c];

      const KdValue kd1 = kd_loss(model, theta_i, mu_i, *batch, cfg.reverse_kd);
      for (std::int64_t c = 0; c < d; ++c) h[c] = kd1.grad_mu[c] / (2.0 * psi);

      double k;
      if (joint) {
        // the concatenated update must exist before either half is applied,
        // so the scalar gradient reads the pre-update global copy
        k = psi_gradient(psi, kd1.value);
        const double norm = std::sqrt(kern::sum_sq(h.data(), static_cast<std::size_t>(d)) + k * k);
        const double den = std::max(norm / dp->clip.c1, 1.0);
        for (std::int64_t c = 0; c < d; ++c) h[c] /= den;
        k /= den;
        max_norm = std::max(max_norm, norm / den);
        if (dp->sigma_q1 > 0.0) {
          Rng rn = substream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                             StreamTag::noise_model);
          for (std::int64_t c = 0; c < d; ++c) h[c] += rn.gaussian(0.0, dp->sigma_q1);
          k += rn.gaussian(0.0, dp->sigma_q1);
        }
        for (std::int64_t c = 0; c < d; ++c) mu_i[c] -= cfg.eta2 * h[c];
        kd_sum += kd1.value;
      } else {
        if (dp != nullptr) {
          const double norm = std::sqrt(kern::sum_sq(h.data(), static_cast<std::size_t>(d)));
          const double den = std::max(norm / dp->clip.c1, 1.0);
          for (std::int64_t c = 0; c < d; ++c) h[c] /= den;
          max_norm = std::max(max_norm, norm / den);
          if (dp->sigma_q1 > 0.0) {
            Rng rn = substream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                               StreamTag::noise_model);
            for (std::int64_t c = 0; c < d; ++c) h[c] += rn.gaussian(0.0, dp->sigma_q1);
          }
        }
        for (std::int64_t c = 0; c < d; ++c) mu_i[c] -= cfg.eta2 * h[c];

        const KdValue kd2 = kd_loss(model, theta_i, mu_i, *batch, cfg.reverse_kd);
        k = psi_gradient(psi, kd2.value);
        kd_sum += kd2.value;
        if (dp != nullptr) {
          const double den = std::max(std::abs(k) / dp->clip.c2, 1.0);
          k /= den;
          max_scalar = std::max(max_scalar, std::abs(k));
          if (dp->sigma_q2 > 0.0) {
            Rng rp = substream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                               StreamTag::noise_psi);
            k += rp.gaussian(0.0, dp->sigma_q2);
          }
        }
      }
      psi_local[i] = std::max(psi - cfg.eta3 * k, cfg.psi_floor);

      std::copy(theta_i.begin(), theta_i.end(), theta.begin() + i * d);
      std::copy(mu_i.begin(), mu_i.end(), mu_local.begin() + i * d);
    }

    if (finetune && cfg.finetune_cap != 0) {
      std::size_t cursor = 0;
      for (std::int64_t i = 0; i < m; ++i) {
        if (cursor < sampled.size() && sampled[cursor] == i) {
          ++cursor;
          continue;
        }
        if (cfg.finetune_cap > 0 && unsync[i] >= cfg.finetune_cap) continue;
        const ClientDataset* batch = &train[i];
        if (cfg.batch_size > 0) {
          Rng rb = substream(seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t),
                             StreamTag::minibatch);
          make_minibatch(train[i], cfg.batch_size, rb, scratch);
          batch = &scratch;
        }
        std::vector<double> theta_i(theta.begin() + i * d, theta.begin() + (i + 1) * d);
        std::vector<double> mu_i(mu_local.begin() + i * d, mu_local.begin() + (i + 1) * d);
        ce_loss(model, theta_i, *batch, g_ce.data());
        if (cfg.kd_weight != 0.0) {
          const KdValue kd0 = kd_loss(model, theta_i, mu_i, *batch, cfg.reverse_kd);
          const double scale = cfg.kd_weight / (2.0 * psi_local[i]);
          for (std::int64_t c = 0; c < d; ++c) step[c] = g_ce[c] + scale * kd0.grad_theta[c];
        } else {
          std::copy(g_ce.begin(), g_ce.end(), step.begin());
        }
        for (std::int64_t c = 0; c < d; ++c) theta_i[c] -= cfg.eta1 * step[c];
        std::copy(theta_i.begin(), theta_i.end(), theta.begin() + i * d);
        ++unsync[i];
      }
    }

    if ((t + 1) % cfg.tau == 0) {
      std::fill(mu_server.begin(), mu_server.end(), 0.0);
      double psi_acc = 0.0;
      for (const std::int64_t i : sampled) {
        kern::axpy(1.0, mu_local.data() + i * d, mu_server.data(), static_cast<std::size_t>(d));
        psi_acc += psi_local[i];
      }
      const double inv_k = 1.0 / static_cast<double>(K);
      kern::scal(inv_k, mu_server.data(), static_cast<std::size_t>(d));
      psi_server = psi_acc * inv_k;
    }

    AdaPedRound rec;
    rec.round = t;
    rec.psi = psi_server;
    double psi_acc = 0.0;
    for (const std::int64_t i : sampled) psi_acc += psi_local[i];
    rec.mean_psi_local = psi_acc / static_cast<double>(K);
    rec.mean_kd = kd_sum / static_cast<double>(K);
    rec.mean_ce = ce_sum / static_cast<double>(K);
    res.rounds.push_back(rec);

    if (!all_within(theta, cfg.divergence_limit) || !all_within(mu_local, cfg.divergence_limit) ||
        !all_within(psi_local, cfg.divergence_limit) || !std::isfinite(psi_server))
      throw divergence_error("adaped: diverged at round " + std::to_string(t));
  }

  res.theta = std::move(theta);
  res.mu = mu_server;
  res.psi = psi_server;

  if (test != nullptr) {
    if (test->size() != static_cast<std::size_t>(m))
      throw input_error("adaped: test set count must match client count");
    res.has_accuracy = true;
    res.accuracy.resize(static_cast<std::size_t>(m));
    std::vector<double> xrow(model.d_in), probs(model.classes);
    const Layout l = layout_of(model);
    Forward f;
    double total = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const ClientDataset& ts = (*test)[i];
      require_batch(model, ts);
      std::int64_t correct = 0;
      for (std::int64_t j = 0; j < ts.n; ++j) {
        for (std::int64_t c = 0; c < ts.d; ++c) xrow[c] = ts.x[c * ts.n + j];
        forward_example(model, l, res.theta.data() + i * model.dim(), xrow.data(), f);
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < model.classes; ++c)
          if (f.probs[c] > f.probs[best]) best = c;
        if (best == static_cast<std::int64_t>(ts.y[j])) ++correct;
      }
      res.accuracy[i] = static_cast<double>(correct) / static_cast<double>(ts.n);
      total += res.accuracy[i];
    }
    res.mean_accuracy = total / static_cast<double>(m);
  }

  if (max_norm_out != nullptr) *max_norm_out = max_norm;
  if (max_scalar_out != nullptr) *max_scalar_out = max_scalar;
  return res;
}

}  // namespace

AdaPedResult adaped_run(const std::vector<ClientDataset>& train, const AdaPedConfig& config,
                        std::uint64_t seed, const std::vector<ClientDataset>* test) {
  return run_engine(train, config, nullptr, seed, test, false, nullptr, nullptr);
}

AdaPedResult adaped_finetune_run(const std::vector<ClientDataset>& train,
                                 const AdaPedConfig& config, std::uint64_t seed,
                                 const std::vector<ClientDataset>* test) {
  return run_engine(train, config, nullptr, seed, test, true, nullptr, nullptr);
}

DpAdaPedResult dp_adaped_run(const std::vector<ClientDataset>& train, const AdaPedConfig& config,
                             const DpAdaPedConfig& dp, std::uint64_t seed,
                             const std::vector<ClientDataset>* test, bool finetune) {
  dp.validate();
  DpAdaPedResult out;
  out.run = run_engine(train, config, &dp, seed, test, finetune, &out.max_update_norm,
                       &out.max_scalar_step);
  const std::int64_t m = static_cast<std::int64_t>(train.size());
  const std::int64_t K = config.clients_per_round == 0 ? m : config.clients_per_round;
  if (dp.clip.mode == ClipSpec::Mode::joint) {
    // one concatenated mechanism: both accountant slots carry its radius and
    // noise scale
    ClipSpec folded = dp.clip;
    folded.c2 = folded.c1;
    out.privacy = adaped_rdp(static_cast<int>(K), static_cast<int>(m),
                             static_cast<int>(config.rounds), static_cast<int>(config.tau), folded,
                             dp.sigma_q1, dp.sigma_q1);
  } else {
    out.privacy = adaped_rdp(static_cast<int>(K), static_cast<int>(m),
                             static_cast<int>(config.rounds), static_cast<int>(config.tau),
                             dp.clip, dp.sigma_q1, dp.sigma_q2);
  }
  return out;
}

namespace {

double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace

double KdPopulationDensity::log_density(const std::vector<double>& q) const {
  if (q.size() != p_one.size()) throw input_error("kd density: table width mismatch");
  double total = log_norm;
  for (std::size_t x = 0; x < p_one.size(); ++x) {
    const double qx = q[x];
    if (!(qx >= 0.0) || !(qx <= 1.0)) throw input_error("kd density: q entries must be in [0,1]");
    const double p = p_one[x];
    double kl = 0.0;
    if (p > 0.0) kl += p * (std::log(p) - std::log(qx));
    if (p < 1.0) kl += (1.0 - p) * (std::log(1.0 - p) - std::log(1.0 - qx));
    total -= psi * p_x[x] * kl;
  }
  return total;
}

double KdPopulationDensity::density(const std::vector<double>& q) const {
  return std::exp(log_density(q));
}

KdPopulationDensity kd_population_density(const std::vector<double>& class_probs,
                                          std::int64_t classes, double psi,
                                          const std::vector<double>& p_x) {
  if (classes != 2)
    throw unsupported_error("kd density: closed form exists only for two classes");
  if (p_x.empty()) throw input_error("kd density: empty input alphabet");
  if (class_probs.size() != p_x.size() * 2)
    throw input_error("kd density: class table must be |X| x 2");
  if (!(psi >= 0.0) || !std::isfinite(psi))
    throw param_error("kd density: psi must be finite and >= 0");

  double px_total = 0.0;
  for (const double p : p_x) {
    if (!(p > 0.0)) throw input_error("kd density: input probabilities must be positive");
    px_total += p;
  }
  if (std::abs(px_total - 1.0) > 1e-9)
    throw input_error("kd density: input probabilities must sum to one");

  KdPopulationDensity out;
  out.psi = psi;
  out.p_x = p_x;
  out.p_one.resize(p_x.size());
  double log_c = 0.0;
  for (std::size_t x = 0; x < p_x.size(); ++x) {
    const double p0 = class_probs[2 * x];
    const double p1 = class_probs[2 * x + 1];
    if (!(p0 >= 0.0) || !(p1 >= 0.0) || std::abs(p0 + p1 - 1.0) > 1e-9)
      throw input_error("kd density: each class row must be a probability vector");
    out.p_one[x] = p1;
    const double w = psi * p_x[x];
    log_c -= w * binary_entropy(p1);
    log_c -= log_beta(1.0 + w * p1, 1.0 + w * (1.0 - p1));
  }
  out.log_norm = log_c;
  return out;
}

}  // namespace fedbayes
