#include "fedbayes/mixture_est.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"

namespace fedbayes {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Index of the nearest center; ties go to the lowest index.
std::int64_t nearest_center(const double* point, const std::vector<double>& centers, std::int64_t k,
                            std::int64_t d, double* dist_out) {
  std::int64_t best = 0;
  double best_dist = kInf;
  for (std::int64_t l = 0; l < k; ++l) {
    const double dist = kern::dist_sq(point, centers.data() + l * d, static_cast<std::size_t>(d));
    if (dist < best_dist) {
      best_dist = dist;
      best = l;
    }
  }
  if (dist_out != nullptr) *dist_out = best_dist;
  return best;
}

// Distance-weighted seeding. When every remaining point coincides with an
// existing center the leftover seats are filled uniformly at random.
std::vector<double> seed_centers(const std::vector<double>& points, std::int64_t count, std::int64_t d,
                                 std::int64_t k, Rng& rng) {
  std::vector<double> centers(static_cast<std::size_t>(k * d));
  const std::int64_t first = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(count)));
  std::copy_n(points.data() + first * d, d, centers.data());

  std::vector<double> dist(static_cast<std::size_t>(count), kInf);
  for (std::int64_t l = 1; l < k; ++l) {
    double total = 0.0;
    for (std::int64_t i = 0; i < count; ++i) {
      const double to_new =
          kern::dist_sq(points.data() + i * d, centers.data() + (l - 1) * d, static_cast<std::size_t>(d));
      dist[static_cast<std::size_t>(i)] = std::min(dist[static_cast<std::size_t>(i)], to_new);
      total += dist[static_cast<std::size_t>(i)];
    }
    std::int64_t pick;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      pick = count - 1;
      for (std::int64_t i = 0; i < count; ++i) {
        target -= dist[static_cast<std::size_t>(i)];
        if (target <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(count)));
    }
    std::copy_n(points.data() + pick * d, d, centers.data() + l * d);
  }
  return centers;
}

}  // namespace

namespace {

// Shape checks that tolerate probabilities which do not sum to exactly 1;
// both consumers renormalize, and server-side cluster fractions carry
// rounding drift at large m.
void require_mixture_shape(const DiscretePrior& prior, const char* who) {
  if (prior.k < 1 || prior.d < 1) throw param_error(std::string(who) + ": empty prior");
  if (static_cast<std::int64_t>(prior.probs.size()) != prior.k)
    throw param_error(std::string(who) + ": probs length != k");
  if (static_cast<std::int64_t>(prior.centers.size()) != prior.k * prior.d)
    throw param_error(std::string(who) + ": centers length != k*d");
  bool any_mass = false;
  for (double p : prior.probs) {
    if (!(p >= 0.0)) throw param_error(std::string(who) + ": negative probability");
    if (p > 0.0) any_mass = true;
  }
  if (!any_mass) throw param_error(std::string(who) + ": prior has no mass");
}

}  // namespace

PosteriorWeights posterior_weights(const ClientDataset& client, const DiscretePrior& prior,
                                   double sigma_x_sq) {
  require_mixture_shape(prior, "posterior_weights");
  client.validate();
  if (!(sigma_x_sq > 0.0)) throw param_error("posterior_weights: sigma_x_sq must be positive");
  if (client.d != prior.d) throw input_error("posterior_weights: client and prior dimensions differ");

  // sum_j ||X_ij - mu_l||^2 = sum_j ||X_ij - Xbar||^2 + n ||Xbar - mu_l||^2;
  // the first term is component-independent and cancels on normalization.
  std::vector<double> mean(static_cast<std::size_t>(client.d));
  client.mean(mean.data());
  const double scale = static_cast<double>(client.n) / (2.0 * sigma_x_sq);

  std::vector<double> log_w(static_cast<std::size_t>(prior.k), -kInf);
  double max_log = -kInf;
  for (std::int64_t l = 0; l < prior.k; ++l) {
    const double p = prior.probs[static_cast<std::size_t>(l)];
    if (p <= 0.0) continue;
    const double dist =
        kern::dist_sq(mean.data(), prior.centers.data() + l * prior.d, static_cast<std::size_t>(prior.d));
    log_w[static_cast<std::size_t>(l)] = std::log(p) - scale * dist;
    max_log = std::max(max_log, log_w[static_cast<std::size_t>(l)]);
  }

  PosteriorWeights weights(static_cast<std::size_t>(prior.k), 0.0);
  double total = 0.0;
  for (std::int64_t l = 0; l < prior.k; ++l) {
    const double lw = log_w[static_cast<std::size_t>(l)];
    if (lw == -kInf) continue;
    weights[static_cast<std::size_t>(l)] = std::exp(lw - max_log);
    total += weights[static_cast<std::size_t>(l)];
  }
  kern::scal(1.0 / total, weights.data(), weights.size());
  return weights;
}

std::vector<double> posterior_mean_mixture(const PosteriorWeights& weights, const DiscretePrior& prior) {
  require_mixture_shape(prior, "posterior_mean_mixture");
  if (static_cast<std::int64_t>(weights.size()) != prior.k)
    throw input_error("posterior_mean_mixture: weight count does not match prior components");
  std::vector<double> out(static_cast<std::size_t>(prior.d), 0.0);
  for (std::int64_t l = 0; l < prior.k; ++l)
    kern::axpy(weights[static_cast<std::size_t>(l)], prior.centers.data() + l * prior.d, out.data(),
               static_cast<std::size_t>(prior.d));
  return out;
}

ClusterModel lloyd_cluster(const std::vector<double>& points, std::int64_t count, std::int64_t d,
                           std::int64_t k, Rng& rng, int max_iters) {
  if (count < 1 || d < 1) throw input_error("lloyd_cluster: empty point set");
  if (static_cast<std::int64_t>(points.size()) != count * d)
    throw input_error("lloyd_cluster: points buffer does not match count*d");
  if (k < 1 || k > count) throw param_error("lloyd_cluster: k must be in [1, #points]");
  if (max_iters < 1) throw param_error("lloyd_cluster: max_iters must be positive");

  ClusterModel model;
  model.k = k;
  model.d = d;
  model.centers = seed_centers(points, count, d, k, rng);
  model.assignment.assign(static_cast<std::size_t>(count), -1);

  std::vector<std::int64_t> sizes(static_cast<std::size_t>(k));
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    std::fill(sizes.begin(), sizes.end(), std::int64_t{0});
    for (std::int64_t i = 0; i < count; ++i) {
      const std::int64_t a = nearest_center(points.data() + i * d, model.centers, k, d, nullptr);
      if (model.assignment[static_cast<std::size_t>(i)] != static_cast<int>(a)) changed = true;
      model.assignment[static_cast<std::size_t>(i)] = static_cast<int>(a);
      ++sizes[static_cast<std::size_t>(a)];
    }

    // Re-anchor empty clusters at the point farthest from its current center.
    for (std::int64_t l = 0; l < k; ++l) {
      if (sizes[static_cast<std::size_t>(l)] != 0) continue;
      double worst = -1.0;
      std::int64_t far_point = -1;
      for (std::int64_t i = 0; i < count; ++i) {
        const double dist = kern::dist_sq(points.data() + i * d,
                                          model.centers.data() + model.assignment[static_cast<std::size_t>(i)] * d,
                                          static_cast<std::size_t>(d));
        if (dist > worst && sizes[static_cast<std::size_t>(model.assignment[static_cast<std::size_t>(i)])] > 1) {
          worst = dist;
          far_point = i;
        }
      }
      if (far_point < 0) continue;
      std::copy_n(points.data() + far_point * d, d, model.centers.data() + l * d);
      --sizes[static_cast<std::size_t>(model.assignment[static_cast<std::size_t>(far_point)])];
      model.assignment[static_cast<std::size_t>(far_point)] = static_cast<int>(l);
      ++sizes[static_cast<std::size_t>(l)];
      changed = true;
    }

    std::fill(model.centers.begin(), model.centers.end(), 0.0);
    for (std::int64_t i = 0; i < count; ++i)
      kern::axpy(1.0, points.data() + i * d,
                 model.centers.data() + model.assignment[static_cast<std::size_t>(i)] * d,
                 static_cast<std::size_t>(d));
    for (std::int64_t l = 0; l < k; ++l)
      if (sizes[static_cast<std::size_t>(l)] > 0)
        kern::scal(1.0 / static_cast<double>(sizes[static_cast<std::size_t>(l)]),
                   model.centers.data() + l * d, static_cast<std::size_t>(d));

    double inertia = 0.0;
    for (std::int64_t i = 0; i < count; ++i)
      inertia += kern::dist_sq(points.data() + i * d,
                               model.centers.data() + model.assignment[static_cast<std::size_t>(i)] * d,
                               static_cast<std::size_t>(d));
    model.inertia = inertia;
    model.inertia_path.push_back(inertia);
    if (!changed) break;
  }

  model.probs.assign(static_cast<std::size_t>(k), 0.0);
  for (std::int64_t l = 0; l < k; ++l)
    model.probs[static_cast<std::size_t>(l)] =
        static_cast<double>(sizes[static_cast<std::size_t>(l)]) / static_cast<double>(count);
  return model;
}

AltMinResult alt_min_estimation(const SyntheticDataset& data, std::int64_t k, std::int64_t T,
                                double sigma_x_sq, std::uint64_t seed, const UploadChannel* upload) {
  if (data.m < 1) throw input_error("alt_min_estimation: empty dataset");
  if (data.m < k) throw param_error("alt_min_estimation: fewer clients than components");
  if (T < 1) throw param_error("alt_min_estimation: needs at least one round");
  if (!(sigma_x_sq > 0.0)) throw param_error("alt_min_estimation: sigma_x_sq must be positive");
  if (upload != nullptr) {
    upload->mechanism.validate();
    if (upload->mechanism.kind == MechanismKind::binary_response)
      throw unsupported_error("alt_min_estimation: binary response is a [0,1]-rate channel");
    if (upload->clip_radius < 0.0) throw param_error("alt_min_estimation: negative clip radius");
  }

  const std::int64_t m = data.m;
  const std::int64_t d = data.d;

  AltMinResult result;
  result.m = m;
  result.d = d;
  result.estimates.resize(static_cast<std::size_t>(m * d));
  for (std::int64_t i = 0; i < m; ++i)
    data.clients[static_cast<std::size_t>(i)].mean(result.estimates.data() + i * d);

  std::vector<double> uploaded(static_cast<std::size_t>(m * d));
  std::vector<double> buffer(static_cast<std::size_t>(d));
  for (std::int64_t t = 1; t <= T; ++t) {
    if (upload == nullptr) {
      uploaded = result.estimates;
    } else {
      for (std::int64_t i = 0; i < m; ++i) {
        std::copy_n(result.estimates.data() + i * d, d, buffer.data());
        if (upload->clip_radius > 0.0) clip_in_place(buffer.data(), buffer.size(), upload->clip_radius);
        if (upload->mechanism.kind == MechanismKind::quantizer) {
          const double bound = upload->mechanism.range_half_width;
          for (double& v : buffer) v = std::clamp(v, -bound, bound);
        }
        Rng rng = substream(seed, i, t, StreamTag::mechanism);
        const std::vector<double> sent = upload->mechanism.apply(buffer, rng);
        std::copy_n(sent.data(), d, uploaded.data() + i * d);
      }
    }

    Rng cluster_rng = substream(seed, 0, t, StreamTag::cluster_seed);
    ClusterModel model = lloyd_cluster(uploaded, m, d, k, cluster_rng);

    DiscretePrior broadcast;
    broadcast.k = k;
    broadcast.d = d;
    broadcast.probs = model.probs;
    broadcast.centers = model.centers;
    for (std::int64_t i = 0; i < m; ++i) {
      const PosteriorWeights w =
          posterior_weights(data.clients[static_cast<std::size_t>(i)], broadcast, sigma_x_sq);
      const std::vector<double> theta = posterior_mean_mixture(w, broadcast);
      std::copy_n(theta.data(), d, result.estimates.data() + i * d);
    }
    result.rounds.push_back(std::move(model));
  }

  if (static_cast<std::int64_t>(data.true_params.size()) == m * d) {
    std::vector<double> sq(static_cast<std::size_t>(m));
    double local_sum = 0.0;
    for (std::int64_t i = 0; i < m; ++i) {
      sq[static_cast<std::size_t>(i)] =
          kern::dist_sq(result.estimates.data() + i * d, data.true_param(i), static_cast<std::size_t>(d));
      data.clients[static_cast<std::size_t>(i)].mean(buffer.data());
      local_sum += kern::dist_sq(buffer.data(), data.true_param(i), static_cast<std::size_t>(d));
    }
    double mean = 0.0;
    for (double v : sq) mean += v;
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (double v : sq) var += (v - mean) * (v - mean);
    var /= static_cast<double>(m > 1 ? m - 1 : 1);
    result.empirical_mse = mean;
    result.empirical_mse_stderr = std::sqrt(var / static_cast<double>(m));
    result.local_mse = local_sum / static_cast<double>(m);
    result.gain_pct = 100.0 * (1.0 - result.empirical_mse / result.local_mse);
  }
  return result;
}

double concentration_radius(std::int64_t d, double sigma_x_sq, std::int64_t n, std::int64_t m, double r) {
  if (d < 1 || n < 1 || m < 1) throw param_error("concentration_radius: d, n, m must be positive");
  if (sigma_x_sq < 0.0) throw param_error("concentration_radius: negative variance");
  if (r < 0.0) throw param_error("concentration_radius: negative prior radius");
  const double per_sample = sigma_x_sq / static_cast<double>(n);
  const double log_term = std::log(static_cast<double>(m) * static_cast<double>(m) * static_cast<double>(n));
  return 4.0 * std::sqrt(static_cast<double>(d) * per_sample) + 2.0 * std::sqrt(log_term * per_sample) + r;
}

CenterMatching match_centers(const std::vector<double>& a, const std::vector<double>& b,
                             std::int64_t k, std::int64_t d) {
  if (k < 1 || d < 1) throw param_error("match_centers: k and d must be positive");
  if (static_cast<std::int64_t>(a.size()) != k * d || static_cast<std::int64_t>(b.size()) != k * d)
    throw input_error("match_centers: buffers do not match k*d");

  // Hungarian algorithm with row/column potentials, O(k^3); 1-based arrays.
  std::vector<double> cost(static_cast<std::size_t>(k * k));
  for (std::int64_t i = 0; i < k; ++i)
    for (std::int64_t j = 0; j < k; ++j)
      cost[static_cast<std::size_t>(i * k + j)] =
          std::sqrt(kern::dist_sq(a.data() + i * d, b.data() + j * d, static_cast<std::size_t>(d)));

  const std::int64_t n = k;
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<std::int64_t> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (std::int64_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::int64_t j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const std::int64_t i0 = match[static_cast<std::size_t>(j0)];
      double delta = kInf;
      std::int64_t j1 = 0;
      for (std::int64_t j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>((i0 - 1) * n + (j - 1))] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (std::int64_t j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const std::int64_t j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  CenterMatching out;
  out.assignment.assign(static_cast<std::size_t>(k), -1);
  for (std::int64_t j = 1; j <= n; ++j)
    out.assignment[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] =
        static_cast<int>(j - 1);
  for (std::int64_t i = 0; i < k; ++i)
    out.total_cost +=
        cost[static_cast<std::size_t>(i * k + out.assignment[static_cast<std::size_t>(i)])];
  return out;
}

}  // namespace fedbayes
