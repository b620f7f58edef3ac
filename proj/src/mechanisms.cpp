#include "fedbayes/mechanisms.hpp"

#include <cmath>
#include <cstddef>

#include "fedbayes/errors.hpp"
#include "fedbayes/kernels.hpp"

namespace fedbayes {

void MechanismSpec::validate() const {
  switch (kind) {
    case MechanismKind::identity:
      return;
    case MechanismKind::quantizer:
      if (bits < 1) throw param_error("quantizer: bits must be >= 1");
      if (!(range_half_width > 0.0)) throw param_error("quantizer: range must be > 0");
      return;
    case MechanismKind::gaussian_ldp:
      if (!(epsilon0 > 0.0)) throw param_error("gaussian_ldp: epsilon0 must be > 0");
      if (!(delta > 0.0 && delta < 1.0)) throw param_error("gaussian_ldp: delta must be in (0,1)");
      if (!(range_half_width > 0.0)) throw param_error("gaussian_ldp: range must be > 0");
      return;
    case MechanismKind::binary_response:
      if (!(epsilon0 > 0.0)) throw param_error("binary_response: epsilon0 must be > 0");
      return;
  }
  throw param_error("mechanism: unknown kind");
}

double MechanismSpec::sigma_q() const {
  switch (kind) {
    case MechanismKind::identity:
      return 0.0;
    case MechanismKind::quantizer:
      return range_half_width / (std::pow(2.0, bits) - 1.0);
    case MechanismKind::gaussian_ldp:
      return gaussian_ldp_sigma(epsilon0, delta, range_half_width).sigma_q;
    case MechanismKind::binary_response: {
      // Worst-case output deviation; the estimators that consume this use the
      // exact per-input variance instead, so this is only a reporting value.
      const double e = std::exp(epsilon0);
      return (e + 1.0) / (2.0 * (e - 1.0));
    }
  }
  throw param_error("mechanism: unknown kind");
}

bool MechanismSpec::epsilon_out_of_range() const {
  return kind == MechanismKind::gaussian_ldp && epsilon0 >= 1.0;
}

double MechanismSpec::apply(double x, Rng& rng) const {
  switch (kind) {
    case MechanismKind::identity:
      return x;
    case MechanismKind::quantizer:
      return stochastic_quantizer(x, bits, range_half_width, rng);
    case MechanismKind::gaussian_ldp:
      return gaussian_mechanism(x, sigma_q(), rng);
    case MechanismKind::binary_response:
      return binary_response(x, epsilon0, rng);
  }
  throw param_error("mechanism: unknown kind");
}

std::vector<double> MechanismSpec::apply(const std::vector<double>& x, Rng& rng) const {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply(x[i], rng);
  return out;
}

std::vector<double> clip(const std::vector<double>& v, double c) {
  std::vector<double> out = v;
  clip_in_place(out.data(), out.size(), c);
  return out;
}

void clip_in_place(double* v, std::size_t len, double c) {
  if (!(c > 0.0)) throw param_error("clip: threshold must be > 0");
  const double norm = std::sqrt(kern::sum_sq(v, len));
  if (norm > c) kern::scal(c / norm, v, len);
}

double stochastic_quantizer(double x, int k, double a, Rng& rng) {
  if (k < 1) throw param_error("quantizer: bits must be >= 1");
  if (!(a > 0.0)) throw param_error("quantizer: range must be > 0");
  if (x < -a || x > a) throw range_error("quantizer: input outside [-a, a]");
  const double levels = std::pow(2.0, k) - 1.0;
  const double step = 2.0 * a / levels;
  const double pos = (x + a) / step;          // fractional grid index in [0, levels]
  double lo = std::floor(pos);
  if (lo >= levels) lo = levels - 1.0;        // x == a lands on the top cell
  const double frac = pos - lo;               // P(round up), making the output unbiased
  const double j = rng.uniform() < frac ? lo + 1.0 : lo;
  return -a + j * step;
}

double gaussian_mechanism(double x, double sigma_q, Rng& rng) {
  if (sigma_q < 0.0) throw param_error("gaussian mechanism: sigma_q must be >= 0");
  if (sigma_q == 0.0) return x;
  return x + rng.gaussian(0.0, sigma_q);
}

std::vector<double> gaussian_mechanism(const std::vector<double>& x, double sigma_q, Rng& rng) {
  if (sigma_q < 0.0) throw param_error("gaussian mechanism: sigma_q must be >= 0");
  std::vector<double> out = x;
  if (sigma_q == 0.0) return out;
  for (double& v : out) v += rng.gaussian(0.0, sigma_q);
  return out;
}

double binary_response(double x, double epsilon0, Rng& rng) {
  if (!(epsilon0 > 0.0)) throw param_error("binary_response: epsilon0 must be > 0");
  if (x < 0.0 || x > 1.0) throw range_error("binary_response: input outside [0, 1]");
  const double e = std::exp(epsilon0);
  const double p_high = 1.0 / (e + 1.0) + x * (e - 1.0) / (e + 1.0);
  return rng.uniform() < p_high ? e / (e - 1.0) : -1.0 / (e - 1.0);
}

GaussianLdpSigma gaussian_ldp_sigma(double epsilon0, double delta, double b) {
  if (!(epsilon0 > 0.0)) throw param_error("gaussian_ldp_sigma: epsilon0 must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw param_error("gaussian_ldp_sigma: delta must be in (0,1)");
  if (!(b > 0.0)) throw param_error("gaussian_ldp_sigma: bound must be > 0");
  GaussianLdpSigma out;
  out.sigma_q = (b / epsilon0) * std::sqrt(8.0 * std::log(2.0 / delta));
  out.epsilon_out_of_range = epsilon0 >= 1.0;
  return out;
}

}  // namespace fedbayes
