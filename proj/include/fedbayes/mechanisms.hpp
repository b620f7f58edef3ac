#pragma once

#include <cstdint>
#include <vector>

#include "fedbayes/rng.hpp"

namespace fedbayes {

// One-shot channels a client may push its statistic through before upload:
// identity (no constraint), an unbiased k-bit quantizer over [-a, a], the
// Gaussian mechanism calibrated for user-level (eps0, delta)-LDP, or the
// two-point randomized response for values in [0, 1].
enum class MechanismKind { identity, quantizer, gaussian_ldp, binary_response };

struct MechanismSpec {
  MechanismKind kind = MechanismKind::identity;
  int bits = 1;                  // quantizer resolution k
  double range_half_width = 1.0; // a: inputs live in [-a, a]
  double epsilon0 = 1.0;
  double delta = 1e-5;

  void validate() const;

  // Standard deviation of the channel noise q(x) - x, as seen by the
  // estimators that must widen their shrinkage weights accordingly.
  double sigma_q() const;

  // True when epsilon0 exceeds the range the LDP noise calibration is stated
  // for; the mechanism still runs but reports should carry the flag.
  bool epsilon_out_of_range() const;

  double apply(double x, Rng& rng) const;
  std::vector<double> apply(const std::vector<double>& x, Rng& rng) const;
};

// v scaled down to norm c when it is longer, untouched otherwise.
std::vector<double> clip(const std::vector<double>& v, double c);
void clip_in_place(double* v, std::size_t len, double c);

// Unbiased dithered quantizer onto the 2^k-point grid spanning [-a, a].
double stochastic_quantizer(double x, int k, double a, Rng& rng);

double gaussian_mechanism(double x, double sigma_q, Rng& rng);
std::vector<double> gaussian_mechanism(const std::vector<double>& x, double sigma_q, Rng& rng);

// Two-point unbiased response for x in [0, 1] with likelihood ratio e^eps0.
double binary_response(double x, double epsilon0, Rng& rng);

struct GaussianLdpSigma {
  double sigma_q = 0.0;
  bool epsilon_out_of_range = false;
};

// Noise scale (b / eps0) * sqrt(8 log(2 / delta)) for inputs bounded by b.
GaussianLdpSigma gaussian_ldp_sigma(double epsilon0, double delta, double b);

}  // namespace fedbayes
