#pragma once

#include <vector>

namespace fedbayes {

// Privacy loss as a function of the Renyi order alpha > 1. Linear curves
// (coef * alpha) cover the Gaussian-style bounds used here; "unbounded" marks
// a mechanism with no finite guarantee (zero noise), kept as an explicit
// state so reports never carry a float infinity.
struct RdpCurve {
  bool unbounded = false;
  double coef = 0.0;

  double at(double alpha) const;
};

struct DpBudget {
  double epsilon = 0.0;
  double delta = 0.0;
};

struct ClipSpec {
  double c1 = 1.0;
  double c2 = 1.0;
  enum class Mode { separate, joint } mode = Mode::separate;

  void validate() const;
};

struct AdapedRdpResult {
  RdpCurve curve;
  // Set when tau does not divide T, in which case the round count is rounded
  // up to the next whole synchronization.
  bool ragged_rounds = false;
};

// Per-curve privacy loss of the noised distillation trainer: one point
// evaluated at alpha, from (K/m)^2 * 6 * (T/tau) * alpha * (C1^2/(K s1^2) +
// C2^2/(K s2^2)).
double adaped_rdp_point(double alpha, int K, int m, int T, int tau, const ClipSpec& clip,
                        double sigma_q1, double sigma_q2);

// The same loss as a reusable curve (the alpha factor is linear).
AdapedRdpResult adaped_rdp(int K, int m, int T, int tau, const ClipSpec& clip, double sigma_q1,
                           double sigma_q2);

// Adaptive composition: losses add pointwise.
RdpCurve rdp_compose(const std::vector<RdpCurve>& curves);

// Tightest (epsilon, delta) implied by the curve for a target delta.
DpBudget rdp_to_dp_fixed_delta(const RdpCurve& curve, double delta);
// Smallest delta for a target epsilon.
DpBudget rdp_to_dp_fixed_epsilon(const RdpCurve& curve, double epsilon);

// The order at which the fixed-delta conversion attains its minimum, exposed
// for reporting.
double rdp_to_dp_argmin_alpha(const RdpCurve& curve, double delta);

}  // namespace fedbayes
