#include "fedbayes/accountant.hpp"

#include <cmath>
#include <limits>

#include "fedbayes/errors.hpp"

namespace fedbayes {

namespace {

constexpr double kAlphaLo = 1.0 + 1e-3;
constexpr double kAlphaHi = 4096.0;
constexpr int kGridPoints = 2000;

double conversion_objective(const RdpCurve& curve, double delta, double alpha) {
  return curve.at(alpha) +
         (std::log(1.0 / delta) + (alpha - 1.0) * std::log1p(-1.0 / alpha) - std::log(alpha)) /
             (alpha - 1.0);
}

double log_delta_objective(const RdpCurve& curve, double epsilon, double alpha) {
  return (alpha - 1.0) * (curve.at(alpha) - epsilon) - std::log(alpha - 1.0) +
         alpha * std::log1p(-1.0 / alpha);
}

// Minimize f over [lo, hi] in log-alpha space: coarse grid, then
// golden-section refinement around the best cell.
template <typename F>
double minimize_over_alpha(F f, double* arg_out) {
  const double llo = std::log(kAlphaLo);
  const double lhi = std::log(kAlphaHi);
  double best = std::numeric_limits<double>::infinity();
  int best_i = 0;
  for (int i = 0; i < kGridPoints; ++i) {
    const double a = std::exp(llo + (lhi - llo) * i / (kGridPoints - 1));
    const double v = f(a);
    if (v < best) {
      best = v;
      best_i = i;
    }
  }
  const double step = (lhi - llo) / (kGridPoints - 1);
  double la = llo + step * (best_i > 0 ? best_i - 1 : 0);
  double lb = llo + step * (best_i < kGridPoints - 1 ? best_i + 1 : kGridPoints - 1);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = lb - gr * (lb - la);
  double x2 = la + gr * (lb - la);
  double f1 = f(std::exp(x1));
  double f2 = f(std::exp(x2));
  for (int it = 0; it < 200 && lb - la > 1e-14; ++it) {
    if (f1 <= f2) {
      lb = x2;
      x2 = x1;
      f2 = f1;
      x1 = lb - gr * (lb - la);
      f1 = f(std::exp(x1));
    } else {
      la = x1;
      x1 = x2;
      f1 = f2;
      x2 = la + gr * (lb - la);
      f2 = f(std::exp(x2));
    }
  }
  const double alpha = std::exp((la + lb) / 2.0);
  if (arg_out) *arg_out = alpha;
  const double refined = f(alpha);
  return refined < best ? refined : best;
}

}  // namespace

double RdpCurve::at(double alpha) const {
  if (alpha <= 1.0) throw order_error("rdp curve: order must be > 1");
  if (unbounded) return std::numeric_limits<double>::infinity();
  return coef * alpha;
}

void ClipSpec::validate() const {
  if (!(c1 > 0.0)) throw param_error("clip spec: c1 must be > 0");
  if (!(c2 > 0.0)) throw param_error("clip spec: c2 must be > 0");
}

double adaped_rdp_point(double alpha, int K, int m, int T, int tau, const ClipSpec& clip,
                        double sigma_q1, double sigma_q2) {
  if (alpha <= 1.0) throw order_error("accountant: order must be > 1");
  const AdapedRdpResult r = adaped_rdp(K, m, T, tau, clip, sigma_q1, sigma_q2);
  return r.curve.at(alpha);
}

AdapedRdpResult adaped_rdp(int K, int m, int T, int tau, const ClipSpec& clip, double sigma_q1,
                           double sigma_q2) {
  clip.validate();
  if (m < 1 || K < 1 || K > m) throw param_error("accountant: need 1 <= K <= m");
  if (T < 1 || tau < 1) throw param_error("accountant: need T >= 1 and tau >= 1");
  if (sigma_q1 < 0.0 || sigma_q2 < 0.0) throw param_error("accountant: noise scales must be >= 0");

  AdapedRdpResult out;
  out.ragged_rounds = (T % tau) != 0;
  if (sigma_q1 == 0.0 || sigma_q2 == 0.0) {
    out.curve.unbounded = true;
    return out;
  }
  const double rounds = static_cast<double>((T + tau - 1) / tau);
  const double ratio = static_cast<double>(K) / static_cast<double>(m);
  const double per_round = clip.c1 * clip.c1 / (K * sigma_q1 * sigma_q1) +
                           clip.c2 * clip.c2 / (K * sigma_q2 * sigma_q2);
  out.curve.coef = ratio * ratio * 6.0 * rounds * per_round;
  return out;
}

RdpCurve rdp_compose(const std::vector<RdpCurve>& curves) {
  if (curves.empty()) throw param_error("rdp_compose: empty curve list");
  RdpCurve out;
  for (const RdpCurve& c : curves) {
    out.unbounded = out.unbounded || c.unbounded;
    out.coef += c.coef;
  }
  return out;
}

DpBudget rdp_to_dp_fixed_delta(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw param_error("rdp_to_dp: delta must be in (0,1)");
  if (curve.unbounded) throw no_budget_error("rdp_to_dp: curve has no finite guarantee");
  DpBudget out;
  out.delta = delta;
  out.epsilon =
      minimize_over_alpha([&](double a) { return conversion_objective(curve, delta, a); }, nullptr);
  return out;
}

DpBudget rdp_to_dp_fixed_epsilon(const RdpCurve& curve, double epsilon) {
  if (!(epsilon > 0.0)) throw param_error("rdp_to_dp: epsilon must be > 0");
  if (curve.unbounded) throw no_budget_error("rdp_to_dp: curve has no finite guarantee");
  DpBudget out;
  out.epsilon = epsilon;
  const double log_delta = minimize_over_alpha(
      [&](double a) { return log_delta_objective(curve, epsilon, a); }, nullptr);
  out.delta = std::exp(log_delta);
  if (out.delta > 1.0) out.delta = 1.0;
  return out;
}

double rdp_to_dp_argmin_alpha(const RdpCurve& curve, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw param_error("rdp_to_dp: delta must be in (0,1)");
  if (curve.unbounded) throw no_budget_error("rdp_to_dp: curve has no finite guarantee");
  double alpha = 0.0;
  minimize_over_alpha([&](double a) { return conversion_objective(curve, delta, a); }, &alpha);
  return alpha;
}

}  // namespace fedbayes
