#include "fedbayes/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace fedbayes::kern {

namespace {

double s_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double s_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double s_sum_sq(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double s_dist_sq(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scal(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_combine(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

const Ops kScalar = {s_dot, s_sum, s_sum_sq, s_dist_sq, s_axpy, s_scal, s_combine, "scalar"};

const Ops* resolve() {
  const char* pref = std::getenv("FEDBAYES_KERNELS");
#if defined(FEDBAYES_HAVE_AVX2)
  if (pref && std::strcmp(pref, "scalar") == 0) return &kScalar;
  if (cpu_has_avx2()) return &avx2_ops();
  return &kScalar;
#else
  (void)pref;
  return &kScalar;
#endif
}

}  // namespace

const Ops& scalar_ops() { return kScalar; }

const Ops& ops() {
  static const Ops* chosen = resolve();
  return *chosen;
}

}  // namespace fedbayes::kern
