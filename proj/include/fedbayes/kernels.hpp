#pragma once

#include <cstddef>

namespace fedbayes::kern {

// Data-parallel primitives behind every estimator inner loop. Two
// implementations share this table: a portable scalar reference and an AVX2
// variant selected once at startup on capable hosts. Reductions in the AVX2
// variant accumulate in lane order, so cross-variant results agree only to
// rounding; within one process the selection is fixed and results are
// bit-stable.
struct Ops {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);
  double (*dist_sq)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);   // y += alpha*x
  void (*scal)(double alpha, double* x, std::size_t n);                    // x *= alpha
  void (*combine)(double a, const double* x, double b, const double* y,
                  double* out, std::size_t n);                             // out = a*x + b*y
  const char* name;
};

const Ops& scalar_ops();
#if defined(FEDBAYES_HAVE_AVX2)
const Ops& avx2_ops();
bool cpu_has_avx2();
#endif

// Dispatched table. Resolved once; FEDBAYES_KERNELS=scalar|avx2|auto overrides
// the automatic pick (requesting avx2 on an incapable host falls back to
// scalar).
const Ops& ops();

inline double dot(const double* a, const double* b, std::size_t n) { return ops().dot(a, b, n); }
inline double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
inline double sum_sq(const double* x, std::size_t n) { return ops().sum_sq(x, n); }
inline double dist_sq(const double* a, const double* b, std::size_t n) { return ops().dist_sq(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { ops().axpy(alpha, x, y, n); }
inline void scal(double alpha, double* x, std::size_t n) { ops().scal(alpha, x, n); }
inline void combine(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  ops().combine(a, x, b, y, out, n);
}

}  // namespace fedbayes::kern
