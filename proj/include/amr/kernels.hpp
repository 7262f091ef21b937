#pragma once

#include <cstddef>
#include <string>

// Inner-loop kernels for the float32 tensor path. Every kernel has a scalar
// reference implementation and, on x86 machines with AVX2+FMA, a vectorized
// variant selected once at startup. Reductions accumulate in float64.
//
// Elementwise kernels and axpy_acc are bit-identical between backends (both
// use fused multiply-add per element, no reassociation). dot/sum reassociate
// across lanes in the AVX2 variant and agree with the scalar reference to
// float64 rounding noise; the equivalence suite pins both contracts.

namespace amr::kernels {

struct Kernels {
  void (*add)(const float* a, const float* b, float* out, std::size_t n);
  void (*sub)(const float* a, const float* b, float* out, std::size_t n);
  void (*mul)(const float* a, const float* b, float* out, std::size_t n);
  void (*relu)(const float* a, float* out, std::size_t n);
  void (*absv)(const float* a, float* out, std::size_t n);
  // out[i] = a[i] * s
  void (*scale)(const float* a, float s, float* out, std::size_t n);
  // acc[i] += (double)w * (double)x[i]
  void (*axpy_acc)(double* acc, const float* x, float w, std::size_t n);
  double (*dot)(const float* a, const float* b, std::size_t n);
  double (*sum)(const float* a, std::size_t n);
  const char* name;
};

const Kernels& scalar();
#if defined(__x86_64__) || defined(_M_X64)
const Kernels& avx2();
bool avx2_available();
#endif

// Backend picked at startup: AVX2 when the CPU supports it, unless
// AMR_FORCE_SCALAR is set in the environment.
const Kernels& active();

}  // namespace amr::kernels
