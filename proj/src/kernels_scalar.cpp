#include "amr/kernels.hpp"

#include <cmath>

namespace amr::kernels {
namespace {

void add_s(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
void sub_s(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}
void mul_s(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
void relu_s(const float* a, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0f ? a[i] : 0.0f;
}
void abs_s(const float* a, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fabs(a[i]);
}
void scale_s(const float* a, float s, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}
void axpy_acc_s(double* acc, const float* x, float w, std::size_t n) {
  const double wd = static_cast<double>(w);
  for (std::size_t i = 0; i < n; ++i)
    acc[i] = std::fma(wd, static_cast<double>(x[i]), acc[i]);
}
double dot_s(const float* a, const float* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc = std::fma(static_cast<double>(a[i]), static_cast<double>(b[i]), acc);
  return acc;
}
double sum_s(const float* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]);
  return acc;
}

const Kernels kScalar = {add_s, sub_s,      mul_s, relu_s, abs_s,
                         scale_s, axpy_acc_s, dot_s, sum_s,  "scalar"};

}  // namespace

const Kernels& scalar() { return kScalar; }

}  // namespace amr::kernels
