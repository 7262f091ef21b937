#pragma once

#include <cmath>
#include <memory>

#include "amr/ops.hpp"
#include "amr/tensor.hpp"

namespace amr {

// Activation redistribution applied to attention maps. Gaussian maps each
// value v to exp(-(v-mu)^2 / (2 sigma^2)) with mu/sigma taken from the map
// itself, boosting mid-range activations and suppressing both extremes.
// Threshold binarizes at t (per-map mean when adaptive). Identity passes
// values through.
enum class ModulationKind { Gaussian, Threshold, Identity };

// Records the per-map statistics of one forward pass so a later replay can
// reuse them verbatim. The gradient checker needs this: mu/sigma are
// non-differentiable constants, so the finite-difference oracle must hold
// them fixed while perturbing inputs.
struct StatsCache {
  std::vector<std::pair<double, double>> entries;  // (mu, sigma) per map
  std::size_t cursor = 0;
  bool frozen = false;
  void rewind() { cursor = 0; }
};

struct ModulationFn {
  ModulationKind kind = ModulationKind::Gaussian;
  double threshold = 0.0;
  bool adaptive_threshold = true;  // use the per-map mean as t
  double epsilon = 1e-6;           // sigma floor; below it the map becomes all-ones
  std::shared_ptr<StatsCache> stats_cache;  // optional; test support

  static ModulationFn gaussian(double eps = 1e-6) { return {ModulationKind::Gaussian, 0.0, true, eps}; }
  static ModulationFn threshold_at(double t) { return {ModulationKind::Threshold, t, false, 1e-6}; }
  static ModulationFn threshold_mean() { return {ModulationKind::Threshold, 0.0, true, 1e-6}; }
  static ModulationFn identity() { return {ModulationKind::Identity, 0.0, true, 1e-6}; }
};

struct ActivationStats {
  double mu = 0.0;
  double sigma = 0.0;
  int64_t count = 0;
};

// Population mean / standard deviation of a contiguous span.
template <class T>
ActivationStats activation_stats(const T* v, int64_t n) {
  if (n <= 0) throw DimensionError("activation_stats: empty input");
  double mean = 0.0;
  for (int64_t i = 0; i < n; ++i) mean += static_cast<double>(v[i]);
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(v[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  return {mean, std::sqrt(var), n};
}

template <class T>
ActivationStats activation_stats(const Tensor<T>& t) {
  return activation_stats(t.value().data(), t.numel());
}

template <class T>
ActivationStats stats_for_map(const ModulationFn& fn, const T* src, int64_t n) {
  if (fn.stats_cache) {
    auto& c = *fn.stats_cache;
    if (c.frozen) {
      const auto& [mu, sigma] = c.entries.at(c.cursor++);
      return {mu, sigma, n};
    }
    ActivationStats st = activation_stats(src, n);
    c.entries.emplace_back(st.mu, st.sigma);
    ++c.cursor;
    return st;
  }
  return activation_stats(src, n);
}

// Modulates each contiguous group of `group_size` elements independently,
// recomputing mu/sigma per group. The statistics are constants for
// differentiation; gradients flow only through v itself.
template <class T>
Tensor<T> modulate(Graph<T>& g, Tensor<T> x, const ModulationFn& fn, int64_t group_size) {
  if (x.numel() == 0 || group_size <= 0 || x.numel() % group_size != 0)
    throw DimensionError("modulate: group size must divide element count");
  const int64_t groups = x.numel() / group_size;
  Tensor<T> out = Tensor<T>::zeros(x.shape());

  if (fn.kind == ModulationKind::Identity) {
    out.value() = x.value();
    if (!x.requires_grad()) return out;
    out.set_requires_grad(true);
    out.ensure_grad();
    x.ensure_grad();
    g.record([x, out]() mutable {
      const auto& go = out.grad();
      auto& gx = x.grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
    return out;
  }

  if (fn.kind == ModulationKind::Threshold) {
    for (int64_t gi = 0; gi < groups; ++gi) {
      const T* src = x.value().data() + gi * group_size;
      T* dst = out.value().data() + gi * group_size;
      const double t =
          fn.adaptive_threshold ? stats_for_map(fn, src, group_size).mu : fn.threshold;
      for (int64_t i = 0; i < group_size; ++i)
        dst[i] = static_cast<double>(src[i]) > t ? T(1) : T(0);
    }
    return out;  // step function: gradient defined as 0, nothing to record
  }

  // Gaussian
  auto coeff = std::make_shared<std::vector<double>>(2 * groups);  // (mu, 1/sigma^2) per group
  for (int64_t gi = 0; gi < groups; ++gi) {
    const T* src = x.value().data() + gi * group_size;
    T* dst = out.value().data() + gi * group_size;
    const ActivationStats st = stats_for_map(fn, src, group_size);
    if (st.sigma < fn.epsilon) {
      // zero-variance map carries no ordering: uniform attention
      for (int64_t i = 0; i < group_size; ++i) dst[i] = T(1);
      (*coeff)[2 * gi] = st.mu;
      (*coeff)[2 * gi + 1] = 0.0;
      continue;
    }
    const double inv_var = 1.0 / (st.sigma * st.sigma);
    (*coeff)[2 * gi] = st.mu;
    (*coeff)[2 * gi + 1] = inv_var;
    for (int64_t i = 0; i < group_size; ++i) {
      const double d = static_cast<double>(src[i]) - st.mu;
      dst[i] = static_cast<T>(std::exp(-0.5 * d * d * inv_var));
    }
  }
  if (!x.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  x.ensure_grad();
  g.record([x, out, coeff, groups, group_size]() mutable {
    for (int64_t gi = 0; gi < groups; ++gi) {
      const double mu = (*coeff)[2 * gi];
      const double inv_var = (*coeff)[2 * gi + 1];
      if (inv_var == 0.0) continue;  // sigma-floor branch is constant
      const T* src = x.value().data() + gi * group_size;
      const T* ov = out.value().data() + gi * group_size;
      const T* go = out.grad().data() + gi * group_size;
      T* gx = x.grad().data() + gi * group_size;
      for (int64_t i = 0; i < group_size; ++i) {
        const double d = static_cast<double>(src[i]) - mu;
        gx[i] += static_cast<T>(static_cast<double>(go[i]) * static_cast<double>(ov[i]) *
                                (-d * inv_var));
      }
    }
  });
  return out;
}

}  // namespace amr
