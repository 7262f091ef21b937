#pragma once

#include <random>
#include <utility>

#include "amr/modulation.hpp"
#include "amr/ops.hpp"
#include "amr/tensor.hpp"

namespace amr {

// Attention modulation applied channel-first, then spatially. Both stages
// follow the same recipe: pool, convolve, redistribute with the modulation
// function, multiply back into the features.
template <class T>
struct AmmParams {
  Tensor<T> channel_kernel;  // (k_c), 1-d conv across the channel axis
  Tensor<T> spatial_kernel;  // (1,1,k_s,k_s), same-padded 2-d conv

  // Kernels start as unit impulses plus a small random perturbation, so the
  // initial attention is the modulation of the (unmixed) pooled activations
  // themselves. A fully random kernel mixes neighboring cells/channels before
  // the statistics are computed, which at desk scale turns the attention into
  // image-dependent noise that punches holes in the compensation maps; the
  // near-identity start keeps the modulation's redistribution effect pure
  // while leaving the mixing weights free to train away from it.
  static AmmParams init(int k_c, int k_s, uint64_t seed, bool trainable = true) {
    if (k_c % 2 == 0 || k_s % 2 == 0)
      throw ArgumentError("AMM kernel sizes must be odd");
    AmmParams p = delta(k_c, k_s, trainable);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& v : p.channel_kernel.value())
      v += static_cast<T>(0.02 * dist(rng));
    for (auto& v : p.spatial_kernel.value())
      v += static_cast<T>(0.02 * dist(rng));
    return p;
  }

  // Unit impulse kernels: convolution becomes the identity.
  static AmmParams delta(int k_c, int k_s, bool trainable = false) {
    AmmParams p;
    p.channel_kernel = Tensor<T>::zeros({k_c}, trainable);
    p.channel_kernel.value()[k_c / 2] = T(1);
    p.spatial_kernel = Tensor<T>::zeros({1, 1, k_s, k_s}, trainable);
    p.spatial_kernel.value()[(k_s / 2) * k_s + k_s / 2] = T(1);
    return p;
  }
};

template <class T>
struct ChannelAmmOut {
  Tensor<T> features;   // (B,C,H,W)
  Tensor<T> attention;  // (B,C)
};

template <class T>
struct SpatialAmmOut {
  Tensor<T> features;   // (B,C,H,W)
  Tensor<T> attention;  // (B,1,H,W)
};

template <class T>
ChannelAmmOut<T> channel_amm(Graph<T>& g, Tensor<T> features, const AmmParams<T>& params,
                             const ModulationFn& fn) {
  if (features.rank() != 4) throw DimensionError("channel_amm expects (B,C,H,W)");
  const int64_t B = features.dim(0), C = features.dim(1);
  Tensor<T> pooled = ops::pool(g, features, ops::PoolMode::SpatialAvg);  // (B,C,1,1)
  Tensor<T> squeezed = ops::reshape(g, pooled, {B, C});
  Tensor<T> conv = ops::channel_conv1d(g, squeezed, params.channel_kernel);
  Tensor<T> attn = modulate(g, conv, fn, C);  // stats per sample over C
  Tensor<T> attn4 = ops::reshape(g, attn, {B, C, 1, 1});
  Tensor<T> out = ops::mul(g, attn4, features);
  return {out, attn};
}

template <class T>
SpatialAmmOut<T> spatial_amm(Graph<T>& g, Tensor<T> features, const AmmParams<T>& params,
                             const ModulationFn& fn) {
  if (features.rank() != 4) throw DimensionError("spatial_amm expects (B,C,H,W)");
  const int64_t H = features.dim(2), W = features.dim(3);
  const int64_t ks = params.spatial_kernel.dim(2);
  if (H < ks || W < ks)
    throw DimensionError("spatial_amm: spatial extent smaller than kernel");
  Tensor<T> pooled = ops::pool(g, features, ops::PoolMode::ChannelAvg);  // (B,1,H,W)
  Tensor<T> conv = ops::conv2d(g, pooled, params.spatial_kernel, 1, static_cast<int>(ks / 2));
  Tensor<T> attn = modulate(g, conv, fn, H * W);  // stats per sample over H*W
  Tensor<T> out = ops::mul(g, attn, features);
  return {out, attn};
}

// Channel stage then spatial stage, strictly sequential. Either stage can be
// switched off for ablation, in which case it passes features through.
template <class T>
Tensor<T> amm_forward(Graph<T>& g, Tensor<T> features, const AmmParams<T>& params,
                      const ModulationFn& fn, bool use_channel = true, bool use_spatial = true) {
  Tensor<T> cur = features;
  if (use_channel) cur = channel_amm(g, cur, params, fn).features;
  if (use_spatial) cur = spatial_amm(g, cur, params, fn).features;
  return cur;
}

}  // namespace amr
