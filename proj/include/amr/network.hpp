#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "amr/amm.hpp"
#include "amr/modulation.hpp"
#include "amr/ops.hpp"
#include "amr/optim.hpp"
#include "amr/tensor.hpp"

namespace amr {

// Shared feature extractor: four 3x3 conv+relu blocks, the first three with
// stride 2, giving output stride 8 at C_feat channels.
template <class T>
struct Backbone {
  static constexpr int kNumBlocks = 4;
  static constexpr int kWidths[kNumBlocks] = {16, 32, 64, 64};
  static constexpr int kStrides[kNumBlocks] = {2, 2, 2, 1};
  static constexpr int kFeatChannels = 64;

  std::vector<Tensor<T>> convs;  // (Cout,Cin,3,3) each

  static Backbone init(int in_channels, uint64_t seed) {
    Backbone b;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    int cin = in_channels;
    for (int i = 0; i < kNumBlocks; ++i) {
      const int cout = kWidths[i];
      Tensor<T> w = Tensor<T>::zeros({cout, cin, 3, 3}, true);
      const double he = std::sqrt(2.0 / (static_cast<double>(cin) * 9.0));
      for (auto& v : w.value()) v = static_cast<T>(dist(rng) * he);
      b.convs.push_back(w);
      cin = cout;
    }
    return b;
  }

  Tensor<T> forward(Graph<T>& g, Tensor<T> images) const {
    if (images.rank() != 4) throw DimensionError("backbone expects (B,3,H,W)");
    if (images.dim(2) < 32 || images.dim(3) < 32)
      throw DimensionError("backbone: image extent must be at least 32");
    Tensor<T> cur = images;
    for (int i = 0; i < kNumBlocks; ++i) {
      cur = ops::conv2d(g, cur, convs[i], kStrides[i], 1);
      cur = ops::relu(g, cur);
    }
    return cur;
  }
};

// Dual-branch classifier: a plain (spotlight) head on the shared features and
// a compensation head on AMM-modulated features. Both heads are bias-free so
// their class maps are exact weight projections of the features.
template <class T>
struct AmrModel {
  Backbone<T> backbone;
  Tensor<T> w_spot;  // (N_classes, C_feat)
  Tensor<T> w_comp;  // (N_classes, C_feat)
  AmmParams<T> amm;
  int n_classes = 0;

  static AmrModel init(int n_classes, uint64_t seed, int k_c = 5, int k_s = 3) {
    AmrModel m;
    m.n_classes = n_classes;
    m.backbone = Backbone<T>::init(3, mix_seed(seed, 1));
    std::mt19937_64 rng(mix_seed(seed, 2));
    std::normal_distribution<double> dist(0.0, 1.0);
    // Generous head gain keeps the initial CAM ranges wide. The consistency
    // term acts on min-max normalized maps, so its gradient scales with
    // 1/range: wide maps keep the early consistency pull on the same footing
    // as the classification gradient instead of letting it whip two random
    // map stacks toward each other before the backbone has learned anything.
    const double sd = 8.0 / std::sqrt(static_cast<double>(Backbone<T>::kFeatChannels));
    m.w_spot = Tensor<T>::zeros({n_classes, Backbone<T>::kFeatChannels}, true);
    for (auto& v : m.w_spot.value()) v = static_cast<T>(dist(rng) * sd);
    // The compensation head starts as a copy of the spotlight head. Two
    // independently random heads produce uncorrelated CAM stacks, and the
    // consistency term then finds its fastest descent in zeroing both stacks
    // out, which permanently kills the maps. Identical heads make the initial
    // stacks near-proportional — and max-normalization is scale invariant —
    // so the consistency pull starts near zero and only acts on the gap the
    // attention module itself introduces. The heads diverge as training
    // progresses because they receive different features.
    m.w_comp = Tensor<T>::zeros({n_classes, Backbone<T>::kFeatChannels}, true);
    m.w_comp.value() = m.w_spot.value();
    m.amm = AmmParams<T>::init(k_c, k_s, mix_seed(seed, 3));
    return m;
  }

  std::vector<std::pair<std::string, Tensor<T>>> named_params(bool use_amm_c,
                                                              bool use_amm_s) {
    std::vector<std::pair<std::string, Tensor<T>>> out;
    for (std::size_t i = 0; i < backbone.convs.size(); ++i)
      out.emplace_back("backbone.conv" + std::to_string(i), backbone.convs[i]);
    out.emplace_back("head.spotlight", w_spot);
    out.emplace_back("head.compensation", w_comp);
    if (use_amm_c) out.emplace_back("amm.channel_kernel", amm.channel_kernel);
    if (use_amm_s) out.emplace_back("amm.spatial_kernel", amm.spatial_kernel);
    return out;
  }

  std::vector<Tensor<T>> params(bool use_amm_c = true, bool use_amm_s = true) {
    std::vector<Tensor<T>> out;
    for (auto& [name, t] : named_params(use_amm_c, use_amm_s)) out.push_back(t);
    return out;
  }
};

template <class T>
struct ForwardOut {
  Tensor<T> logits_s;  // (B,N)
  Tensor<T> logits_c;  // (B,N)
  Tensor<T> cam_s;     // (B,N,h,w), raw
  Tensor<T> cam_c;     // (B,N,h,w), raw
  Tensor<T> features;  // (B,C_feat,h,w)
};

template <class T>
ForwardOut<T> forward(Graph<T>& g, AmrModel<T>& model, Tensor<T> images,
                      const ModulationFn& fn, bool use_amm_c = true, bool use_amm_s = true) {
  ForwardOut<T> out;
  out.features = model.backbone.forward(g, images);
  Tensor<T> feat_s = out.features;
  Tensor<T> feat_c = amm_forward(g, out.features, model.amm, fn, use_amm_c, use_amm_s);
  out.logits_s = ops::linear(g, ops::pool(g, feat_s, ops::PoolMode::GlobalAvg), model.w_spot);
  out.logits_c = ops::linear(g, ops::pool(g, feat_c, ops::PoolMode::GlobalAvg), model.w_comp);
  out.cam_s = ops::cam_project(g, feat_s, model.w_spot);
  out.cam_c = ops::cam_project(g, feat_c, model.w_comp);
  return out;
}

// Zeroes maps of absent classes and min-max normalizes each remaining map:
// shift by the map min, divide by the map range, landing on [0,1] with min 0
// and max 1. labels is a (B*N) multi-hot vector. Absent-class maps are
// constant zero after masking and stay all-zero through normalization.
template <class T>
Tensor<T> normalize_cam(Graph<T>& g, Tensor<T> cam, const std::vector<T>& labels) {
  if (cam.rank() != 4) throw DimensionError("normalize_cam expects (B,N,h,w)");
  const int64_t B = cam.dim(0), N = cam.dim(1);
  if (static_cast<int64_t>(labels.size()) != B * N)
    throw DimensionError("normalize_cam: label shape mismatch");
  Tensor<T> mask = Tensor<T>::from({B, N, 1, 1}, labels);
  Tensor<T> masked = ops::mul(g, cam, mask);
  return ops::minmax_normalize(g, masked, cam.dim(2) * cam.dim(3));
}

// Evaluation-time CAM normalization for pseudo-labeling, applied in place to
// a flat (B*N*map_size) buffer: zeroes maps of absent classes, clamps
// negatives, divides each map by its max, then applies an optional contrast
// exponent (v^gamma, identity at 1). Maps whose max falls below 1e-8 become
// all-zero. This intentionally differs from the training-side min-max
// normalization: pseudo-labels need inactive background to stay at exactly
// zero, whereas stretching every map onto [0,1] would push background pixels
// of weak maps over the foreground threshold. Gamma, when used, is applied
// identically to every branch, so any difference between variants downstream
// reflects genuine differences in map shape.
template <class T>
void normalize_cam_eval(std::vector<T>& maps, const std::vector<T>& labels, int64_t map_size,
                        T gamma = T(1)) {
  const int64_t groups = static_cast<int64_t>(maps.size()) / map_size;
  if (groups * map_size != static_cast<int64_t>(maps.size()) ||
      groups != static_cast<int64_t>(labels.size()))
    throw DimensionError("normalize_cam_eval: buffer/label shape mismatch");
  for (int64_t gi = 0; gi < groups; ++gi) {
    T* v = maps.data() + gi * map_size;
    if (labels[gi] == T(0)) {
      std::fill(v, v + map_size, T(0));
      continue;
    }
    T m = T(0);
    for (int64_t i = 0; i < map_size; ++i) {
      if (v[i] < T(0)) v[i] = T(0);
      if (v[i] > m) m = v[i];
    }
    if (m < T(1e-8)) {
      std::fill(v, v + map_size, T(0));
      continue;
    }
    if (gamma == T(1)) {
      for (int64_t i = 0; i < map_size; ++i) v[i] /= m;
    } else {
      for (int64_t i = 0; i < map_size; ++i)
        v[i] = static_cast<T>(std::pow(static_cast<double>(v[i] / m), static_cast<double>(gamma)));
    }
  }
}

template <class T>
Tensor<T> loss_cls(Graph<T>& g, Tensor<T> logits, const std::vector<T>& labels) {
  return ops::multilabel_soft_margin(g, logits, labels);
}

template <class T>
struct LossOut {
  Tensor<T> total;        // the optimized objective
  Tensor<T> cls;          // averaged branch classification loss
  Tensor<T> cps;          // cross-branch CAM consistency (always computed)
  Tensor<T> normalized_s;  // (B,N,h,w)
  Tensor<T> normalized_c;  // (B,N,h,w)
};

// L_cls averages the two branch losses; L_cps is the mean absolute difference
// between the normalized CAM stacks over present-class maps, with gradients
// flowing into both branches. When use_cps is off the objective excludes
// L_cps but its value is still reported.
template <class T>
LossOut<T> loss_total(Graph<T>& g, const ForwardOut<T>& out, const std::vector<T>& labels,
                      bool use_cps = true) {
  LossOut<T> l;
  Tensor<T> ls = loss_cls(g, out.logits_s, labels);
  Tensor<T> lc = loss_cls(g, out.logits_c, labels);
  l.cls = ops::scale(g, ops::add(g, ls, lc), T(0.5));

  l.normalized_s = normalize_cam(g, out.cam_s, labels);
  l.normalized_c = normalize_cam(g, out.cam_c, labels);
  double present = 0.0;
  for (T v : labels) present += static_cast<double>(v);
  const int64_t hw = out.cam_s.dim(2) * out.cam_s.dim(3);
  if (present > 0.0) {
    Tensor<T> diff = ops::absval(g, ops::sub(g, l.normalized_s, l.normalized_c));
    l.cps = ops::scale(g, ops::sum_all(g, diff),
                       static_cast<T>(1.0 / (present * static_cast<double>(hw))));
  } else {
    l.cps = Tensor<T>::scalar(T(0));
  }
  l.total = use_cps ? ops::add(g, l.cls, l.cps) : l.cls;
  return l;
}

}  // namespace amr
