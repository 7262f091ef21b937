#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <type_traits>
#include <vector>

#include "amr/kernels.hpp"
#include "amr/tensor.hpp"

// Reverse-mode ops over Tensor<T>. Instantiated with T=float for training and
// T=double for the finite-difference shadow mode; both types run the same
// graph code, with the float instantiation routed through the kernel
// backends. Reductions accumulate in float64 for both instantiations.

namespace amr::ops {

// ---- kernel shims ---------------------------------------------------------

template <class T>
inline void axpy_acc(double* acc, const T* x, T w, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().axpy_acc(acc, x, w, n);
  } else {
    const double wd = static_cast<double>(w);
    for (std::size_t i = 0; i < n; ++i)
      acc[i] = std::fma(wd, static_cast<double>(x[i]), acc[i]);
  }
}

template <class T>
inline double dot(const T* a, const T* b, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return kernels::active().dot(a, b, n);
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      acc = std::fma(static_cast<double>(a[i]), static_cast<double>(b[i]), acc);
    return acc;
  }
}

template <class T>
inline double sum(const T* a, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return kernels::active().sum(a, n);
  } else {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]);
    return acc;
  }
}

// ---- broadcasting helpers -------------------------------------------------

struct BroadcastPlan {
  Shape out_shape;
  std::vector<int64_t> stride_a, stride_b;  // 0 on expanded axes
  int64_t n = 0;
};

inline BroadcastPlan broadcast_plan(const Shape& a, const Shape& b) {
  Shape sa = a, sb = b;
  // A true scalar broadcasts against any rank.
  if (numel(sa) == 1 && sa.size() != sb.size()) sa.assign(sb.size(), 1);
  if (numel(sb) == 1 && sb.size() != sa.size()) sb.assign(sa.size(), 1);
  if (sa.size() != sb.size())
    throw DimensionError("broadcast rank mismatch " + shape_str(a) + " vs " + shape_str(b));
  const int r = static_cast<int>(sa.size());
  BroadcastPlan p;
  p.out_shape.resize(r);
  for (int i = 0; i < r; ++i) {
    if (sa[i] == sb[i]) p.out_shape[i] = sa[i];
    else if (sa[i] == 1) p.out_shape[i] = sb[i];
    else if (sb[i] == 1) p.out_shape[i] = sa[i];
    else
      throw DimensionError("shapes not broadcastable " + shape_str(a) + " vs " + shape_str(b));
  }
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  int64_t acc_a = 1, acc_b = 1;
  for (int i = r - 1; i >= 0; --i) {
    p.stride_a[i] = (sa[i] == 1) ? 0 : acc_a;
    p.stride_b[i] = (sb[i] == 1) ? 0 : acc_b;
    acc_a *= sa[i];
    acc_b *= sb[i];
  }
  p.n = numel(p.out_shape);
  return p;
}

// Visit every output index, yielding flat offsets into both operands.
template <class F>
inline void for_each_broadcast(const BroadcastPlan& p, F&& fn) {
  const int r = static_cast<int>(p.out_shape.size());
  std::vector<int64_t> idx(r, 0);
  int64_t ia = 0, ib = 0;
  for (int64_t o = 0; o < p.n; ++o) {
    fn(o, ia, ib);
    for (int d = r - 1; d >= 0; --d) {
      ++idx[d];
      ia += p.stride_a[d];
      ib += p.stride_b[d];
      if (idx[d] < p.out_shape[d]) break;
      ia -= p.stride_a[d] * p.out_shape[d];
      ib -= p.stride_b[d] * p.out_shape[d];
      idx[d] = 0;
    }
  }
}

// ---- elementwise ----------------------------------------------------------

enum class BinaryOp { Mul, Add, Sub };

template <class T>
Tensor<T> binary(Graph<T>& g, Tensor<T> a, Tensor<T> b, BinaryOp op) {
  const bool same = a.shape() == b.shape();
  Tensor<T> out;
  if (same) {
    out = Tensor<T>::zeros(a.shape());
    const std::size_t n = a.numel();
    if constexpr (std::is_same_v<T, float>) {
      const auto& k = kernels::active();
      switch (op) {
        case BinaryOp::Mul: k.mul(a.value().data(), b.value().data(), out.value().data(), n); break;
        case BinaryOp::Add: k.add(a.value().data(), b.value().data(), out.value().data(), n); break;
        case BinaryOp::Sub: k.sub(a.value().data(), b.value().data(), out.value().data(), n); break;
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        switch (op) {
          case BinaryOp::Mul: out.value()[i] = a.value()[i] * b.value()[i]; break;
          case BinaryOp::Add: out.value()[i] = a.value()[i] + b.value()[i]; break;
          case BinaryOp::Sub: out.value()[i] = a.value()[i] - b.value()[i]; break;
        }
      }
    }
  } else {
    BroadcastPlan p = broadcast_plan(a.shape(), b.shape());
    out = Tensor<T>::zeros(p.out_shape);
    auto* ov = out.value().data();
    const auto* av = a.value().data();
    const auto* bv = b.value().data();
    for_each_broadcast(p, [&](int64_t o, int64_t ia, int64_t ib) {
      switch (op) {
        case BinaryOp::Mul: ov[o] = av[ia] * bv[ib]; break;
        case BinaryOp::Add: ov[o] = av[ia] + bv[ib]; break;
        case BinaryOp::Sub: ov[o] = av[ia] - bv[ib]; break;
      }
    });
  }
  if (!a.requires_grad() && !b.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  if (a.requires_grad()) a.ensure_grad();
  if (b.requires_grad()) b.ensure_grad();
  g.record([a, b, out, op]() mutable {
    const auto& go = out.grad();
    if (a.shape() == b.shape()) {
      const std::size_t n = go.size();
      for (std::size_t i = 0; i < n; ++i) {
        switch (op) {
          case BinaryOp::Mul:
            if (a.requires_grad()) a.grad()[i] += go[i] * b.value()[i];
            if (b.requires_grad()) b.grad()[i] += go[i] * a.value()[i];
            break;
          case BinaryOp::Add:
            if (a.requires_grad()) a.grad()[i] += go[i];
            if (b.requires_grad()) b.grad()[i] += go[i];
            break;
          case BinaryOp::Sub:
            if (a.requires_grad()) a.grad()[i] += go[i];
            if (b.requires_grad()) b.grad()[i] -= go[i];
            break;
        }
      }
    } else {
      BroadcastPlan p = broadcast_plan(a.shape(), b.shape());
      auto* ga = a.requires_grad() ? a.grad().data() : nullptr;
      auto* gb = b.requires_grad() ? b.grad().data() : nullptr;
      const auto* av = a.value().data();
      const auto* bv = b.value().data();
      const auto* gov = go.data();
      for_each_broadcast(p, [&](int64_t o, int64_t ia, int64_t ib) {
        switch (op) {
          case BinaryOp::Mul:
            if (ga) ga[ia] += gov[o] * bv[ib];
            if (gb) gb[ib] += gov[o] * av[ia];
            break;
          case BinaryOp::Add:
            if (ga) ga[ia] += gov[o];
            if (gb) gb[ib] += gov[o];
            break;
          case BinaryOp::Sub:
            if (ga) ga[ia] += gov[o];
            if (gb) gb[ib] -= gov[o];
            break;
        }
      });
    }
  });
  return out;
}

template <class T>
Tensor<T> mul(Graph<T>& g, Tensor<T> a, Tensor<T> b) { return binary(g, a, b, BinaryOp::Mul); }
template <class T>
Tensor<T> add(Graph<T>& g, Tensor<T> a, Tensor<T> b) { return binary(g, a, b, BinaryOp::Add); }
template <class T>
Tensor<T> sub(Graph<T>& g, Tensor<T> a, Tensor<T> b) { return binary(g, a, b, BinaryOp::Sub); }

enum class UnaryOp { Relu, Sigmoid, Abs };

template <class T>
Tensor<T> unary(Graph<T>& g, Tensor<T> a, UnaryOp op) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  if constexpr (std::is_same_v<T, float>) {
    const auto& k = kernels::active();
    if (op == UnaryOp::Relu) k.relu(a.value().data(), out.value().data(), n);
    else if (op == UnaryOp::Abs) k.absv(a.value().data(), out.value().data(), n);
  }
  if (!std::is_same_v<T, float> || op == UnaryOp::Sigmoid) {
    for (std::size_t i = 0; i < n; ++i) {
      const T v = a.value()[i];
      switch (op) {
        case UnaryOp::Relu: out.value()[i] = v > T(0) ? v : T(0); break;
        case UnaryOp::Abs: out.value()[i] = std::abs(v); break;
        case UnaryOp::Sigmoid: out.value()[i] = T(1) / (T(1) + std::exp(-v)); break;
      }
    }
  }
  if (!a.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  a.ensure_grad();
  g.record([a, out, op]() mutable {
    const auto& go = out.grad();
    auto& ga = a.grad();
    const std::size_t n = go.size();
    for (std::size_t i = 0; i < n; ++i) {
      switch (op) {
        case UnaryOp::Relu:
          // subgradient at 0 is 0
          if (a.value()[i] > T(0)) ga[i] += go[i];
          break;
        case UnaryOp::Abs: {
          const T v = a.value()[i];
          ga[i] += go[i] * (v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)));
          break;
        }
        case UnaryOp::Sigmoid: {
          const T s = out.value()[i];
          ga[i] += go[i] * s * (T(1) - s);
          break;
        }
      }
    }
  });
  return out;
}

template <class T>
Tensor<T> relu(Graph<T>& g, Tensor<T> a) { return unary(g, a, UnaryOp::Relu); }
template <class T>
Tensor<T> sigmoid(Graph<T>& g, Tensor<T> a) { return unary(g, a, UnaryOp::Sigmoid); }
template <class T>
Tensor<T> absval(Graph<T>& g, Tensor<T> a) { return unary(g, a, UnaryOp::Abs); }

template <class T>
Tensor<T> scale(Graph<T>& g, Tensor<T> a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  const std::size_t n = a.numel();
  if constexpr (std::is_same_v<T, float>) {
    kernels::active().scale(a.value().data(), c, out.value().data(), n);
  } else {
    for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] * c;
  }
  if (!a.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  a.ensure_grad();
  g.record([a, out, c]() mutable {
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * c;
  });
  return out;
}

// Copying reshape; gradients route straight through.
template <class T>
Tensor<T> reshape(Graph<T>& g, Tensor<T> a, Shape new_shape) {
  if (numel(new_shape) != a.numel())
    throw DimensionError("reshape: element count mismatch " + shape_str(a.shape()) + " -> " +
                         shape_str(new_shape));
  Tensor<T> out = Tensor<T>::from(std::move(new_shape), a.value());
  if (!a.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  a.ensure_grad();
  g.record([a, out]() mutable {
    const auto& go = out.grad();
    auto& ga = a.grad();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
  return out;
}

// ---- reductions -----------------------------------------------------------

template <class T>
Tensor<T> sum_all(Graph<T>& g, Tensor<T> a) {
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(sum(a.value().data(), a.numel())));
  if (!a.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  a.ensure_grad();
  g.record([a, out]() mutable {
    const T go = out.grad()[0];
    auto& ga = a.grad();
    for (auto& v : ga) v += go;
  });
  return out;
}

template <class T>
Tensor<T> mean_all(Graph<T>& g, Tensor<T> a) {
  return scale(g, sum_all(g, a), T(1) / static_cast<T>(a.numel()));
}

// ---- pooling --------------------------------------------------------------

enum class PoolMode { SpatialAvg, ChannelAvg, GlobalAvg };

template <class T>
Tensor<T> pool(Graph<T>& g, Tensor<T> x, PoolMode mode) {
  if (x.rank() != 4) throw DimensionError("pool expects a rank-4 tensor, got " + shape_str(x.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t hw = H * W;
  Tensor<T> out;
  switch (mode) {
    case PoolMode::SpatialAvg: out = Tensor<T>::zeros({B, C, 1, 1}); break;
    case PoolMode::ChannelAvg: out = Tensor<T>::zeros({B, 1, H, W}); break;
    case PoolMode::GlobalAvg: out = Tensor<T>::zeros({B, C}); break;
  }
  const auto* xv = x.value().data();
  auto* ov = out.value().data();
  if (mode == PoolMode::SpatialAvg || mode == PoolMode::GlobalAvg) {
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c)
        ov[b * C + c] = static_cast<T>(sum(xv + (b * C + c) * hw, hw) / static_cast<double>(hw));
  } else {
    for (int64_t b = 0; b < B; ++b)
      for (int64_t p = 0; p < hw; ++p) {
        double acc = 0.0;
        for (int64_t c = 0; c < C; ++c) acc += static_cast<double>(xv[(b * C + c) * hw + p]);
        ov[b * hw + p] = static_cast<T>(acc / static_cast<double>(C));
      }
  }
  if (!x.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  x.ensure_grad();
  g.record([x, out, mode, B, C, hw]() mutable {
    const auto* go = out.grad().data();
    auto* gx = x.grad().data();
    if (mode == PoolMode::SpatialAvg || mode == PoolMode::GlobalAvg) {
      const T inv = T(1) / static_cast<T>(hw);
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          const T gv = go[b * C + c] * inv;
          T* dst = gx + (b * C + c) * hw;
          for (int64_t p = 0; p < hw; ++p) dst[p] += gv;
        }
    } else {
      const T inv = T(1) / static_cast<T>(C);
      for (int64_t b = 0; b < B; ++b)
        for (int64_t p = 0; p < hw; ++p) {
          const T gv = go[b * hw + p] * inv;
          for (int64_t c = 0; c < C; ++c) gx[(b * C + c) * hw + p] += gv;
        }
    }
  });
  return out;
}

// ---- linear (bias-free) ---------------------------------------------------

template <class T>
Tensor<T> linear(Graph<T>& g, Tensor<T> x, Tensor<T> w) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
    throw DimensionError("linear: incompatible shapes " + shape_str(x.shape()) + " x " +
                         shape_str(w.shape()));
  const int64_t B = x.dim(0), C = x.dim(1), N = w.dim(0);
  Tensor<T> out = Tensor<T>::zeros({B, N});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t n = 0; n < N; ++n)
      out.value()[b * N + n] =
          static_cast<T>(dot(x.value().data() + b * C, w.value().data() + n * C, C));
  if (!x.requires_grad() && !w.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  if (x.requires_grad()) x.ensure_grad();
  if (w.requires_grad()) w.ensure_grad();
  g.record([x, w, out, B, C, N]() mutable {
    const auto* go = out.grad().data();
    if (x.requires_grad()) {
      auto* gx = x.grad().data();
      for (int64_t b = 0; b < B; ++b)
        for (int64_t n = 0; n < N; ++n) {
          const T gv = go[b * N + n];
          if (gv == T(0)) continue;
          const T* wr = w.value().data() + n * C;
          T* dst = gx + b * C;
          for (int64_t c = 0; c < C; ++c) dst[c] += gv * wr[c];
        }
    }
    if (w.requires_grad()) {
      auto* gw = w.grad().data();
      for (int64_t n = 0; n < N; ++n)
        for (int64_t b = 0; b < B; ++b) {
          const T gv = go[b * N + n];
          if (gv == T(0)) continue;
          const T* xr = x.value().data() + b * C;
          T* dst = gw + n * C;
          for (int64_t c = 0; c < C; ++c) dst[c] += gv * xr[c];
        }
    }
  });
  return out;
}

// ---- conv2d ---------------------------------------------------------------

namespace detail {

// col is (Cin*k*k) x (Ho*Wo), row-major, zero-padded borders.
template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int64_t k, int64_t stride,
            int64_t pad, int64_t Ho, int64_t Wo, T* col) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t ky = 0; ky < k; ++ky)
      for (int64_t kx = 0; kx < k; ++kx) {
        T* row = col + ((c * k + ky) * k + kx) * (Ho * Wo);
        for (int64_t oy = 0; oy < Ho; ++oy) {
          const int64_t iy = oy * stride + ky - pad;
          T* dst = row + oy * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, T(0));
            continue;
          }
          const T* src = x + (c * H + iy) * W;
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const int64_t ix = ox * stride + kx - pad;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
}

template <class T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int64_t k, int64_t stride,
                int64_t pad, int64_t Ho, int64_t Wo, T* gx) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t ky = 0; ky < k; ++ky)
      for (int64_t kx = 0; kx < k; ++kx) {
        const T* row = col + ((c * k + ky) * k + kx) * (Ho * Wo);
        for (int64_t oy = 0; oy < Ho; ++oy) {
          const int64_t iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          T* dst = gx + (c * H + iy) * W;
          const T* src = row + oy * Wo;
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const int64_t ix = ox * stride + kx - pad;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace detail

template <class T>
Tensor<T> conv2d(Graph<T>& g, Tensor<T> x, Tensor<T> w, int stride, int padding) {
  if (x.rank() != 4 || w.rank() != 4)
    throw DimensionError("conv2d expects rank-4 input and kernel");
  if (x.dim(1) != w.dim(1))
    throw DimensionError("conv2d: input channels " + std::to_string(x.dim(1)) +
                         " != kernel channels " + std::to_string(w.dim(1)));
  if (w.dim(2) != w.dim(3)) throw DimensionError("conv2d: kernel must be square");
  if (stride < 1) throw ArgumentError("conv2d: stride must be positive");
  if (padding < 0) throw ArgumentError("conv2d: padding must be non-negative");
  const int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = w.dim(0), k = w.dim(2);
  if (k > H + 2 * padding || k > W + 2 * padding)
    throw DimensionError("conv2d: kernel larger than padded input");
  const int64_t Ho = (H + 2 * padding - k) / stride + 1;
  const int64_t Wo = (W + 2 * padding - k) / stride + 1;
  const int64_t K = Cin * k * k, N = Ho * Wo;

  Tensor<T> out = Tensor<T>::zeros({B, Cout, Ho, Wo});
  auto cols = std::make_shared<std::vector<T>>(B * K * N);
  std::vector<double> buf(N);
  for (int64_t b = 0; b < B; ++b) {
    T* col = cols->data() + b * K * N;
    detail::im2col(x.value().data() + b * Cin * H * W, Cin, H, W, k, stride, padding, Ho, Wo, col);
    for (int64_t co = 0; co < Cout; ++co) {
      std::fill(buf.begin(), buf.end(), 0.0);
      const T* wr = w.value().data() + co * K;
      for (int64_t r = 0; r < K; ++r) axpy_acc(buf.data(), col + r * N, wr[r], N);
      T* dst = out.value().data() + (b * Cout + co) * N;
      for (int64_t i = 0; i < N; ++i) dst[i] = static_cast<T>(buf[i]);
    }
  }
  if (!x.requires_grad() && !w.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  if (x.requires_grad()) x.ensure_grad();
  if (w.requires_grad()) w.ensure_grad();
  g.record([x, w, out, cols, B, Cin, H, W, Cout, k, K, N, Ho, Wo, stride, padding]() mutable {
    const auto* go = out.grad().data();
    if (w.requires_grad()) {
      auto* gw = w.grad().data();
      for (int64_t co = 0; co < Cout; ++co)
        for (int64_t r = 0; r < K; ++r) {
          double acc = 0.0;
          for (int64_t b = 0; b < B; ++b)
            acc += dot(go + (b * Cout + co) * N, cols->data() + (b * K + r) * N, N);
          gw[co * K + r] += static_cast<T>(acc);
        }
    }
    if (x.requires_grad()) {
      std::vector<double> buf(N);
      std::vector<T> gcol(K * N);
      for (int64_t b = 0; b < B; ++b) {
        for (int64_t r = 0; r < K; ++r) {
          std::fill(buf.begin(), buf.end(), 0.0);
          for (int64_t co = 0; co < Cout; ++co)
            axpy_acc(buf.data(), go + (b * Cout + co) * N, w.value()[co * K + r], N);
          T* dst = gcol.data() + r * N;
          for (int64_t i = 0; i < N; ++i) dst[i] = static_cast<T>(buf[i]);
        }
        detail::col2im_add(gcol.data(), Cin, H, W, k, stride, padding, Ho, Wo,
                           x.grad().data() + b * Cin * H * W);
      }
    }
  });
  return out;
}

// 1-d convolution along the channel axis, same zero padding, odd kernel.
template <class T>
Tensor<T> channel_conv1d(Graph<T>& g, Tensor<T> x, Tensor<T> w) {
  if (x.rank() != 2 || w.rank() != 1)
    throw DimensionError("channel_conv1d expects (B,C) input and 1-d kernel");
  const int64_t B = x.dim(0), C = x.dim(1), k = w.dim(0);
  if (k % 2 == 0) throw DimensionError("channel_conv1d: kernel size must be odd");
  if (C < k) throw DimensionError("channel_conv1d: channel count smaller than kernel");
  const int64_t h = k / 2;
  Tensor<T> out = Tensor<T>::zeros({B, C});
  for (int64_t b = 0; b < B; ++b)
    for (int64_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int64_t j = 0; j < k; ++j) {
        const int64_t src = c + j - h;
        if (src >= 0 && src < C)
          acc += static_cast<double>(w.value()[j]) * static_cast<double>(x.value()[b * C + src]);
      }
      out.value()[b * C + c] = static_cast<T>(acc);
    }
  if (!x.requires_grad() && !w.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  if (x.requires_grad()) x.ensure_grad();
  if (w.requires_grad()) w.ensure_grad();
  g.record([x, w, out, B, C, k, h]() mutable {
    const auto* go = out.grad().data();
    for (int64_t b = 0; b < B; ++b)
      for (int64_t c = 0; c < C; ++c) {
        const T gv = go[b * C + c];
        if (gv == T(0)) continue;
        for (int64_t j = 0; j < k; ++j) {
          const int64_t src = c + j - h;
          if (src < 0 || src >= C) continue;
          if (x.requires_grad()) x.grad()[b * C + src] += gv * w.value()[j];
          if (w.requires_grad()) w.grad()[j] += gv * x.value()[b * C + src];
        }
      }
  });
  return out;
}

// ---- CAM projection: out[b,n,:] = sum_c w[n,c] * f[b,c,:] -----------------

template <class T>
Tensor<T> cam_project(Graph<T>& g, Tensor<T> f, Tensor<T> w) {
  if (f.rank() != 4 || w.rank() != 2 || f.dim(1) != w.dim(1))
    throw DimensionError("cam_project: incompatible shapes");
  const int64_t B = f.dim(0), C = f.dim(1), hw = f.dim(2) * f.dim(3), N = w.dim(0);
  Tensor<T> out = Tensor<T>::zeros({B, N, f.dim(2), f.dim(3)});
  std::vector<double> buf(hw);
  for (int64_t b = 0; b < B; ++b)
    for (int64_t n = 0; n < N; ++n) {
      std::fill(buf.begin(), buf.end(), 0.0);
      for (int64_t c = 0; c < C; ++c)
        axpy_acc(buf.data(), f.value().data() + (b * C + c) * hw, w.value()[n * C + c], hw);
      T* dst = out.value().data() + (b * N + n) * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(buf[i]);
    }
  if (!f.requires_grad() && !w.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  if (f.requires_grad()) f.ensure_grad();
  if (w.requires_grad()) w.ensure_grad();
  g.record([f, w, out, B, C, hw, N]() mutable {
    const auto* go = out.grad().data();
    if (f.requires_grad()) {
      std::vector<double> buf(hw);
      for (int64_t b = 0; b < B; ++b)
        for (int64_t c = 0; c < C; ++c) {
          std::fill(buf.begin(), buf.end(), 0.0);
          for (int64_t n = 0; n < N; ++n)
            axpy_acc(buf.data(), go + (b * N + n) * hw, w.value()[n * C + c], hw);
          T* dst = f.grad().data() + (b * C + c) * hw;
          for (int64_t i = 0; i < hw; ++i) dst[i] += static_cast<T>(buf[i]);
        }
    }
    if (w.requires_grad()) {
      auto* gw = w.grad().data();
      for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (int64_t b = 0; b < B; ++b)
            acc += dot(go + (b * N + n) * hw, f.value().data() + (b * C + c) * hw, hw);
          gw[n * C + c] += static_cast<T>(acc);
        }
    }
  });
  return out;
}

// ---- per-map min-max normalization ----------------------------------------

// Shifts each contiguous map of `map_size` elements by its min and divides by
// its range, so maps with a healthy spread land exactly on [0,1] with min 0
// and max 1. The normalization is invariant to per-map shift and scale: the
// consistency loss downstream compares map *shapes*, and a branch cannot
// satisfy it by shrinking or offsetting its activations. Maps whose range
// falls below `range_floor` are tapered instead: the output picks up a factor
// range/range_floor, which goes to zero (in value and in gradient) as the map
// flattens. Without the taper a near-flat map keeps receiving full-strength
// L1 sign gradients, which lets the consistency term pin the whole network in
// a degenerate flat state; with it, flat maps drop out of the consistency
// loss smoothly and re-enter only once other objectives restore structure.
// Min and max are differentiable through their arg elements, so the whole
// expression is exact for the gradient check. Constant maps (absent-class
// maps masked to zero in particular) map to all zeros.
template <class T>
Tensor<T> minmax_normalize(Graph<T>& g, Tensor<T> x, int64_t map_size, T range_floor = T(1)) {
  if (x.numel() % map_size != 0)
    throw DimensionError("minmax_normalize: map size does not divide element count");
  const int64_t groups = x.numel() / map_size;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  auto argmin = std::make_shared<std::vector<int64_t>>(groups, 0);
  auto argmax = std::make_shared<std::vector<int64_t>>(groups, -1);
  for (int64_t gi = 0; gi < groups; ++gi) {
    const T* src = x.value().data() + gi * map_size;
    int64_t an = 0, ax = 0;
    for (int64_t i = 1; i < map_size; ++i) {
      if (src[i] < src[an]) an = i;
      if (src[i] > src[ax]) ax = i;
    }
    const T r = src[ax] - src[an];
    (*argmin)[gi] = an;
    T* dst = out.value().data() + gi * map_size;
    if (r > range_floor) {
      (*argmax)[gi] = ax;  // denominator is the (differentiable) map range
      for (int64_t i = 0; i < map_size; ++i) dst[i] = (src[i] - src[an]) / r;
    } else {
      // tapered branch: out = (v - min) * r / floor^2
      const T s = r / (range_floor * range_floor);
      for (int64_t i = 0; i < map_size; ++i) dst[i] = (src[i] - src[an]) * s;
    }
  }
  if (!x.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  x.ensure_grad();
  g.record([x, out, argmin, argmax, map_size, groups, range_floor]() mutable {
    for (int64_t gi = 0; gi < groups; ++gi) {
      const int64_t an = (*argmin)[gi];
      const int64_t ax = (*argmax)[gi];
      const T* src = x.value().data() + gi * map_size;
      const T* v = out.value().data() + gi * map_size;
      const T* go = out.grad().data() + gi * map_size;
      T* gx = x.grad().data() + gi * map_size;
      if (ax < 0) {
        // tapered branch: d out_i / d v_j =
        //   [r (d_ij - d_nj) + (v_i - v_n)(d_xj - d_nj)] / floor^2
        int64_t tx = an;  // recompute argmax (not stored for this branch)
        for (int64_t i = 0; i < map_size; ++i)
          if (src[i] > src[tx]) tx = i;
        const T r = src[tx] - src[an];
        const T f2 = range_floor * range_floor;
        double gsum = 0.0, gdsum = 0.0;  // sum go_i, sum go_i * (v_i - v_n)
        for (int64_t i = 0; i < map_size; ++i) {
          gx[i] += go[i] * r / f2;
          gsum += static_cast<double>(go[i]);
          gdsum += static_cast<double>(go[i]) * static_cast<double>(src[i] - src[an]);
        }
        gx[tx] += static_cast<T>(gdsum / static_cast<double>(f2));
        gx[an] -= static_cast<T>((gsum * static_cast<double>(r) + gdsum) /
                                 static_cast<double>(f2));
        continue;
      }
      const T r = src[ax] - src[an];
      double gsum = 0.0;   // sum_i go_i
      double gwsum = 0.0;  // sum_i go_i * out_i
      for (int64_t i = 0; i < map_size; ++i) {
        gx[i] += go[i] / r;
        gsum += static_cast<double>(go[i]);
        gwsum += static_cast<double>(go[i]) * static_cast<double>(v[i]);
      }
      gx[an] -= static_cast<T>((gsum - gwsum) / static_cast<double>(r));
      gx[ax] -= static_cast<T>(gwsum / static_cast<double>(r));
    }
  });
  return out;
}

// ---- multi-label soft margin loss -----------------------------------------

template <class T>
inline T softplus(T v) {
  // log(1 + e^v), overflow-safe
  return std::log1p(std::exp(-std::abs(v))) + std::max(v, T(0));
}

template <class T>
Tensor<T> multilabel_soft_margin(Graph<T>& g, Tensor<T> logits, const std::vector<T>& labels) {
  if (logits.rank() != 2) throw DimensionError("multilabel_soft_margin expects (B,N) logits");
  if (static_cast<int64_t>(labels.size()) != logits.numel())
    throw DimensionError("multilabel_soft_margin: label shape mismatch");
  const int64_t B = logits.dim(0), N = logits.dim(1);
  double acc = 0.0;
  for (int64_t i = 0; i < B * N; ++i) {
    const T y = logits.value()[i];
    const T t = labels[i];
    acc += static_cast<double>(t * softplus(-y) + (T(1) - t) * softplus(y));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(B * N)));
  if (!std::isfinite(static_cast<double>(out.item())))
    throw NumericError("multilabel_soft_margin produced a non-finite value");
  if (!logits.requires_grad()) return out;
  out.set_requires_grad(true);
  out.ensure_grad();
  logits.ensure_grad();
  auto lab = std::make_shared<std::vector<T>>(labels);
  g.record([logits, out, lab, B, N]() mutable {
    const T go = out.grad()[0] / static_cast<T>(B * N);
    auto& gx = logits.grad();
    for (int64_t i = 0; i < B * N; ++i) {
      const T s = T(1) / (T(1) + std::exp(-logits.value()[i]));
      gx[i] += go * (s - (*lab)[i]);
    }
  });
  return out;
}

}  // namespace amr::ops
