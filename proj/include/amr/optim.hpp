#pragma once

#include <vector>

#include "amr/tensor.hpp"

namespace amr {

// SGD with classical momentum and decoupled-from-nothing weight decay:
//   v <- momentum*v + grad + weight_decay*param
//   param <- param - lr*v
template <class T>
struct OptimState {
  T learning_rate;
  T momentum;
  T weight_decay;
  std::vector<std::vector<T>> velocity;  // one buffer per parameter

  OptimState(T lr, T mom, T wd) : learning_rate(lr), momentum(mom), weight_decay(wd) {}
};

template <class T>
void sgd_step(std::vector<Tensor<T>>& params, OptimState<T>& state) {
  if (state.velocity.empty()) {
    state.velocity.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
      state.velocity[i].assign(params[i].numel(), T(0));
  }
  if (state.velocity.size() != params.size())
    throw StateError("sgd_step: optimizer state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.requires_grad() || !p.has_grad())
      throw StateError("sgd_step: parameter is missing its gradient");
    auto& v = state.velocity[i];
    if (static_cast<int64_t>(v.size()) != p.numel())
      throw StateError("sgd_step: velocity shape mismatch");
    auto& pv = p.value();
    auto& pg = p.grad();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = state.momentum * v[j] + pg[j] + state.weight_decay * pv[j];
      pv[j] -= state.learning_rate * v[j];
    }
    p.zero_grad();
  }
}

}  // namespace amr
