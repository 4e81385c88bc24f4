#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cosmic/tensor.hpp"

namespace cosmic {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;  // first moments, one per parameter
  std::vector<std::vector<double>> v;  // second moments
  std::size_t step = 0;
};

AdamState make_adam_state(std::span<Tensor* const> params, const AdamConfig& config);

// One bias-corrected Adam step using each parameter's grad() slot:
//   m ← β1 m + (1 − β1) g,  v ← β2 v + (1 − β2) g²
//   p ← p − lr · m̂ / (√v̂ + ε),  m̂ = m / (1 − β1^t), v̂ = v / (1 − β2^t)
// Gradients are left in place.
void adam_update(std::span<Tensor* const> params, AdamState& state);

// Scales all gradients so their joint L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_grad_norm(std::span<Tensor* const> params, double max_norm);

}  // namespace cosmic
