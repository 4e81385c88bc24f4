#include "cosmic/adam.hpp"

#include <cmath>

namespace cosmic {

AdamState make_adam_state(std::span<Tensor* const> params, const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw UsageError("adam: learning rate must be positive");
  AdamState s;
  s.config = config;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->size(), 0.0);
    s.v.emplace_back(p->size(), 0.0);
  }
  return s;
}

void adam_update(std::span<Tensor* const> params, AdamState& state) {
  if (params.size() != state.m.size()) throw DimensionError("adam: parameter list does not match state");
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    if (p.size() != state.m[k].size()) throw DimensionError("adam: parameter shape changed");
    auto g = p.grad();
    auto w = p.data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      w[i] -= c.lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + c.eps);
    }
  }
}

double clip_grad_norm(std::span<Tensor* const> params, double max_norm) {
  double sq = 0.0;
  for (Tensor* p : params)
    for (double g : p->grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor* p : params)
      for (double& g : p->grad()) g *= factor;
  }
  return norm;
}

}  // namespace cosmic
