#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "cosmic/tape.hpp"
#include "cosmic/tensor.hpp"

namespace cosmic {

// Gated recurrent unit parameters. Each weight/bias is split into three
// H-sized blocks, in this order: update gate z, reset gate r, candidate h̃.
//   z  = σ(W_z y + U_z h + b_z)
//   r  = σ(W_r y + U_r h + b_r)
//   h̃  = tanh(W_h y + U_h (r ⊙ h) + b_h)
//   h' = (1 − z) ⊙ h + z ⊙ h̃
struct GruParams {
  Tensor input_weights;   // 3H × I
  Tensor hidden_weights;  // 3H × H
  Tensor biases;          // 1 × 3H

  GruParams() = default;
  GruParams(std::size_t hidden, std::size_t input);

  std::size_t hidden_size() const { return hidden_weights.cols(); }
  std::size_t input_size() const { return input_weights.cols(); }
  void validate() const;
};

struct LinearParams {
  Tensor weight;  // out × in
  Tensor bias;    // 1 × out

  LinearParams() = default;
  LinearParams(std::size_t out, std::size_t in);

  std::size_t in_size() const { return weight.cols(); }
  std::size_t out_size() const { return weight.rows(); }
  void validate() const;
};

// Uniform in [-1/√fan, 1/√fan] where fan is the hidden size for GRUs and the
// input size for linear layers.
void init_uniform(GruParams& p, std::mt19937_64& rng);
void init_uniform(LinearParams& p, std::mt19937_64& rng);

// Parameters bound to a tape for one forward pass. Binding once per
// conversation avoids re-slicing the hidden weights at every step.
struct BoundGru {
  ad::Var input_weights;
  ad::Var hidden_gates;      // U_z, U_r stacked: 2H × H
  ad::Var hidden_candidate;  // U_h: H × H
  ad::Var biases;
  std::size_t hidden = 0;
  std::size_t input = 0;
};

struct BoundLinear {
  ad::Var weight;
  ad::Var bias;
};

// Trainable binding: gradients flow into the parameter tensors.
BoundGru bind(ad::Tape& tape, GruParams& p);
BoundLinear bind(ad::Tape& tape, LinearParams& p);
// Frozen binding for inference: parameters enter the tape as constants.
BoundGru bind_frozen(ad::Tape& tape, const GruParams& p);
BoundLinear bind_frozen(ad::Tape& tape, const LinearParams& p);

ad::Var gru_step(const BoundGru& cell, ad::Var h_prev, ad::Var input);
ad::Var linear(const BoundLinear& layer, ad::Var x);

struct AttentionResult {
  ad::Var pooled;   // 1 × D_c
  ad::Var weights;  // 1 × n
};

// Soft attention over `history` (n ≥ 1 row vectors c_i) scored against
// `query`: u_i = tanh(W c_i + b), α = softmax_i(u_i · query), a = Σ α_i c_i.
AttentionResult soft_attention(std::span<const ad::Var> history, ad::Var query,
                               const BoundLinear& proj);

// Same pooling with u_i precomputed. `keys` holds u_1..u_n, `values` c_1..c_n.
AttentionResult soft_attention_cached(std::span<const ad::Var> values,
                                      std::span<const ad::Var> keys, ad::Var query);

// Inverted dropout mask (kept units scaled by 1/(1-rate)) as a tape constant.
ad::Var dropout(ad::Var x, double rate, std::mt19937_64& rng);

}  // namespace cosmic
