#include "cosmic/cells.hpp"

#include <cmath>

namespace cosmic {

GruParams::GruParams(std::size_t hidden, std::size_t input)
    : input_weights({3 * hidden, input}),
      hidden_weights({3 * hidden, hidden}),
      biases({1, 3 * hidden}) {}

void GruParams::validate() const {
  const std::size_t h = hidden_weights.cols();
  require_shape(hidden_weights, {3 * h, h}, "gru hidden_weights");
  require_shape(input_weights, {3 * h, input_weights.cols()}, "gru input_weights");
  require_shape(biases, {1, 3 * h}, "gru biases");
}

LinearParams::LinearParams(std::size_t out, std::size_t in) : weight({out, in}), bias({1, out}) {}

void LinearParams::validate() const { require_shape(bias, {1, weight.rows()}, "linear bias"); }

namespace {

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
}

}  // namespace

void init_uniform(GruParams& p, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.hidden_size()));
  fill_uniform(p.input_weights, bound, rng);
  fill_uniform(p.hidden_weights, bound, rng);
  fill_uniform(p.biases, bound, rng);
}

void init_uniform(LinearParams& p, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.in_size()));
  fill_uniform(p.weight, bound, rng);
  fill_uniform(p.bias, bound, rng);
}

BoundGru bind(ad::Tape& tape, GruParams& p) {
  p.validate();
  const std::size_t h = p.hidden_size();
  const ad::Var u = tape.parameter(p.hidden_weights);
  return BoundGru{tape.parameter(p.input_weights), ad::slice_rows(u, 0, 2 * h),
                  ad::slice_rows(u, 2 * h, h), tape.parameter(p.biases), h, p.input_size()};
}

BoundLinear bind(ad::Tape& tape, LinearParams& p) {
  p.validate();
  return BoundLinear{tape.parameter(p.weight), tape.parameter(p.bias)};
}

BoundGru bind_frozen(ad::Tape& tape, const GruParams& p) {
  p.validate();
  const std::size_t h = p.hidden_size();
  const ad::Var u = tape.alias(p.hidden_weights);
  return BoundGru{tape.alias(p.input_weights), ad::slice_rows(u, 0, 2 * h),
                  ad::slice_rows(u, 2 * h, h), tape.alias(p.biases), h, p.input_size()};
}

BoundLinear bind_frozen(ad::Tape& tape, const LinearParams& p) {
  p.validate();
  return BoundLinear{tape.alias(p.weight), tape.alias(p.bias)};
}

ad::Var gru_step(const BoundGru& cell, ad::Var h_prev, ad::Var input) {
  const std::size_t h = cell.hidden;
  if (h_prev.shape() != Shape{1, h}) {
    throw DimensionError("gru_step: hidden state " + to_string(h_prev.shape()) + ", expected " +
                         to_string(Shape{1, h}));
  }
  if (input.shape() != Shape{1, cell.input}) {
    throw DimensionError("gru_step: input " + to_string(input.shape()) + ", expected " +
                         to_string(Shape{1, cell.input}));
  }
  const ad::Var from_input = ad::add(ad::matmul_nt(input, cell.input_weights), cell.biases);
  const ad::Var from_hidden = ad::matmul_nt(h_prev, cell.hidden_gates);

  const ad::Var z = ad::sigmoid(ad::add(ad::slice_cols(from_input, 0, h), ad::slice_cols(from_hidden, 0, h)));
  const ad::Var r = ad::sigmoid(ad::add(ad::slice_cols(from_input, h, h), ad::slice_cols(from_hidden, h, h)));
  const ad::Var candidate = ad::tanh(ad::add(ad::slice_cols(from_input, 2 * h, h),
                                             ad::matmul_nt(ad::mul(r, h_prev), cell.hidden_candidate)));
  return ad::add(h_prev, ad::mul(z, ad::sub(candidate, h_prev)));
}

ad::Var linear(const BoundLinear& layer, ad::Var x) {
  return ad::add(ad::matmul_nt(x, layer.weight), layer.bias);
}

AttentionResult soft_attention_cached(std::span<const ad::Var> values,
                                      std::span<const ad::Var> keys, ad::Var query) {
  if (values.empty()) throw UsageError("soft_attention: empty history");
  if (values.size() != keys.size()) throw UsageError("soft_attention: keys and values differ in length");
  const ad::Var scores = ad::matmul_nt(query, ad::stack_rows(keys));  // 1 × n
  const ad::Var weights = ad::softmax(scores);
  return {ad::matmul(weights, ad::stack_rows(values)), weights};
}

AttentionResult soft_attention(std::span<const ad::Var> history, ad::Var query,
                               const BoundLinear& proj) {
  if (history.empty()) throw UsageError("soft_attention: empty history");
  std::vector<ad::Var> keys;
  keys.reserve(history.size());
  for (const ad::Var& c : history) keys.push_back(ad::tanh(linear(proj, c)));
  return soft_attention_cached(history, keys, query);
}

ad::Var dropout(ad::Var x, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw UsageError("dropout rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  for (double& m : mask.data()) m = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  return ad::mul(x, x.tape()->constant(std::move(mask)));
}

}  // namespace cosmic
