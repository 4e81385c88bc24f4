#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cosmic/tensor.hpp"

// Define-by-run reverse-mode differentiation. A Tape records every operation
// executed through the free functions below; backward() replays the record in
// reverse. One tape per conversation; tapes are not shared across threads.
namespace cosmic::ad {

class Tape;

// Handle to a value recorded on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Backward rule for node `self`: read grad(self), add into grad(inputs).
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that receives no gradient.
  Var constant(Tensor value);

  // Leaf that receives no gradient and references `value` without copying.
  // `value` must outlive the tape.
  Var alias(const Tensor& value);

  // Leaf bound to a trainable tensor. The tensor is referenced, not copied,
  // and must outlive the tape. Binding the same tensor twice returns the same
  // Var so gradients from every use land in one place.
  Var parameter(Tensor& param);

  // Send the gradient of `param` to `sink` instead of param.grad(). Lets
  // several tapes share read-only parameters on different threads.
  void redirect(const Tensor& param, std::span<double> sink);

  // Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients are added
  // to whatever their slots already hold.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  std::span<double> grad(std::size_t id);
  std::span<const double> grad_of(Var v) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Appends an operation result. `inputs` must already be on this tape.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;  // parameter leaves alias their tensor
    Tensor* param = nullptr;
    BackwardFn backward;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> param_ids_;
  std::unordered_map<const Tensor*, std::span<double>> redirects_;
  bool backward_done_ = false;
};

// All ops take Vars from the same tape and throw DimensionError on shape
// mismatch and NumericError if the result is not finite.
Var matmul(Var a, Var b);     // a[m×k] · b[k×n]
Var matmul_nt(Var a, Var b);  // a[m×k] · b[n×k]ᵀ
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var concat(std::span<const Var> parts);  // row vectors, left to right
Var concat(std::initializer_list<Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);  // row vector
Var slice_rows(Var a, std::size_t begin, std::size_t count);  // matrix rows
Var stack_rows(std::span<const Var> rows);                     // n row vectors -> n×d
Var softmax(Var a);                                            // row vector
Var cross_entropy(Var logits, std::size_t label);              // -> 1×1
Var sum(Var a);                                                // -> 1×1

namespace debug {
// Negative-control hook: when set, sigmoid's backward rule drops its
// (1 - s) factor. Gradient checks must then fail.
void inject_backward_fault(bool enabled);
bool backward_fault_injected();
}  // namespace debug

}  // namespace cosmic::ad
