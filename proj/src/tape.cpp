#include "cosmic/tape.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "cosmic/kernels.hpp"

namespace cosmic::ad {

namespace {

std::atomic<bool> g_fault{false};

Tape* same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid()) throw UsageError(std::string(op) + ": unbound variable");
  if (a.tape() != b.tape()) throw UsageError(std::string(op) + ": operands live on different tapes");
  return a.tape();
}

Tape* tape_of(Var a, const char* op) {
  if (!a.valid()) throw UsageError(std::string(op) + ": unbound variable");
  return a.tape();
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

void require_row(Var a, const char* op) {
  if (a.shape().rows != 1) {
    throw DimensionError(std::string(op) + ": expected a row vector, got " + to_string(a.shape()));
  }
}

Var finish(Tape& tape, Tensor value, std::span<const Var> inputs, Tape::BackwardFn fn,
           const char* op) {
  require_finite(value, op);
  return tape.record(std::move(value), inputs, std::move(fn));
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("unbound variable");
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::alias(const Tensor& value) {
  Node node;
  node.external = &value;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor& param) {
  if (auto it = param_ids_.find(&param); it != param_ids_.end()) return Var(this, it->second);
  Node node;
  node.external = &param;
  node.param = &param;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  param_ids_.emplace(&param, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

void Tape::redirect(const Tensor& param, std::span<double> sink) {
  if (sink.size() != param.size()) throw DimensionError("gradient sink size mismatch");
  redirects_[&param] = sink;
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.value;
}

std::span<double> Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

std::span<const double> Tape::grad_of(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) throw UsageError("no gradient recorded for this variable");
  return n.grad;
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node node;
  node.value = std::move(value);
  for (const Var& in : inputs) {
    if (in.tape() != this) throw UsageError("input recorded on another tape");
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw UsageError("backward: loss is not on this tape");
  if (value(loss.id()).size() != 1) {
    throw UsageError("backward: loss must be a scalar, got " + to_string(value(loss.id()).shape()));
  }
  if (backward_done_) throw UsageError("backward: tape already consumed");
  backward_done_ = true;

  grad(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, id);
    } else if (n.param) {
      std::span<double> sink;
      if (auto it = redirects_.find(n.param); it != redirects_.end()) {
        sink = it->second;
      } else {
        sink = n.param->grad();
      }
      for (std::size_t i = 0; i < sink.size(); ++i) sink[i] += n.grad[i];
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = *same_tape(a, b, "matmul");
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.rows) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(sa) + " x " + to_string(sb));
  }
  Tensor out({sa.rows, sb.cols});
  kernels::matmul_nn(a.value().data(), b.value().data(), out.data(), {sa.rows, sb.cols, sa.cols});
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return finish(t, std::move(out), in, [ia, ib, sa, sb](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    if (tp.requires_grad(ia))  // dA = dC · Bᵀ
      kernels::matmul_nt(g, tp.value(ib).data(), tp.grad(ia), {sa.rows, sa.cols, sb.cols});
    if (tp.requires_grad(ib))  // dB = Aᵀ · dC
      kernels::matmul_tn(tp.value(ia).data(), g, tp.grad(ib), {sb.rows, sb.cols, sa.rows});
  }, "matmul");
}

Var matmul_nt(Var a, Var b) {
  Tape& t = *same_tape(a, b, "matmul_nt");
  const Shape sa = a.shape(), sb = b.shape();
  if (sa.cols != sb.cols) {
    throw DimensionError("matmul_nt: inner dimensions differ, " + to_string(sa) + " x " +
                         to_string(sb) + "ᵀ");
  }
  Tensor out({sa.rows, sb.rows});
  kernels::matmul_nt(a.value().data(), b.value().data(), out.data(), {sa.rows, sb.rows, sa.cols});
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return finish(t, std::move(out), in, [ia, ib, sa, sb](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);  // C = A Bᵀ, C is m×n with n = sb.rows
    if (tp.requires_grad(ia))  // dA = dC · B
      kernels::matmul_nn(g, tp.value(ib).data(), tp.grad(ia), {sa.rows, sa.cols, sb.rows});
    if (tp.requires_grad(ib))  // dB = dCᵀ · A
      kernels::matmul_tn(g, tp.value(ia).data(), tp.grad(ib), {sb.rows, sb.cols, sa.rows});
  }, "matmul_nt");
}

Var add(Var a, Var b) {
  Tape& t = *same_tape(a, b, "add");
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.drop_grad();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return finish(t, std::move(out), in, [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    for (std::size_t id : {ia, ib}) {
      if (!tp.requires_grad(id)) continue;
      auto gi = tp.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& t = *same_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  out.drop_grad();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return finish(t, std::move(out), in, [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      auto ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      auto gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  }, "sub");
}

Var mul(Var a, Var b) {
  Tape& t = *same_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  out.drop_grad();
  const auto bv = b.value().data();
  auto ov = out.data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  const Var in[] = {a, b};
  return finish(t, std::move(out), in, [ia, ib](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    const auto av = tp.value(ia).data();
    const auto bv = tp.value(ib).data();
    if (tp.requires_grad(ia)) {
      auto ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      auto gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  }, "mul");
}

Var scale(Var a, double factor) {
  Tape& t = *tape_of(a, "scale");
  Tensor out = a.value();
  out.drop_grad();
  for (double& v : out.data()) v *= factor;
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return finish(t, std::move(out), in, [ia, factor](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  }, "scale");
}

Var tanh(Var a) {
  Tape& t = *tape_of(a, "tanh");
  Tensor out = a.value();
  out.drop_grad();
  for (double& v : out.data()) v = std::tanh(v);
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return finish(t, std::move(out), in, [ia](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    const auto y = tp.value(self).data();
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  }, "tanh");
}

Var sigmoid(Var a) {
  Tape& t = *tape_of(a, "sigmoid");
  Tensor out = a.value();
  out.drop_grad();
  for (double& v : out.data()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return finish(t, std::move(out), in, [ia](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    const auto y = tp.value(self).data();
    auto ga = tp.grad(ia);
    const bool fault = debug::backward_fault_injected();
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * (fault ? y[i] : y[i] * (1.0 - y[i]));
    }
  }, "sigmoid");
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat: empty part list");
  Tape& t = *tape_of(parts.front(), "concat");
  std::size_t width = 0;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw UsageError("concat: operands live on different tapes");
    require_row(p, "concat");
    width += p.shape().cols;
  }
  Tensor out({1, width});
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const auto v = p.value().data();
    std::copy(v.begin(), v.end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.size();
  }
  return finish(t, std::move(out), parts,
                [ids = std::move(ids), offsets = std::move(offsets)](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      auto gi = tp.grad(ids[k]);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offsets[k] + i];
    }
  }, "concat");
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *tape_of(a, "slice_cols");
  require_row(a, "slice_cols");
  if (count == 0 || begin + count > a.shape().cols) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + to_string(a.shape()));
  }
  const auto v = a.value().data();
  Tensor out = Tensor::row(std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                               v.begin() + static_cast<std::ptrdiff_t>(begin + count)));
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return finish(t, std::move(out), in, [ia, begin](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin + i] += g[i];
  }, "slice_cols");
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *tape_of(a, "slice_rows");
  const Shape sa = a.shape();
  if (count == 0 || begin + count > sa.rows) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + to_string(sa));
  }
  const auto v = a.value().data();
  const auto first = v.begin() + static_cast<std::ptrdiff_t>(begin * sa.cols);
  Tensor out({count, sa.cols}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * sa.cols)));
  const std::size_t ia = a.id();
  const std::size_t offset = begin * sa.cols;
  const Var in[] = {a};
  return finish(t, std::move(out), in, [ia, offset](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  }, "slice_rows");
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw UsageError("stack_rows: empty row list");
  Tape& t = *tape_of(rows.front(), "stack_rows");
  const std::size_t width = rows.front().shape().cols;
  Tensor out({rows.size(), width});
  std::vector<std::size_t> ids;
  ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].tape() != &t) throw UsageError("stack_rows: operands live on different tapes");
    if (rows[r].shape() != Shape{1, width}) {
      throw DimensionError("stack_rows: row " + std::to_string(r) + " has shape " +
                           to_string(rows[r].shape()) + ", expected " + to_string(Shape{1, width}));
    }
    const auto v = rows[r].value().data();
    std::copy(v.begin(), v.end(), out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
    ids.push_back(rows[r].id());
  }
  return finish(t, std::move(out), rows, [ids = std::move(ids), width](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!tp.requires_grad(ids[r])) continue;
      auto gi = tp.grad(ids[r]);
      for (std::size_t i = 0; i < width; ++i) gi[i] += g[r * width + i];
    }
  }, "stack_rows");
}

Var softmax(Var a) {
  Tape& t = *tape_of(a, "softmax");
  require_row(a, "softmax");
  Tensor out = a.value();
  out.drop_grad();
  auto v = out.data();
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) total += (x = std::exp(x - mx));
  for (double& x : v) x /= total;
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return finish(t, std::move(out), in, [ia](Tape& tp, std::size_t self) {
    auto g = tp.grad(self);
    const auto y = tp.value(self).data();
    double dot = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * y[i];
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - dot);
  }, "softmax");
}

Var cross_entropy(Var logits, std::size_t label) {
  Tape& t = *tape_of(logits, "cross_entropy");
  require_row(logits, "cross_entropy");
  const auto z = logits.value().data();
  if (label >= z.size()) {
    throw UsageError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                     std::to_string(z.size()) + " classes");
  }
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double x : z) total += std::exp(x - mx);
  const double log_norm = mx + std::log(total);
  Tensor out({1, 1}, log_norm - z[label]);
  const std::size_t ia = logits.id();
  const Var in[] = {logits};
  return finish(t, std::move(out), in, [ia, label, log_norm](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    const auto z = tp.value(ia).data();
    auto ga = tp.grad(ia);
    for (std::size_t i = 0; i < z.size(); ++i) {
      ga[i] += g * (std::exp(z[i] - log_norm) - (i == label ? 1.0 : 0.0));
    }
  }, "cross_entropy");
}

Var sum(Var a) {
  Tape& t = *tape_of(a, "sum");
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  const std::size_t ia = a.id();
  const Var in[] = {a};
  return finish(t, Tensor({1, 1}, total), in, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& x : tp.grad(ia)) x += g;
  }, "sum");
}

namespace debug {
void inject_backward_fault(bool enabled) { g_fault.store(enabled); }
bool backward_fault_injected() { return g_fault.load(); }
}  // namespace debug

}  // namespace cosmic::ad
