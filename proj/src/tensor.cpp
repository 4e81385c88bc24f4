#include "cosmic/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace cosmic {

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(shape.size(), fill) {
  if (shape.rows == 0 || shape.cols == 0) {
    throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (shape.rows == 0 || shape.cols == 0) {
    throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
  if (data_.size() != shape.size()) {
    throw DimensionError("payload of " + std::to_string(data_.size()) +
                         " values does not fill " + to_string(shape));
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::row(std::initializer_list<double> values) {
  return row(std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> flat;
  flat.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(flat));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::span<double> Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

std::span<const double> Tensor::grad() const {
  if (grad_.size() != data_.size()) throw UsageError("tensor has no gradient slot");
  return grad_;
}

void Tensor::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
}

void require_shape(const Tensor& t, Shape expected, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(what) + ": expected " + to_string(expected) + ", got " +
                         to_string(t.shape()));
  }
}

}  // namespace cosmic
