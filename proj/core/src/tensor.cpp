// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/tensor.hpp"

#include <cmath>

#include "earlydrop/error.hpp"

namespace earlydrop {

std::size_t shape_size(const Shape &shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_size(shape_) != values_.size()) {
    throw ValidationError("tensor shape " + shape_string(shape_) + " holds " +
                          std::to_string(shape_size(shape_)) + " values, got " +
                          std::to_string(values_.size()));
  }
}

std::size_t Tensor::rows() const noexcept {
  std::size_t n = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) n *= shape_[i];
  return n;
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

bool Tensor::all_finite() const noexcept {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

} // namespace earlydrop
