// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/parameters.hpp"

#include <cmath>

#include "earlydrop/error.hpp"

namespace earlydrop {

std::size_t ParameterVector::add_segment(std::string name, Shape shape,
                                         std::span<const double> values) {
  const std::size_t len = shape_size(shape);
  if (values.size() != len) {
    throw ValidationError("segment " + name + " expects " + std::to_string(len) +
                          " values, got " + std::to_string(values.size()));
  }
  segments_.push_back(Segment{std::move(name), std::move(shape), values_.size(), len});
  values_.insert(values_.end(), values.begin(), values.end());
  return segments_.size() - 1;
}

std::span<double> ParameterVector::segment_values(std::size_t i) {
  const Segment &s = segments_.at(i);
  return std::span<double>(values_).subspan(s.offset, s.length);
}

std::span<const double> ParameterVector::segment_values(std::size_t i) const {
  const Segment &s = segments_.at(i);
  return std::span<const double>(values_).subspan(s.offset, s.length);
}

Tensor ParameterVector::segment_tensor(std::size_t i) const {
  auto v = segment_values(i);
  return Tensor(segments_[i].shape, std::vector<double>(v.begin(), v.end()));
}

std::size_t ParameterVector::find(const std::string &name) const {
  for (std::size_t i = 0; i < segments_.size(); ++i)
    if (segments_[i].name == name) return i;
  throw ValidationError("no parameter segment named " + name);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("dot product of vectors with lengths " + std::to_string(a.size()) +
                          " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

} // namespace earlydrop
