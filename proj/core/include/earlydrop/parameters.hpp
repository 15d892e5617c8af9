// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "earlydrop/tensor.hpp"

namespace earlydrop {

struct Segment {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Segment &, const Segment &) = default;
};

/// Flattened model weights. Segment order is fixed at model construction and
/// identical across checkpoints of the same model.
class ParameterVector {
public:
  /// Appends a segment and returns its index.
  std::size_t add_segment(std::string name, Shape shape, std::span<const double> values);
  std::size_t add_segment(std::string name, const Tensor &t) {
    return add_segment(std::move(name), t.shape(), t.data());
  }

  const std::vector<Segment> &segments() const noexcept { return segments_; }
  std::size_t segment_count() const noexcept { return segments_.size(); }
  std::size_t total_len() const noexcept { return values_.size(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> segment_values(std::size_t i);
  std::span<const double> segment_values(std::size_t i) const;
  Tensor segment_tensor(std::size_t i) const;
  /// Index of the segment with this name; throws when absent.
  std::size_t find(const std::string &name) const;

  bool same_layout(const ParameterVector &other) const { return segments_ == other.segments_; }

  friend bool operator==(const ParameterVector &, const ParameterVector &) = default;

private:
  std::vector<Segment> segments_;
  std::vector<double> values_;
};

/// A gradient aligned index-for-index with a ParameterVector.
struct GradientVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const GradientVector &, const GradientVector &) = default;
};

double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

} // namespace earlydrop
