// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "earlydrop/model.hpp"
#include "earlydrop/tensor.hpp"

namespace earlydrop {

enum class DatasetKind { gaussian_clusters, teacher_mlp };

/// Recipe for a synthetic classification dataset.
///
/// `noise` is the probability of flipping a training label to a different
/// class uniformly at random; test labels are never flipped.
/// gaussian_clusters draws x = mean[y] + cluster_std * N(0, I) with unit-norm
/// simplex class means scaled by `separation`. teacher_mlp draws x ~ N(0, I)
/// and labels each point by the argmax of a frozen random MLP of
/// `teacher_depth` hidden layers of width `teacher_hidden`; the teacher's
/// logits are standardized per class over the pool to keep classes balanced.
struct DatasetSpec {
  DatasetKind kind = DatasetKind::gaussian_clusters;
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
  std::size_t input_dim = 16;
  std::size_t n_classes = 4;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double separation = 4.0;
  double cluster_std = 1.0;
  std::size_t teacher_depth = 4;
  std::size_t teacher_hidden = 64;

  void validate() const;
};

struct Dataset {
  Tensor inputs; // [n, input_dim]
  std::vector<std::uint32_t> labels;
  std::size_t n_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t input_dim() const noexcept { return inputs.cols(); }

  friend bool operator==(const Dataset &, const Dataset &) = default;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// Deterministic in spec.seed. Throws ValidationError for degenerate specs
/// or when a class ends up absent from the training split.
DatasetPair generate(const DatasetSpec &spec);

/// Number of training labels that differ from the noiseless labels of the
/// same spec.
std::size_t count_flipped_labels(const DatasetSpec &spec, const Dataset &train);

/// Binary layout, little-endian:
///   "DDDS" | version u32 | n u64 | input_dim u64 | n_classes u64 |
///   inputs f64 x n*input_dim | labels u32 x n
inline constexpr std::uint32_t kDatasetVersion = 1;

std::string encode_dataset(const Dataset &d);
Dataset decode_dataset(std::string_view bytes);
void save_dataset(const Dataset &d, const std::string &path);
Dataset load_dataset(const std::string &path);

/// key=value lines describing a DatasetSpec.
std::string dataset_manifest(const DatasetSpec &spec);

/// Per-epoch permutation, a pure function of (seed, epoch).
std::vector<std::uint32_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                             std::uint64_t epoch);

/// Index batches covering every example exactly once; the final short batch
/// is kept.
std::vector<std::vector<std::uint32_t>> minibatch_indices(std::size_t n, std::size_t batch_size,
                                                          std::uint64_t seed,
                                                          std::uint64_t epoch);

/// Materializes the rows `indices` of `d`.
Batch gather(const Dataset &d, std::span<const std::uint32_t> indices);
/// Rows [begin, end).
Batch slice(const Dataset &d, std::size_t begin, std::size_t end);

const char *to_string(DatasetKind k);
DatasetKind parse_dataset_kind(const std::string &s);

} // namespace earlydrop
