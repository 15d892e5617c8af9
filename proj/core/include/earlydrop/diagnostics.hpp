// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "earlydrop/data.hpp"
#include "earlydrop/model.hpp"
#include "earlydrop/parameters.hpp"

namespace earlydrop {

/// Mini-batch gradients harvested at one frozen checkpoint.
struct GradientSet {
  std::vector<GradientVector> members;
  std::int64_t checkpoint = -1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return members.size(); }
};

/// 1/2 (1 - cos(a, b)), in [0, 1]. Throws ValidationError on a zero vector.
double cosine_distance(std::span<const double> a, std::span<const double> b);

/// Average pairwise cosine distance; needs at least two members.
double gdv(const GradientSet &set);
/// Average cosine distance from each member to `reference`.
double gde(const GradientSet &set, const GradientVector &reference);

double gradient_norm(std::span<const double> g);
double model_distance(std::span<const double> a, std::span<const double> b);

GradientVector mean_gradient(const GradientSet &set);
/// || mean(set) - reference ||. Nonzero in expectation once dropout is on.
double bias_norm(const GradientSet &set, const GradientVector &reference);

/// Trapezoidal area under (iteration, value) points from the first
/// iteration up to `window_end`; a segment crossing `window_end` is cut by
/// linear interpolation. Needs two points at or before `window_end`.
double gde_auc(std::span<const std::pair<std::int64_t, double>> series, std::int64_t window_end);

/// Work is split into chunks of `chunk_size` rows that may run on `threads`
/// workers; results are always reduced in chunk order.
struct EvalOptions {
  std::size_t chunk_size = 2048;
  std::size_t threads = 1;
  /// Rates in effect. Eval mode ignores the dropout rate, but stochastic
  /// depth scales block bodies by (1 - p_l).
  DropRates rates;
};

/// Gradient of the mean loss over all of `data`, with dropout and
/// stochastic depth in eval mode at `options.rates`.
GradientVector whole_dataset_gradient(const Model &model, const Dataset &data,
                                      const EvalOptions &options = {});

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
/// Eval-mode mean loss and top-1 accuracy over `data`.
EvalResult evaluate(const Model &model, const Dataset &data, const EvalOptions &options = {});

struct CollectOptions {
  std::size_t k = 8;
  std::size_t batch_size = 32;
  Mode mode = Mode::train;
  DropRates rates;
  std::uint64_t seed = 0;
  /// Identifies the checkpoint; keys both batch sampling and masks.
  std::int64_t checkpoint = 0;
  /// When non-empty, used instead of sampled batches (one per member).
  std::vector<std::vector<std::uint32_t>> batches;
  /// When set, every member replays these masks.
  const MaskSet *frozen_masks = nullptr;
  std::size_t threads = 1;
};

/// k gradients at the unmodified checkpoint, each on an independently drawn
/// batch (without replacement inside the batch). Train mode draws fresh
/// masks per member. Zero gradients are dropped with a warning.
GradientSet collect_minibatch_gradients(const Model &model, const Dataset &data,
                                        const CollectOptions &options);

/// When diagnostics are taken: every `dense_every` iterations up to
/// `dense_until`, then every `sparse_every`, never past `max_iteration`
/// (negative means unbounded).
struct DiagCadence {
  std::int64_t dense_every = 10;
  std::int64_t dense_until = 300;
  std::int64_t sparse_every = 100;
  std::int64_t max_iteration = -1;

  bool due(std::int64_t iteration) const;
};

struct DiagnosticsRecord {
  std::int64_t iteration = 0;
  double epoch = 0.0;
  double lr = 0.0;
  double drop_rate = 0.0;
  double train_loss = 0.0;
  double grad_norm = 0.0;
  double model_distance = 0.0;
  double gdv = 0.0;
  double gde = 0.0;
  double bias_norm = 0.0;
};

inline constexpr const char *kDiagnosticsHeader =
    "iteration,epoch,lr,drop_rate,train_loss,grad_norm,model_distance,gdv,gde,bias_norm";

/// Two directions and the losses on a square grid around a model.
/// losses[j * resolution + i] is the loss at (alpha_i, beta_j), with
/// coordinates evenly spaced over [-span, span].
struct LandscapeGrid {
  std::size_t resolution = 0;
  double span = 0.0;
  std::vector<double> direction_a;
  std::vector<double> direction_b;
  std::vector<double> losses;

  double coordinate(std::size_t i) const;
};

struct LandscapeConfig {
  std::size_t resolution = 11;
  double span = 1.0;
  std::uint64_t seed = 0;
  EvalOptions eval;
};

/// Mean |L(p) - L(q)| over horizontally and vertically adjacent grid cells.
/// Pairs touching a non-finite loss are skipped and reported in `warnings`.
double landscape_delta(const LandscapeGrid &grid, std::vector<std::string> *warnings = nullptr);

/// Grid of an arbitrary loss over (alpha, beta); directions stay empty.
LandscapeGrid evaluate_grid(const std::function<double(double, double)> &loss,
                            std::size_t resolution, double span);

/// Two random directions, normalized segment by segment to the norm of the
/// matching weights and then to unit length overall; eval-mode losses on
/// the grid.
struct LandscapeResult {
  LandscapeGrid grid;
  double delta = 0.0;
  std::vector<std::string> warnings;
};
LandscapeResult loss_landscape_delta(const Model &model, const Dataset &data,
                                     const LandscapeConfig &config);

/// Runs fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)> &fn);

} // namespace earlydrop
