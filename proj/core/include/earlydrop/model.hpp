// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlydrop/parameters.hpp"
#include "earlydrop/rng.hpp"
#include "earlydrop/tape.hpp"
#include "earlydrop/tensor.hpp"

namespace earlydrop {

enum class Family { mlp, residual_mlp };
enum class Activation { relu, gelu };
enum class Mode { train, eval };
/// Whether a stochastic-depth decision covers the whole batch or one row.
enum class DepthGranularity { per_batch, per_sample };

struct ModelConfig {
  Family family = Family::mlp;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t depth = 1;
  Activation activation = Activation::gelu;
  std::uint64_t init_seed = 0;
  /// Standard deviation of the truncated normal (cut at +-2 std) used for
  /// weight matrices. Biases start at zero, norm gains at one.
  double init_std = 0.02;
  DepthGranularity sd_granularity = DepthGranularity::per_batch;

  /// Throws ValidationError.
  void validate() const;
};

struct Batch {
  Tensor inputs; // [n, input_dim]
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// A stochastic site is one dropout layer or one stochastic-depth block.
struct Site {
  enum class Kind { dropout, depth };
  Kind kind;
  std::size_t layer;
  std::string name;
};

/// Masks indexed by site. Dropout masks have the activation's shape and hold
/// 0 or 1/(1-p); depth masks have shape [rows] and hold the per-row
/// multiplier of the block body (0 skips the block).
struct MaskSet {
  std::vector<std::optional<Tensor>> masks;
};

/// Drop rates in effect for one forward pass. `depth` is the maximum
/// stochastic-depth rate; block l uses sd_rate_for_layer(depth, l, L).
struct DropRates {
  double dropout = 0.0;
  double depth = 0.0;
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  DropRates rates;
  /// Base key for mask draws; site s draws from an independent fork of it.
  Rng rng;
  /// When set, masks are taken from here instead of being drawn.
  const MaskSet *replay = nullptr;
  /// When set, every mask applied is written here.
  MaskSet *record = nullptr;
  /// Attached to non-finite loss errors.
  std::int64_t iteration = -1;
};

/// Result of a forward pass: the loss plus the tape needed for backward.
class ForwardPass {
public:
  double loss() const { return tape_.value(loss_)[0]; }
  const Tensor &logits() const { return tape_.value(logits_); }
  const Tape &tape() const noexcept { return tape_; }

private:
  friend class Model;
  friend GradientVector backward(ForwardPass &pass);

  Tape tape_;
  Var loss_;
  Var logits_;
  std::vector<Var> params_;
  std::size_t param_len_ = 0;
};

/// Plain MLP or residual MLP.
///
/// mlp:          [linear -> act -> dropout] x depth -> linear head
/// residual_mlp: linear stem -> [x + sd(linear -> norm -> act -> dropout ->
///               linear)] x depth -> norm -> linear head
class Model {
public:
  /// Builds and initializes from `config.init_seed`.
  explicit Model(ModelConfig config);
  /// Adopts existing parameters; the layout must match the config.
  Model(ModelConfig config, ParameterVector params);

  const ModelConfig &config() const noexcept { return config_; }
  const ParameterVector &parameters() const noexcept { return params_; }
  ParameterVector &parameters() noexcept { return params_; }
  const std::vector<Site> &sites() const noexcept { return sites_; }

  ForwardPass forward(const Batch &batch, const ForwardOptions &options) const;
  /// Eval-mode logits.
  Tensor predict(const Tensor &inputs) const;

private:
  Var activation(Tape &tape, Var x) const;
  Var dropout_site(Tape &tape, Var x, std::size_t site, const ForwardOptions &o) const;

  ModelConfig config_;
  ParameterVector params_;
  std::vector<Site> sites_;
};

/// Layout of a freshly built model, without initialization cost concerns.
ParameterVector build_parameters(const ModelConfig &config);

/// Throws Error when the pass was already consumed.
GradientVector backward(ForwardPass &pass);

/// Central differences of an arbitrary loss; throws Error when two
/// evaluations at `at` disagree.
GradientVector finite_difference_gradient(
    const std::function<double(std::span<const double>)> &loss, std::span<const double> at,
    double eps);
/// Train-mode masks are drawn once and replayed for every perturbation.
GradientVector finite_difference_gradient(const Model &model, const Batch &batch,
                                          const ForwardOptions &options, double eps);

/// Linear depth rule: 0 at the first block, p_max at the last.
double sd_rate_for_layer(double p_max, std::size_t layer_index, std::size_t depth);

/// Inverted dropout mask: each element 0 with probability p, else 1/(1-p).
Tensor dropout_mask(const Shape &shape, double p, Rng &rng);
Tensor dropout_forward(const Tensor &x, double p, Mode mode, Rng &rng);

/// Per-row body multipliers for a stochastic-depth block in train mode: 0
/// (skip) with probability p, else 1. per_batch draws once for all rows.
Tensor depth_keep_mask(std::size_t rows, double p, DepthGranularity granularity, Rng &rng);

/// Residual wrapper on a tape. Train mode skips the body with probability
/// p; eval mode returns x + (1-p) body(x). A batch whose rows are all
/// skipped returns x itself without evaluating the body.
Var stochastic_depth(Tape &tape, Var x, const std::function<Var(Tape &, Var)> &body, double p,
                     DepthGranularity granularity, Mode mode, Rng &rng,
                     const Tensor *replay = nullptr, Tensor *record = nullptr);

/// Tensor-level convenience around stochastic_depth().
Tensor stochastic_depth_forward(const std::function<Tensor(const Tensor &)> &body,
                                const Tensor &x, double p, DepthGranularity granularity,
                                Mode mode, Rng &rng);

const char *to_string(Family f);
const char *to_string(Activation a);
const char *to_string(DepthGranularity g);

} // namespace earlydrop
