// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "earlydrop/parameters.hpp"

namespace earlydrop {

enum class OptimizerKind { sgd, momentum_sgd, adamw };

struct OptimizerHyper {
  OptimizerKind kind = OptimizerKind::adamw;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled: applied as w -= lr * weight_decay * w for every kind.
  double weight_decay = 0.0;

  void validate() const;

  friend bool operator==(const OptimizerHyper &, const OptimizerHyper &) = default;
};

/// Optimizer buffers aligned with a ParameterVector. `first` is the
/// momentum buffer (momentum_sgd) or first moment (adamw); `second` is the
/// adamw second moment.
struct OptimizerState {
  OptimizerHyper hyper;
  std::vector<double> first;
  std::vector<double> second;
  std::int64_t step_count = 0;

  OptimizerState() = default;
  OptimizerState(OptimizerHyper h, std::size_t n);

  friend bool operator==(const OptimizerState &, const OptimizerState &) = default;
};

// Each step validates lengths and gradient finiteness before touching any
// state. `iteration` only labels errors.
void sgd_step(std::span<double> params, std::span<const double> grad, double lr,
              double weight_decay = 0.0, std::int64_t iteration = -1);
void momentum_step(std::span<double> params, OptimizerState &state,
                   std::span<const double> grad, double lr, std::int64_t iteration = -1);
void adamw_step(std::span<double> params, OptimizerState &state, std::span<const double> grad,
                double lr, std::int64_t iteration = -1);

/// Dispatches on state.hyper.kind.
void optimizer_step(std::span<double> params, OptimizerState &state,
                    std::span<const double> grad, double lr, std::int64_t iteration = -1);

/// Packs the state into named segments ("optimizer.first", ...) so it can
/// ride along in a checkpoint; unpack_optimizer_state() reverses it.
void pack_optimizer_state(const OptimizerState &state, ParameterVector &out);
OptimizerState unpack_optimizer_state(const ParameterVector &in, const OptimizerHyper &hyper,
                                      std::size_t param_len);

const char *to_string(OptimizerKind k);
OptimizerKind parse_optimizer_kind(const std::string &s);

} // namespace earlydrop
