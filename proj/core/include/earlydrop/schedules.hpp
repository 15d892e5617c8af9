// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace earlydrop {

enum class DropStrategy { none, standard, early, late, increasing, decreasing, annealed, curriculum };
enum class DropShape { constant, linear, cosine, exponential };
enum class DropTarget { dropout, stochastic_depth };

/// Drop rate as a function of training time.
///
/// `window_epochs` is the early-phase length for `early` (rate active before
/// it) and `late` (rate active from it on); other strategies ignore it.
/// `increasing`, `decreasing`, `annealed` and `curriculum` span all of
/// training. `annealed` is linear decreasing; `curriculum` approaches the
/// peak as p (1 - exp(-curvature t / T)).
struct DropSchedule {
  DropStrategy strategy = DropStrategy::none;
  DropShape shape = DropShape::linear;
  double rate = 0.0;
  double window_epochs = 0.0;
  std::optional<double> curvature;
  DropTarget target = DropTarget::dropout;
};

struct ScheduleReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return errors.empty(); }
};

ScheduleReport validate_schedule(const DropSchedule &schedule, double total_epochs);

/// Rate at training time `epoch` (fractional, global_iteration /
/// iterations_per_epoch) of a run lasting `total_epochs`. Pure; the result
/// lies in [0, rate]. Throws ValidationError for combinations that
/// validate_schedule() rejects.
double drop_rate_at(const DropSchedule &schedule, double epoch, double total_epochs);

enum class LrDecay { cosine, constant };

struct LrConfig {
  double base_lr = 1e-3;
  double warmup_epochs = 0.0;
  double total_epochs = 1.0;
  LrDecay decay = LrDecay::cosine;
  std::size_t reference_batch = 1;
  std::size_t batch = 1;

  /// base_lr * batch / reference_batch.
  double effective_base() const;
  void validate() const;
};

/// Linear warmup from 0 to the effective base lr, then cosine decay to 0 (or
/// constant) over the remaining iterations.
double lr_at(const LrConfig &config, std::int64_t global_iteration,
             std::int64_t iterations_per_epoch);

const char *to_string(DropStrategy s);
const char *to_string(DropShape s);
const char *to_string(DropTarget t);
const char *to_string(LrDecay d);
DropStrategy parse_drop_strategy(const std::string &s);
DropShape parse_drop_shape(const std::string &s);
DropTarget parse_drop_target(const std::string &s);
LrDecay parse_lr_decay(const std::string &s);

} // namespace earlydrop
