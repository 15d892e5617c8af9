// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "earlydrop/error.hpp"

namespace earlydrop {

const char *to_string(DropStrategy s) {
  switch (s) {
  case DropStrategy::none: return "none";
  case DropStrategy::standard: return "standard";
  case DropStrategy::early: return "early";
  case DropStrategy::late: return "late";
  case DropStrategy::increasing: return "increasing";
  case DropStrategy::decreasing: return "decreasing";
  case DropStrategy::annealed: return "annealed";
  case DropStrategy::curriculum: return "curriculum";
  }
  return "?";
}

const char *to_string(DropShape s) {
  switch (s) {
  case DropShape::constant: return "constant";
  case DropShape::linear: return "linear";
  case DropShape::cosine: return "cosine";
  case DropShape::exponential: return "exponential";
  }
  return "?";
}

const char *to_string(DropTarget t) {
  return t == DropTarget::dropout ? "dropout" : "stochastic_depth";
}

const char *to_string(LrDecay d) { return d == LrDecay::cosine ? "cosine" : "constant"; }

DropStrategy parse_drop_strategy(const std::string &s) {
  for (auto v : {DropStrategy::none, DropStrategy::standard, DropStrategy::early,
                 DropStrategy::late, DropStrategy::increasing, DropStrategy::decreasing,
                 DropStrategy::annealed, DropStrategy::curriculum})
    if (s == to_string(v)) return v;
  throw ValidationError("unknown drop strategy '" + s + "'");
}

DropShape parse_drop_shape(const std::string &s) {
  for (auto v : {DropShape::constant, DropShape::linear, DropShape::cosine, DropShape::exponential})
    if (s == to_string(v)) return v;
  throw ValidationError("unknown drop shape '" + s + "'");
}

DropTarget parse_drop_target(const std::string &s) {
  if (s == "dropout") return DropTarget::dropout;
  if (s == "stochastic_depth") return DropTarget::stochastic_depth;
  throw ValidationError("unknown drop target '" + s + "'");
}

LrDecay parse_lr_decay(const std::string &s) {
  if (s == "cosine") return LrDecay::cosine;
  if (s == "constant") return LrDecay::constant;
  throw ValidationError("unknown lr decay '" + s + "'");
}

ScheduleReport validate_schedule(const DropSchedule &s, double total_epochs) {
  ScheduleReport r;
  if (!(s.rate >= 0.0 && s.rate < 1.0))
    r.errors.push_back("drop rate must lie in [0, 1), got " + std::to_string(s.rate));
  if (!(total_epochs > 0.0)) r.errors.push_back("total epochs must be positive");
  if (!(s.window_epochs >= 0.0))
    r.errors.push_back("window_epochs must be non-negative");
  if (s.window_epochs > total_epochs) {
    r.errors.push_back("window of " + std::to_string(s.window_epochs) +
                       " epochs exceeds training length of " + std::to_string(total_epochs));
  }
  const bool needs_curvature =
      s.shape == DropShape::exponential || s.strategy == DropStrategy::curriculum;
  if (needs_curvature && !(s.curvature && *s.curvature > 0.0))
    r.errors.push_back("exponential shape requires a positive curvature");

  switch (s.strategy) {
  case DropStrategy::none:
  case DropStrategy::standard:
    break;
  case DropStrategy::early:
    if (s.window_epochs <= 0.0) r.errors.push_back("early strategy needs window_epochs > 0");
    break;
  case DropStrategy::late:
    if (s.shape != DropShape::constant)
      r.errors.push_back("late strategy supports the constant shape only");
    break;
  case DropStrategy::increasing:
  case DropStrategy::decreasing:
    if (s.shape == DropShape::constant)
      r.errors.push_back(std::string(to_string(s.strategy)) + " strategy cannot be constant");
    break;
  case DropStrategy::annealed:
    if (s.shape != DropShape::linear)
      r.errors.push_back("annealed strategy supports the linear shape only");
    break;
  case DropStrategy::curriculum:
    if (s.shape != DropShape::exponential)
      r.errors.push_back("curriculum strategy supports the exponential shape only");
    break;
  }

  if ((s.strategy == DropStrategy::early || s.strategy == DropStrategy::late) &&
      total_epochs > 0.0 && s.window_epochs > 0.0) {
    const double frac = s.window_epochs / total_epochs;
    if (frac < 0.01 || frac > 0.5) {
      r.warnings.push_back("window covers " + std::to_string(100.0 * frac) +
                           "% of training, outside the usual 1%-50% range");
    }
  }
  return r;
}

namespace {

// Fraction of the peak rate left after progress u in [0, 1] of a decay.
double decay_fraction(DropShape shape, double u, std::optional<double> curvature) {
  switch (shape) {
  case DropShape::constant: return 1.0;
  case DropShape::linear: return 1.0 - u;
  case DropShape::cosine: return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
  case DropShape::exponential: {
    const double c = *curvature;
    const double floor = std::exp(-c);
    return (std::exp(-c * u) - floor) / (1.0 - floor);
  }
  }
  return 0.0;
}

} // namespace

double drop_rate_at(const DropSchedule &s, double epoch, double total_epochs) {
  const ScheduleReport report = validate_schedule(s, total_epochs);
  if (!report.ok()) throw ValidationError(report.errors.front());

  const double t = std::clamp(epoch, 0.0, total_epochs);
  const double p = s.rate;
  switch (s.strategy) {
  case DropStrategy::none: return 0.0;
  case DropStrategy::standard: return p;
  case DropStrategy::early:
    if (t >= s.window_epochs) return 0.0;
    return p * decay_fraction(s.shape, t / s.window_epochs, s.curvature);
  case DropStrategy::late: return t < s.window_epochs ? 0.0 : p;
  case DropStrategy::decreasing:
  case DropStrategy::annealed:
    return p * decay_fraction(s.shape, t / total_epochs, s.curvature);
  case DropStrategy::increasing: {
    DropSchedule mirror = s;
    mirror.strategy = DropStrategy::decreasing;
    return drop_rate_at(mirror, total_epochs - t, total_epochs);
  }
  case DropStrategy::curriculum:
    return p * (1.0 - std::exp(-*s.curvature * t / total_epochs));
  }
  return 0.0;
}

double LrConfig::effective_base() const {
  return base_lr * static_cast<double>(batch) / static_cast<double>(reference_batch);
}

void LrConfig::validate() const {
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr))
    throw ValidationError("learning rate must be non-negative");
  if (!(total_epochs > 0.0)) throw ValidationError("total_epochs must be positive");
  if (!(warmup_epochs >= 0.0) || warmup_epochs > total_epochs)
    throw ValidationError("warmup_epochs must lie in [0, total_epochs]");
  if (reference_batch == 0 || batch == 0)
    throw ValidationError("batch sizes must be positive");
}

double lr_at(const LrConfig &c, std::int64_t it, std::int64_t iterations_per_epoch) {
  const double eff = c.effective_base();
  const double ipe = static_cast<double>(iterations_per_epoch);
  const double warmup = std::round(c.warmup_epochs * ipe);
  const double total = std::round(c.total_epochs * ipe);
  const double i = static_cast<double>(it);
  if (i < warmup) return eff * i / warmup;
  if (c.decay == LrDecay::constant) return eff;
  const double span = total - warmup;
  if (span <= 0.0) return eff;
  const double u = std::min((i - warmup) / span, 1.0);
  return eff * 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

} // namespace earlydrop
