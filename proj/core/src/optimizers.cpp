// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/optimizers.hpp"

#include <cmath>

#include "earlydrop/error.hpp"

namespace earlydrop {

const char *to_string(OptimizerKind k) {
  switch (k) {
  case OptimizerKind::sgd: return "sgd";
  case OptimizerKind::momentum_sgd: return "momentum_sgd";
  case OptimizerKind::adamw: return "adamw";
  }
  return "?";
}

OptimizerKind parse_optimizer_kind(const std::string &s) {
  for (auto k : {OptimizerKind::sgd, OptimizerKind::momentum_sgd, OptimizerKind::adamw})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown optimizer '" + s + "'");
}

void OptimizerHyper::validate() const {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be non-negative");
}

OptimizerState::OptimizerState(OptimizerHyper h, std::size_t n) : hyper(h) {
  hyper.validate();
  if (h.kind != OptimizerKind::sgd) first.assign(n, 0.0);
  if (h.kind == OptimizerKind::adamw) second.assign(n, 0.0);
}

namespace {

void check(std::span<const double> params, std::span<const double> grad,
           std::int64_t iteration) {
  if (params.size() != grad.size()) {
    throw ValidationError("gradient length " + std::to_string(grad.size()) +
                          " does not match " + std::to_string(params.size()) + " parameters");
  }
  for (double g : grad)
    if (!std::isfinite(g)) throw NonFiniteError("gradient is not finite", iteration);
}

void check_buffer(const std::vector<double> &buf, std::size_t n, const char *name) {
  if (buf.size() != n) {
    throw ValidationError(std::string(name) + " buffer holds " + std::to_string(buf.size()) +
                          " values for " + std::to_string(n) + " parameters");
  }
}

} // namespace

void sgd_step(std::span<double> params, std::span<const double> grad, double lr,
              double weight_decay, std::int64_t iteration) {
  check(params, grad, iteration);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double w = params[i];
    params[i] = w - lr * grad[i] - lr * weight_decay * w;
  }
}

void momentum_step(std::span<double> params, OptimizerState &state,
                   std::span<const double> grad, double lr, std::int64_t iteration) {
  check(params, grad, iteration);
  check_buffer(state.first, params.size(), "momentum");
  const double beta = state.hyper.momentum;
  const double wd = state.hyper.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double &v = state.first[i];
    v = beta * v + grad[i];
    const double w = params[i];
    params[i] = w - lr * v - lr * wd * w;
  }
  ++state.step_count;
}

void adamw_step(std::span<double> params, OptimizerState &state, std::span<const double> grad,
                double lr, std::int64_t iteration) {
  check(params, grad, iteration);
  check_buffer(state.first, params.size(), "first moment");
  check_buffer(state.second, params.size(), "second moment");
  const auto &h = state.hyper;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double &m = state.first[i];
    double &v = state.second[i];
    m = h.beta1 * m + (1.0 - h.beta1) * grad[i];
    v = h.beta2 * v + (1.0 - h.beta2) * grad[i] * grad[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    const double w = params[i];
    params[i] = w - lr * (m_hat / (std::sqrt(v_hat) + h.eps) + h.weight_decay * w);
  }
}

void optimizer_step(std::span<double> params, OptimizerState &state,
                    std::span<const double> grad, double lr, std::int64_t iteration) {
  switch (state.hyper.kind) {
  case OptimizerKind::sgd:
    sgd_step(params, grad, lr, state.hyper.weight_decay, iteration);
    ++state.step_count;
    return;
  case OptimizerKind::momentum_sgd: momentum_step(params, state, grad, lr, iteration); return;
  case OptimizerKind::adamw: adamw_step(params, state, grad, lr, iteration); return;
  }
}

void pack_optimizer_state(const OptimizerState &s, ParameterVector &out) {
  out.add_segment("optimizer.step_count", {1},
                  std::vector<double>{static_cast<double>(s.step_count)});
  if (!s.first.empty()) out.add_segment("optimizer.first", {s.first.size()}, s.first);
  if (!s.second.empty()) out.add_segment("optimizer.second", {s.second.size()}, s.second);
}

OptimizerState unpack_optimizer_state(const ParameterVector &in, const OptimizerHyper &hyper,
                                      std::size_t param_len) {
  OptimizerState s(hyper, param_len);
  s.step_count = static_cast<std::int64_t>(in.segment_values(in.find("optimizer.step_count"))[0]);
  auto load = [&](const char *name, std::vector<double> &buf) {
    if (buf.empty()) return;
    auto v = in.segment_values(in.find(name));
    if (v.size() != buf.size()) {
      throw ValidationError(std::string(name) + " in checkpoint has wrong length");
    }
    buf.assign(v.begin(), v.end());
  };
  load("optimizer.first", s.first);
  load("optimizer.second", s.second);
  return s;
}

} // namespace earlydrop
