// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/config.hpp"

#include <algorithm>

#include "earlydrop/error.hpp"

namespace earlydrop {

const std::vector<std::string> &known_config_keys() {
  static const std::vector<std::string> keys = {
      "run.name",
      "model.family", "model.hidden_dim", "model.depth", "model.activation", "model.init_std",
      "model.sd_granularity",
      "data.kind", "data.n_train", "data.n_test", "data.input_dim", "data.n_classes",
      "data.noise", "data.seed", "data.separation", "data.cluster_std", "data.teacher_depth",
      "data.teacher_hidden", "data.train_path", "data.test_path",
      "opt.kind", "opt.lr", "opt.momentum", "opt.beta1", "opt.beta2", "opt.eps",
      "opt.weight_decay",
      "lr.warmup_epochs", "lr.decay", "lr.reference_batch",
      "drop.strategy", "drop.shape", "drop.rate", "drop.window_epochs", "drop.curvature",
      "drop.target",
      "train.epochs", "train.batch_size", "train.seed", "train.checkpoint_epochs",
      "train.eval_every",
      "diag.enabled", "diag.k", "diag.batch_size", "diag.dense_every", "diag.dense_until",
      "diag.sparse_every", "diag.max_iteration", "diag.auc_window", "diag.chunk_size",
      // Read by the landscape and plot subcommands only.
      "landscape.resolution", "landscape.span", "landscape.seed",
      "plot.x", "plot.y", "plot.title",
  };
  return keys;
}

namespace {

bool known(const std::string &key) {
  const auto &k = known_config_keys();
  return std::find(k.begin(), k.end(), key) != k.end();
}

std::size_t to_size(const std::string &v, const std::string &key) {
  const long long x = parse_int(v, key);
  if (x < 0) throw ValidationError(key + " must be non-negative");
  return static_cast<std::size_t>(x);
}

Family parse_family(const std::string &s) {
  if (s == "mlp") return Family::mlp;
  if (s == "residual_mlp") return Family::residual_mlp;
  throw ValidationError("unknown model family '" + s + "'");
}

Activation parse_activation(const std::string &s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw ValidationError("unknown activation '" + s + "'");
}

DepthGranularity parse_granularity(const std::string &s) {
  if (s == "per_batch") return DepthGranularity::per_batch;
  if (s == "per_sample") return DepthGranularity::per_sample;
  throw ValidationError("unknown stochastic depth granularity '" + s + "'");
}

std::string join(const std::vector<std::size_t> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

} // namespace

void apply_override(KeyValues &kv, const std::string &key, const std::string &value) {
  if (!known(key)) throw ValidationError("unknown config key '" + key + "'");
  kv.set(key, value);
}

ExperimentConfig ExperimentConfig::from_keys(const KeyValues &kv) {
  for (const auto &[k, v] : kv.items())
    if (!known(k)) throw ValidationError("unknown config key '" + k + "'");

  ExperimentConfig c;
  auto str = [&](const char *key, auto &&apply) {
    if (auto v = kv.get(key)) apply(*v, std::string(key));
  };
  str("run.name", [&](const std::string &v, auto) { c.name = v; });

  str("model.family", [&](const std::string &v, auto) { c.model.family = parse_family(v); });
  str("model.hidden_dim", [&](const auto &v, const auto &k) { c.model.hidden_dim = to_size(v, k); });
  str("model.depth", [&](const auto &v, const auto &k) { c.model.depth = to_size(v, k); });
  str("model.activation", [&](const std::string &v, auto) { c.model.activation = parse_activation(v); });
  str("model.init_std", [&](const auto &v, const auto &k) { c.model.init_std = parse_double(v, k); });
  str("model.sd_granularity",
      [&](const std::string &v, auto) { c.model.sd_granularity = parse_granularity(v); });

  str("data.kind", [&](const std::string &v, auto) { c.data.kind = parse_dataset_kind(v); });
  str("data.n_train", [&](const auto &v, const auto &k) { c.data.n_train = to_size(v, k); });
  str("data.n_test", [&](const auto &v, const auto &k) { c.data.n_test = to_size(v, k); });
  str("data.input_dim", [&](const auto &v, const auto &k) { c.data.input_dim = to_size(v, k); });
  str("data.n_classes", [&](const auto &v, const auto &k) { c.data.n_classes = to_size(v, k); });
  str("data.noise", [&](const auto &v, const auto &k) { c.data.noise = parse_double(v, k); });
  str("data.seed", [&](const auto &v, const auto &k) { c.data.seed = to_size(v, k); });
  str("data.separation", [&](const auto &v, const auto &k) { c.data.separation = parse_double(v, k); });
  str("data.cluster_std", [&](const auto &v, const auto &k) { c.data.cluster_std = parse_double(v, k); });
  str("data.teacher_depth", [&](const auto &v, const auto &k) { c.data.teacher_depth = to_size(v, k); });
  str("data.teacher_hidden", [&](const auto &v, const auto &k) { c.data.teacher_hidden = to_size(v, k); });
  str("data.train_path", [&](const std::string &v, auto) { c.train_path = v; });
  str("data.test_path", [&](const std::string &v, auto) { c.test_path = v; });

  str("opt.kind", [&](const std::string &v, auto) { c.opt.kind = parse_optimizer_kind(v); });
  str("opt.lr", [&](const auto &v, const auto &k) { c.lr = parse_double(v, k); });
  str("opt.momentum", [&](const auto &v, const auto &k) { c.opt.momentum = parse_double(v, k); });
  str("opt.beta1", [&](const auto &v, const auto &k) { c.opt.beta1 = parse_double(v, k); });
  str("opt.beta2", [&](const auto &v, const auto &k) { c.opt.beta2 = parse_double(v, k); });
  str("opt.eps", [&](const auto &v, const auto &k) { c.opt.eps = parse_double(v, k); });
  str("opt.weight_decay", [&](const auto &v, const auto &k) { c.opt.weight_decay = parse_double(v, k); });

  str("lr.warmup_epochs", [&](const auto &v, const auto &k) { c.warmup_epochs = parse_double(v, k); });
  str("lr.decay", [&](const std::string &v, auto) { c.lr_decay = parse_lr_decay(v); });
  str("lr.reference_batch", [&](const auto &v, const auto &k) { c.reference_batch = to_size(v, k); });

  str("drop.strategy", [&](const std::string &v, auto) { c.drop.strategy = parse_drop_strategy(v); });
  // Without an explicit shape, each strategy gets the one it supports.
  if (!kv.has("drop.shape")) {
    switch (c.drop.strategy) {
    case DropStrategy::none:
    case DropStrategy::standard:
    case DropStrategy::late: c.drop.shape = DropShape::constant; break;
    case DropStrategy::curriculum: c.drop.shape = DropShape::exponential; break;
    default: c.drop.shape = DropShape::linear;
    }
  }
  str("drop.shape", [&](const std::string &v, auto) { c.drop.shape = parse_drop_shape(v); });
  str("drop.rate", [&](const auto &v, const auto &k) { c.drop.rate = parse_double(v, k); });
  str("drop.window_epochs", [&](const auto &v, const auto &k) { c.drop.window_epochs = parse_double(v, k); });
  str("drop.curvature", [&](const std::string &v, const std::string &k) {
    if (!v.empty() && v != "none") c.drop.curvature = parse_double(v, k);
  });
  str("drop.target", [&](const std::string &v, auto) { c.drop.target = parse_drop_target(v); });

  str("train.epochs", [&](const auto &v, const auto &k) { c.epochs = to_size(v, k); });
  str("train.batch_size", [&](const auto &v, const auto &k) { c.batch_size = to_size(v, k); });
  str("train.seed", [&](const auto &v, const auto &k) { c.seed = to_size(v, k); });
  str("train.checkpoint_epochs", [&](const std::string &v, const std::string &k) {
    std::size_t start = 0;
    while (start < v.size()) {
      auto comma = v.find(',', start);
      if (comma == std::string::npos) comma = v.size();
      const std::string item = v.substr(start, comma - start);
      if (!item.empty()) c.checkpoint_epochs.push_back(to_size(item, k));
      start = comma + 1;
    }
  });
  str("train.eval_every", [&](const auto &v, const auto &k) { c.eval_every = to_size(v, k); });

  str("diag.enabled", [&](const auto &v, const auto &k) { c.diag.enabled = parse_bool(v, k); });
  str("diag.k", [&](const auto &v, const auto &k) { c.diag.k = to_size(v, k); });
  str("diag.batch_size", [&](const auto &v, const auto &k) { c.diag.batch_size = to_size(v, k); });
  str("diag.dense_every", [&](const auto &v, const auto &k) { c.diag.cadence.dense_every = parse_int(v, k); });
  str("diag.dense_until", [&](const auto &v, const auto &k) { c.diag.cadence.dense_until = parse_int(v, k); });
  str("diag.sparse_every", [&](const auto &v, const auto &k) { c.diag.cadence.sparse_every = parse_int(v, k); });
  str("diag.max_iteration", [&](const auto &v, const auto &k) { c.diag.cadence.max_iteration = parse_int(v, k); });
  str("diag.auc_window", [&](const auto &v, const auto &k) { c.diag.auc_window = parse_int(v, k); });
  str("diag.chunk_size", [&](const auto &v, const auto &k) { c.diag.chunk_size = to_size(v, k); });
  return c;
}

KeyValues ExperimentConfig::to_keys() const {
  KeyValues kv;
  kv.set("run.name", name);
  kv.set("model.family", to_string(model.family));
  kv.set("model.hidden_dim", std::to_string(model.hidden_dim));
  kv.set("model.depth", std::to_string(model.depth));
  kv.set("model.activation", to_string(model.activation));
  kv.set("model.init_std", format_double(model.init_std));
  kv.set("model.sd_granularity", to_string(model.sd_granularity));
  kv.set("data.kind", to_string(data.kind));
  kv.set("data.n_train", std::to_string(data.n_train));
  kv.set("data.n_test", std::to_string(data.n_test));
  kv.set("data.input_dim", std::to_string(data.input_dim));
  kv.set("data.n_classes", std::to_string(data.n_classes));
  kv.set("data.noise", format_double(data.noise));
  kv.set("data.seed", std::to_string(data.seed));
  kv.set("data.separation", format_double(data.separation));
  kv.set("data.cluster_std", format_double(data.cluster_std));
  kv.set("data.teacher_depth", std::to_string(data.teacher_depth));
  kv.set("data.teacher_hidden", std::to_string(data.teacher_hidden));
  if (!train_path.empty()) kv.set("data.train_path", train_path);
  if (!test_path.empty()) kv.set("data.test_path", test_path);
  kv.set("opt.kind", to_string(opt.kind));
  kv.set("opt.lr", format_double(lr));
  kv.set("opt.momentum", format_double(opt.momentum));
  kv.set("opt.beta1", format_double(opt.beta1));
  kv.set("opt.beta2", format_double(opt.beta2));
  kv.set("opt.eps", format_double(opt.eps));
  kv.set("opt.weight_decay", format_double(opt.weight_decay));
  kv.set("lr.warmup_epochs", format_double(warmup_epochs));
  kv.set("lr.decay", to_string(lr_decay));
  kv.set("lr.reference_batch", std::to_string(reference_batch));
  kv.set("drop.strategy", to_string(drop.strategy));
  kv.set("drop.shape", to_string(drop.shape));
  kv.set("drop.rate", format_double(drop.rate));
  kv.set("drop.window_epochs", format_double(drop.window_epochs));
  kv.set("drop.curvature", drop.curvature ? format_double(*drop.curvature) : "none");
  kv.set("drop.target", to_string(drop.target));
  kv.set("train.epochs", std::to_string(epochs));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.checkpoint_epochs", join(checkpoint_epochs));
  kv.set("train.eval_every", std::to_string(eval_every));
  kv.set("diag.enabled", diag.enabled ? "true" : "false");
  kv.set("diag.k", std::to_string(diag.k));
  kv.set("diag.batch_size", std::to_string(diag.batch_size));
  kv.set("diag.dense_every", std::to_string(diag.cadence.dense_every));
  kv.set("diag.dense_until", std::to_string(diag.cadence.dense_until));
  kv.set("diag.sparse_every", std::to_string(diag.cadence.sparse_every));
  kv.set("diag.max_iteration", std::to_string(diag.cadence.max_iteration));
  kv.set("diag.auc_window", std::to_string(diag.auc_window));
  kv.set("diag.chunk_size", std::to_string(diag.chunk_size));
  return kv;
}

LrConfig ExperimentConfig::lr_config() const {
  LrConfig l;
  l.base_lr = lr;
  l.warmup_epochs = warmup_epochs;
  l.total_epochs = static_cast<double>(epochs);
  l.decay = lr_decay;
  l.batch = batch_size;
  l.reference_batch = reference_batch == 0 ? batch_size : reference_batch;
  return l;
}

std::vector<std::string> ExperimentConfig::validate() const {
  if (epochs == 0) throw ValidationError("train.epochs must be positive");
  if (batch_size == 0) throw ValidationError("train.batch_size must be positive");
  if (eval_every == 0) throw ValidationError("train.eval_every must be positive");
  if (train_path.empty() != test_path.empty())
    throw ValidationError("data.train_path and data.test_path must be given together");
  if (train_path.empty()) {
    data.validate();
    if (batch_size > data.n_train)
      throw ValidationError("train.batch_size exceeds data.n_train");
  }
  if (model.hidden_dim == 0 || model.depth == 0)
    throw ValidationError("model.hidden_dim and model.depth must be positive");
  if (!(model.init_std > 0.0)) throw ValidationError("model.init_std must be positive");
  opt.validate();
  lr_config().validate();
  const ScheduleReport report = validate_schedule(drop, static_cast<double>(epochs));
  if (!report.ok()) throw ValidationError("drop schedule: " + report.errors.front());
  if (drop.target == DropTarget::stochastic_depth && model.family != Family::residual_mlp &&
      drop.strategy != DropStrategy::none) {
    throw ValidationError("stochastic depth needs model.family=residual_mlp");
  }
  if (diag.enabled) {
    if (diag.k < 2) throw ValidationError("diag.k must be at least 2");
    if (diag.chunk_size == 0) throw ValidationError("diag.chunk_size must be positive");
  }
  return report.warnings;
}

} // namespace earlydrop
