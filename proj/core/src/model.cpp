// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/model.hpp"

#include <cmath>
#include <string>

#include "earlydrop/error.hpp"

namespace earlydrop {

const char *to_string(Family f) { return f == Family::mlp ? "mlp" : "residual_mlp"; }
const char *to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }
const char *to_string(DepthGranularity g) {
  return g == DepthGranularity::per_batch ? "per_batch" : "per_sample";
}

void ModelConfig::validate() const {
  if (input_dim == 0 || output_dim == 0 || hidden_dim == 0) {
    throw ValidationError("model dimensions must be positive (input " +
                          std::to_string(input_dim) + ", hidden " + std::to_string(hidden_dim) +
                          ", output " + std::to_string(output_dim) + ")");
  }
  if (depth < 1) throw ValidationError("model depth must be at least 1");
  if (output_dim < 2) throw ValidationError("classification needs at least 2 outputs");
  if (!(init_std > 0.0) || !std::isfinite(init_std))
    throw ValidationError("init_std must be positive");
}

namespace {

void add_linear(ParameterVector &p, Rng &rng, const std::string &name, std::size_t in,
                std::size_t out, double std) {
  std::vector<double> w(in * out);
  for (double &v : w) {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 2.0);
    v = z * std;
  }
  p.add_segment(name + ".weight", {in, out}, w);
  p.add_segment(name + ".bias", {out}, std::vector<double>(out, 0.0));
}

void add_norm(ParameterVector &p, const std::string &name, std::size_t width) {
  p.add_segment(name + ".gamma", {width}, std::vector<double>(width, 1.0));
  p.add_segment(name + ".beta", {width}, std::vector<double>(width, 0.0));
}

std::vector<Site> make_sites(const ModelConfig &c) {
  std::vector<Site> sites;
  for (std::size_t l = 0; l < c.depth; ++l) {
    if (c.family == Family::mlp) {
      sites.push_back({Site::Kind::dropout, l, "layer" + std::to_string(l) + ".dropout"});
    } else {
      sites.push_back({Site::Kind::dropout, l, "block" + std::to_string(l) + ".dropout"});
      sites.push_back({Site::Kind::depth, l, "block" + std::to_string(l) + ".depth"});
    }
  }
  return sites;
}

} // namespace

ParameterVector build_parameters(const ModelConfig &c) {
  c.validate();
  Rng rng(c.init_seed, stream_id({static_cast<std::uint64_t>(StreamTag::init)}));
  ParameterVector p;
  if (c.family == Family::mlp) {
    std::size_t in = c.input_dim;
    for (std::size_t l = 0; l < c.depth; ++l) {
      add_linear(p, rng, "layer" + std::to_string(l), in, c.hidden_dim, c.init_std);
      in = c.hidden_dim;
    }
    add_linear(p, rng, "head", in, c.output_dim, c.init_std);
  } else {
    const std::size_t h = c.hidden_dim;
    add_linear(p, rng, "stem", c.input_dim, h, c.init_std);
    for (std::size_t l = 0; l < c.depth; ++l) {
      const std::string b = "block" + std::to_string(l);
      add_linear(p, rng, b + ".fc1", h, h, c.init_std);
      add_norm(p, b + ".norm", h);
      add_linear(p, rng, b + ".fc2", h, h, c.init_std);
    }
    add_norm(p, "head_norm", h);
    add_linear(p, rng, "head", h, c.output_dim, c.init_std);
  }
  return p;
}

Model::Model(ModelConfig config)
    : config_(std::move(config)), params_(build_parameters(config_)),
      sites_(make_sites(config_)) {}

Model::Model(ModelConfig config, ParameterVector params)
    : config_(std::move(config)), params_(std::move(params)), sites_(make_sites(config_)) {
  const ParameterVector expected = build_parameters(config_);
  if (!params_.same_layout(expected)) {
    throw ValidationError("parameter layout does not match the " +
                          std::string(to_string(config_.family)) + " model configuration");
  }
}

double sd_rate_for_layer(double p_max, std::size_t layer_index, std::size_t depth) {
  if (depth < 1 || layer_index >= depth) {
    throw ValidationError("layer index " + std::to_string(layer_index) +
                          " out of range for depth " + std::to_string(depth));
  }
  if (depth == 1) return p_max;
  return p_max * static_cast<double>(layer_index) / static_cast<double>(depth - 1);
}

namespace {

void check_rate(double p, const char *what) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ValidationError(std::string(what) + " rate must lie in [0, 1), got " +
                          std::to_string(p));
  }
}

} // namespace

Tensor dropout_mask(const Shape &shape, double p, Rng &rng) {
  check_rate(p, "dropout");
  Tensor m(shape, 0.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (double &v : m.data()) v = rng.uniform() < p ? 0.0 : keep_scale;
  return m;
}

Tensor dropout_forward(const Tensor &x, double p, Mode mode, Rng &rng) {
  check_rate(p, "dropout");
  if (mode == Mode::eval || p == 0.0) return x;
  Tensor m = dropout_mask(x.shape(), p, rng);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= m[i];
  return y;
}

Tensor depth_keep_mask(std::size_t rows, double p, DepthGranularity granularity, Rng &rng) {
  check_rate(p, "stochastic depth");
  Tensor m({rows}, 1.0);
  if (p == 0.0) return m;
  if (granularity == DepthGranularity::per_batch) {
    const double keep = rng.uniform() < p ? 0.0 : 1.0;
    for (double &v : m.data()) v = keep;
  } else {
    for (double &v : m.data()) v = rng.uniform() < p ? 0.0 : 1.0;
  }
  return m;
}

Var stochastic_depth(Tape &tape, Var x, const std::function<Var(Tape &, Var)> &body, double p,
                     DepthGranularity granularity, Mode mode, Rng &rng, const Tensor *replay,
                     Tensor *record) {
  check_rate(p, "stochastic depth");
  const Tensor &xv = tape.value(x);
  const std::size_t rows = xv.rows(), cols = xv.cols();

  Tensor row_scale;
  if (replay) {
    if (replay->size() != rows) {
      throw ShapeError("stochastic_depth", "replayed mask has " +
                                               std::to_string(replay->size()) + " rows, need " +
                                               std::to_string(rows));
    }
    row_scale = *replay;
  } else if (mode == Mode::train) {
    row_scale = depth_keep_mask(rows, p, granularity, rng);
  } else {
    row_scale = Tensor({rows}, 1.0 - p);
  }
  if (record) *record = row_scale;

  bool all_zero = true, all_one = true;
  for (double v : row_scale.data()) {
    all_zero = all_zero && v == 0.0;
    all_one = all_one && v == 1.0;
  }
  if (all_zero) return x;
  Var out = body(tape, x);
  if (!all_one) {
    Tensor full(tape.value(out).shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) full[r * cols + c] = row_scale[r];
    out = tape.mask(out, std::move(full), "stochastic_depth");
  }
  return tape.add(x, out, "stochastic_depth");
}

Tensor stochastic_depth_forward(const std::function<Tensor(const Tensor &)> &body,
                                const Tensor &x, double p, DepthGranularity granularity,
                                Mode mode, Rng &rng) {
  Tape tape;
  Var in = tape.constant(x);
  Var out = stochastic_depth(
      tape, in, [&](Tape &t, Var v) { return t.constant(body(t.value(v))); }, p, granularity,
      mode, rng);
  return tape.value(out);
}

Var Model::activation(Tape &tape, Var x) const {
  return config_.activation == Activation::relu ? tape.relu(x) : tape.gelu(x);
}

Var Model::dropout_site(Tape &tape, Var x, std::size_t site, const ForwardOptions &o) const {
  const MaskSet *replay = o.replay;
  if (replay && site < replay->masks.size() && replay->masks[site]) {
    Tensor m = *replay->masks[site];
    if (o.record) o.record->masks[site] = m;
    return tape.mask(x, std::move(m), sites_[site].name);
  }
  if (o.mode == Mode::eval || o.rates.dropout == 0.0) {
    check_rate(o.rates.dropout, "dropout");
    return x;
  }
  Rng rng = o.rng.fork({static_cast<std::uint64_t>(StreamTag::dropout), site});
  Tensor m = dropout_mask(tape.value(x).shape(), o.rates.dropout, rng);
  if (o.record) o.record->masks[site] = m;
  return tape.mask(x, std::move(m), sites_[site].name);
}

ForwardPass Model::forward(const Batch &batch, const ForwardOptions &o) const {
  const Tensor &in = batch.inputs;
  if (in.rank() != 2 || in.cols() != config_.input_dim) {
    throw ShapeError("input", "expected [n," + std::to_string(config_.input_dim) + "], got " +
                                  shape_string(in.shape()));
  }
  if (batch.labels.size() != in.rows()) {
    throw ShapeError("input", std::to_string(batch.labels.size()) + " labels for " +
                                  std::to_string(in.rows()) + " rows");
  }
  if (o.record) {
    o.record->masks.assign(sites_.size(), std::nullopt);
  }

  ForwardPass pass;
  Tape &t = pass.tape_;
  pass.params_.reserve(params_.segment_count());
  for (std::size_t i = 0; i < params_.segment_count(); ++i)
    pass.params_.push_back(t.parameter(params_.segment_tensor(i)));
  pass.param_len_ = params_.total_len();

  std::size_t seg = 0;
  auto next = [&]() { return pass.params_[seg++]; };
  auto linear = [&](Var x, const std::string &name) {
    Var w = next();
    Var b = next();
    return t.add_bias(t.matmul(x, w, name), b, name);
  };

  Var h = t.constant(in);
  std::size_t site = 0;
  if (config_.family == Family::mlp) {
    for (std::size_t l = 0; l < config_.depth; ++l) {
      h = activation(t, linear(h, "layer" + std::to_string(l)));
      h = dropout_site(t, h, site++, o);
    }
  } else {
    h = linear(h, "stem");
    for (std::size_t l = 0; l < config_.depth; ++l) {
      const std::string name = "block" + std::to_string(l);
      const std::size_t drop_site = site++;
      const std::size_t depth_site = site++;
      const std::size_t body_seg = seg;
      seg += 6; // fc1 (2), norm (2), fc2 (2)
      auto body = [&, body_seg, drop_site, name](Tape &tt, Var x) {
        const auto &pv = pass.params_;
        Var y = tt.add_bias(tt.matmul(x, pv[body_seg], name + ".fc1"), pv[body_seg + 1],
                            name + ".fc1");
        y = tt.layer_norm(y, pv[body_seg + 2], pv[body_seg + 3], name + ".norm");
        y = activation(tt, y);
        y = dropout_site(tt, y, drop_site, o);
        return tt.add_bias(tt.matmul(y, pv[body_seg + 4], name + ".fc2"), pv[body_seg + 5],
                           name + ".fc2");
      };
      const double p_l = sd_rate_for_layer(o.rates.depth, l, config_.depth);
      Rng rng = o.rng.fork({static_cast<std::uint64_t>(StreamTag::depth), depth_site});
      const Tensor *replay = nullptr;
      if (o.replay && depth_site < o.replay->masks.size() && o.replay->masks[depth_site])
        replay = &*o.replay->masks[depth_site];
      Tensor recorded;
      h = stochastic_depth(t, h, body, p_l, config_.sd_granularity, o.mode, rng, replay,
                           o.record ? &recorded : nullptr);
      if (o.record) o.record->masks[depth_site] = std::move(recorded);
    }
    Var g = next();
    Var b = next();
    h = t.layer_norm(h, g, b, "head_norm");
  }
  pass.logits_ = linear(h, "head");
  try {
    pass.loss_ = t.softmax_cross_entropy(pass.logits_, batch.labels, "loss");
  } catch (const NonFiniteError &e) {
    throw NonFiniteError(e.what(), o.iteration);
  }
  return pass;
}

Tensor Model::predict(const Tensor &inputs) const {
  Batch b{inputs, std::vector<std::uint32_t>(inputs.rows(), 0)};
  ForwardOptions o;
  o.mode = Mode::eval;
  return forward(b, o).logits();
}

GradientVector backward(ForwardPass &pass) {
  pass.tape_.backward(pass.loss_);
  GradientVector g;
  g.values.reserve(pass.param_len_);
  for (Var p : pass.params_) {
    const Tensor gr = pass.tape_.grad(p);
    g.values.insert(g.values.end(), gr.data().begin(), gr.data().end());
  }
  return g;
}

GradientVector finite_difference_gradient(
    const std::function<double(std::span<const double>)> &loss, std::span<const double> at,
    double eps) {
  if (!(eps > 0.0)) throw ValidationError("finite-difference step must be positive");
  std::vector<double> w(at.begin(), at.end());
  const double base = loss(w);
  const double again = loss(w);
  if (base != again && !(std::isnan(base) && std::isnan(again))) {
    throw Error("loss is not deterministic under repeated evaluation; freeze the masks");
  }
  GradientVector g;
  g.values.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double orig = w[i];
    w[i] = orig + eps;
    const double up = loss(w);
    w[i] = orig - eps;
    const double down = loss(w);
    w[i] = orig;
    g.values[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

GradientVector finite_difference_gradient(const Model &model, const Batch &batch,
                                          const ForwardOptions &options, double eps) {
  ForwardOptions frozen = options;
  MaskSet masks;
  if (options.mode == Mode::train && !options.replay) {
    ForwardOptions rec = options;
    rec.record = &masks;
    (void)model.forward(batch, rec);
    frozen.replay = &masks;
  }
  frozen.record = nullptr;
  Model probe = model;
  auto loss = [&](std::span<const double> w) {
    auto dst = probe.parameters().values();
    std::copy(w.begin(), w.end(), dst.begin());
    return probe.forward(batch, frozen).loss();
  };
  return finite_difference_gradient(loss, model.parameters().values(), eps);
}

} // namespace earlydrop
