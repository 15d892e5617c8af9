// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "earlydrop/error.hpp"
#include "earlydrop/rng.hpp"

namespace earlydrop {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)> &fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double ab = dot(a, b);
  const double aa = dot(a, a);
  const double bb = dot(b, b);
  if (aa == 0.0 || bb == 0.0)
    throw ValidationError("cosine distance is undefined for a zero vector");
  const double cos = ab / std::sqrt(aa * bb);
  return std::clamp(0.5 * (1.0 - cos), 0.0, 1.0);
}

double gdv(const GradientSet &set) {
  const std::size_t n = set.size();
  if (n < 2) throw ValidationError("gdv needs at least 2 gradients, got " + std::to_string(n));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      sum += cosine_distance(set.members[i].values, set.members[j].values);
  return 2.0 * sum / (static_cast<double>(n) * static_cast<double>(n - 1));
}

double gde(const GradientSet &set, const GradientVector &reference) {
  if (set.size() < 1) throw ValidationError("gde needs at least 1 gradient");
  double sum = 0.0;
  for (const auto &g : set.members) sum += cosine_distance(g.values, reference.values);
  return sum / static_cast<double>(set.size());
}

double gradient_norm(std::span<const double> g) { return l2_norm(g); }

double model_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("model distance between vectors of lengths " +
                          std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

GradientVector mean_gradient(const GradientSet &set) {
  if (set.size() == 0) throw ValidationError("mean of an empty gradient set");
  GradientVector m;
  m.values.assign(set.members.front().size(), 0.0);
  for (const auto &g : set.members) {
    if (g.size() != m.size()) throw ValidationError("gradient set members differ in length");
    for (std::size_t i = 0; i < g.size(); ++i) m.values[i] += g.values[i];
  }
  for (double &v : m.values) v /= static_cast<double>(set.size());
  return m;
}

double bias_norm(const GradientSet &set, const GradientVector &reference) {
  return model_distance(mean_gradient(set).values, reference.values);
}

double gde_auc(std::span<const std::pair<std::int64_t, double>> series, std::int64_t window_end) {
  std::size_t inside = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i > 0 && series[i].first <= series[i - 1].first)
      throw ValidationError("gde series must be strictly increasing in iteration");
    if (series[i].first <= window_end) ++inside;
  }
  if (inside < 2) {
    throw ValidationError("gde_auc needs at least 2 points up to iteration " +
                          std::to_string(window_end) + ", have " + std::to_string(inside));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < series.size(); ++i) {
    const auto [x0, y0] = series[i - 1];
    auto [x1, y1] = series[i];
    if (x0 >= window_end) break;
    if (x1 > window_end) {
      const double u = static_cast<double>(window_end - x0) / static_cast<double>(x1 - x0);
      y1 = y0 + u * (y1 - y0);
      x1 = window_end;
    }
    area += 0.5 * (y0 + y1) * static_cast<double>(x1 - x0);
  }
  return area;
}

namespace {

std::size_t chunk_count(std::size_t n, std::size_t chunk) { return (n + chunk - 1) / chunk; }

} // namespace

GradientVector whole_dataset_gradient(const Model &model, const Dataset &data,
                                      const EvalOptions &options) {
  const std::size_t n = data.size();
  if (n == 0) throw ValidationError("whole-dataset gradient of an empty dataset");
  const std::size_t chunk = std::max<std::size_t>(options.chunk_size, 1);
  const std::size_t chunks = chunk_count(n, chunk);
  std::vector<GradientVector> parts(chunks);
  parallel_for(chunks, options.threads, [&](std::size_t c) {
    const std::size_t begin = c * chunk, end = std::min(n, begin + chunk);
    ForwardOptions o;
    o.mode = Mode::eval;
    o.rates = options.rates;
    auto pass = model.forward(slice(data, begin, end), o);
    parts[c] = backward(pass);
  });
  GradientVector total;
  total.values.assign(model.parameters().total_len(), 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * chunk, end = std::min(n, begin + chunk);
    const double weight = static_cast<double>(end - begin) / static_cast<double>(n);
    for (std::size_t i = 0; i < total.size(); ++i) total.values[i] += weight * parts[c].values[i];
  }
  return total;
}

EvalResult evaluate(const Model &model, const Dataset &data, const EvalOptions &options) {
  const std::size_t n = data.size();
  if (n == 0) throw ValidationError("evaluation of an empty dataset");
  const std::size_t chunk = std::max<std::size_t>(options.chunk_size, 1);
  const std::size_t chunks = chunk_count(n, chunk);
  std::vector<double> loss(chunks), correct(chunks);
  parallel_for(chunks, options.threads, [&](std::size_t c) {
    const std::size_t begin = c * chunk, end = std::min(n, begin + chunk);
    const Batch b = slice(data, begin, end);
    ForwardOptions o;
    o.mode = Mode::eval;
    o.rates = options.rates;
    auto pass = model.forward(b, o);
    loss[c] = pass.loss() * static_cast<double>(end - begin);
    const Tensor &z = pass.logits();
    std::size_t hits = 0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
      const double *row = z.data().data() + r * z.cols();
      const auto arg = static_cast<std::uint32_t>(std::max_element(row, row + z.cols()) - row);
      hits += arg == b.labels[r];
    }
    correct[c] = static_cast<double>(hits);
  });
  EvalResult r;
  for (std::size_t c = 0; c < chunks; ++c) {
    r.loss += loss[c];
    r.accuracy += correct[c];
  }
  r.loss /= static_cast<double>(n);
  r.accuracy /= static_cast<double>(n);
  return r;
}

GradientSet collect_minibatch_gradients(const Model &model, const Dataset &data,
                                        const CollectOptions &o) {
  const bool forced = !o.batches.empty();
  const std::size_t k = forced ? o.batches.size() : o.k;
  if (k < 2) throw ValidationError("collecting gradients needs k >= 2, got " + std::to_string(k));
  if (!forced && (o.batch_size < 1 || o.batch_size > data.size())) {
    throw ValidationError("diagnostic batch size " + std::to_string(o.batch_size) +
                          " must lie in [1, " + std::to_string(data.size()) + "]");
  }
  const Rng base(o.seed, stream_id({static_cast<std::uint64_t>(StreamTag::diagnostics),
                                    static_cast<std::uint64_t>(o.checkpoint)}));
  std::vector<GradientVector> grads(k);
  parallel_for(k, o.threads, [&](std::size_t j) {
    std::vector<std::uint32_t> idx;
    if (forced) {
      idx = o.batches[j];
    } else {
      // Partial Fisher-Yates: distinct indices within the batch.
      Rng pick = base.fork({0xBA7C, j});
      std::vector<std::uint32_t> pool(data.size());
      for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<std::uint32_t>(i);
      for (std::size_t i = 0; i < o.batch_size; ++i)
        std::swap(pool[i], pool[i + pick.below(pool.size() - i)]);
      idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(o.batch_size));
    }
    ForwardOptions fo;
    fo.mode = o.mode;
    fo.rates = o.rates;
    fo.rng = base.fork({0x3A5C, j});
    fo.replay = o.frozen_masks;
    fo.iteration = o.checkpoint;
    auto pass = model.forward(gather(data, idx), fo);
    grads[j] = backward(pass);
  });

  GradientSet set;
  set.checkpoint = o.checkpoint;
  set.seed = o.seed;
  set.batch_size = forced ? o.batches.front().size() : o.batch_size;
  for (std::size_t j = 0; j < k; ++j) {
    if (gradient_norm(grads[j].values) == 0.0) {
      set.warnings.push_back("member " + std::to_string(j) +
                             " has a zero gradient and was excluded");
      continue;
    }
    set.members.push_back(std::move(grads[j]));
  }
  return set;
}

bool DiagCadence::due(std::int64_t it) const {
  if (it < 0) return false;
  if (max_iteration >= 0 && it > max_iteration) return false;
  if (it <= dense_until) return dense_every > 0 && it % dense_every == 0;
  return sparse_every > 0 && it % sparse_every == 0;
}

double LandscapeGrid::coordinate(std::size_t i) const {
  if (resolution < 2) return 0.0;
  const double half = static_cast<double>(resolution - 1) / 2.0;
  return span * (static_cast<double>(i) - half) / half;
}

double landscape_delta(const LandscapeGrid &g, std::vector<std::string> *warnings) {
  const std::size_t r = g.resolution;
  if (g.losses.size() != r * r) throw ValidationError("landscape grid is not square");
  double sum = 0.0;
  std::size_t pairs = 0, skipped = 0;
  auto visit = [&](std::size_t a, std::size_t b) {
    const double la = g.losses[a], lb = g.losses[b];
    if (!std::isfinite(la) || !std::isfinite(lb)) {
      ++skipped;
      return;
    }
    sum += std::abs(la - lb);
    ++pairs;
  };
  for (std::size_t j = 0; j < r; ++j)
    for (std::size_t i = 0; i + 1 < r; ++i) visit(j * r + i, j * r + i + 1);
  for (std::size_t j = 0; j + 1 < r; ++j)
    for (std::size_t i = 0; i < r; ++i) visit(j * r + i, (j + 1) * r + i);
  if (skipped && warnings) {
    warnings->push_back(std::to_string(skipped) +
                        " neighbor pairs touch a non-finite loss and were excluded");
  }
  if (pairs == 0) throw ValidationError("landscape has no finite neighbor pairs");
  return sum / static_cast<double>(pairs);
}

namespace {

void check_resolution(std::size_t resolution) {
  if (resolution < 3 || resolution % 2 == 0) {
    throw ValidationError("landscape resolution must be odd and at least 3, got " +
                          std::to_string(resolution));
  }
}

} // namespace

LandscapeGrid evaluate_grid(const std::function<double(double, double)> &loss,
                            std::size_t resolution, double span) {
  check_resolution(resolution);
  LandscapeGrid g;
  g.resolution = resolution;
  g.span = span;
  g.losses.resize(resolution * resolution);
  for (std::size_t j = 0; j < resolution; ++j)
    for (std::size_t i = 0; i < resolution; ++i)
      g.losses[j * resolution + i] = loss(g.coordinate(i), g.coordinate(j));
  return g;
}

namespace {

std::vector<double> landscape_direction(const ParameterVector &p, Rng rng) {
  std::vector<double> d(p.total_len());
  for (double &v : d) v = rng.normal();
  for (std::size_t s = 0; s < p.segment_count(); ++s) {
    const Segment &seg = p.segments()[s];
    auto dir = std::span<double>(d).subspan(seg.offset, seg.length);
    const double wn = l2_norm(p.segment_values(s));
    const double dn = l2_norm(dir);
    for (double &v : dir) v = dn > 0.0 ? v * wn / dn : 0.0;
  }
  double n = l2_norm(d);
  if (n == 0.0) {
    // Every weight is zero; fall back to the raw random direction.
    for (double &v : d) v = rng.normal();
    n = l2_norm(d);
  }
  for (double &v : d) v /= n;
  return d;
}

} // namespace

LandscapeResult loss_landscape_delta(const Model &model, const Dataset &data,
                                     const LandscapeConfig &config) {
  check_resolution(config.resolution);
  const ParameterVector &w = model.parameters();
  const Rng base(config.seed, stream_id({static_cast<std::uint64_t>(StreamTag::landscape)}));
  const std::vector<double> da = landscape_direction(w, base.fork({1}));
  const std::vector<double> db = landscape_direction(w, base.fork({2}));

  Model probe = model;
  const auto center = w.values();
  LandscapeResult out;
  out.grid = evaluate_grid(
      [&](double alpha, double beta) {
        auto dst = probe.parameters().values();
        for (std::size_t i = 0; i < dst.size(); ++i)
          dst[i] = center[i] + alpha * da[i] + beta * db[i];
        try {
          return evaluate(probe, data, config.eval).loss;
        } catch (const NonFiniteError &) {
          return std::numeric_limits<double>::quiet_NaN();
        }
      },
      config.resolution, config.span);
  out.grid.direction_a = da;
  out.grid.direction_b = db;
  out.delta = landscape_delta(out.grid, &out.warnings);
  return out;
}

} // namespace earlydrop
