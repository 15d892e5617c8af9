// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "earlydrop/data.hpp"
#include "earlydrop/diagnostics.hpp"
#include "earlydrop/model.hpp"
#include "earlydrop/rng.hpp"

using namespace earlydrop;

namespace {

ModelConfig residual(std::size_t hidden, std::size_t depth) {
  ModelConfig c;
  c.family = Family::residual_mlp;
  c.input_dim = 32;
  c.output_dim = 10;
  c.hidden_dim = hidden;
  c.depth = depth;
  return c;
}

Dataset clusters(std::size_t n) {
  DatasetSpec s;
  s.n_train = n;
  s.n_test = 10;
  s.input_dim = 32;
  s.n_classes = 10;
  return generate(s).train;
}

} // namespace

static void BM_PhiloxUniform(benchmark::State &state) {
  Rng r(1, 2);
  double acc = 0;
  for (auto _ : state) acc += r.uniform();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_PhiloxUniform);

// One training step's worth of tape work: forward plus backward.
static void BM_ForwardBackward(benchmark::State &state) {
  const Model m(residual(static_cast<std::size_t>(state.range(0)), 2));
  const Dataset d = clusters(32);
  const Batch b = slice(d, 0, 32);
  ForwardOptions o;
  o.mode = Mode::train;
  o.rates = {0.1, 0.1};
  std::uint64_t it = 0;
  for (auto _ : state) {
    o.rng = Rng(7, it++);
    ForwardPass p = m.forward(b, o);
    benchmark::DoNotOptimize(backward(p));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128);

static void BM_WholeDatasetGradient(benchmark::State &state) {
  const Model m(residual(32, 2));
  const Dataset d = clusters(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(whole_dataset_gradient(m, d));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WholeDatasetGradient)->Arg(2048)->Unit(benchmark::kMillisecond);

static void BM_Gdv(benchmark::State &state) {
  Rng r(3, 4);
  GradientSet s;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> v(static_cast<std::size_t>(state.range(0)));
    for (double &x : v) x = r.normal();
    s.members.push_back(GradientVector{std::move(v)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(gdv(s));
}
BENCHMARK(BM_Gdv)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK_MAIN();
