// SPDX-License-Identifier: Apache-2.0
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Tolerances and recipes are fixed here.
//
//   acceptance --workdir DIR [--only 1,5,8]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "earlydrop/compare.hpp"
#include "earlydrop/config.hpp"
#include "earlydrop/diagnostics.hpp"
#include "earlydrop/experiment.hpp"
#include "earlydrop/model.hpp"
#include "earlydrop/schedules.hpp"
#include "earlydrop/sweep.hpp"
#include "earlydrop/text_io.hpp"
#include "test_support.hpp"

using namespace earlydrop;
namespace fs = std::filesystem;
namespace oracle = earlydrop::testing::oracle;
using earlydrop::testing::random_vector;

namespace {

// Criterion 1
constexpr double kFdEps = 1e-5;
constexpr double kFdRelTol = 1e-6;
constexpr double kFdRelFloor = 1e-4;
constexpr double kGradSeconds = 60;
// Criterion 2
constexpr double kOracleTol = 1e-12;
constexpr int kOracleTrials = 60;
// Criterion 3
constexpr double kPartitionTol = 1e-10;
// Criterion 4
constexpr int kMcMasks = 100000;
constexpr double kMcRelTol = 0.01;
// Criteria 5 to 7
constexpr std::int64_t kEarlyIterations = 300;
constexpr int kSeeds = 5;
constexpr int kMinSeedWins = 4;
constexpr double kGradientStudySeconds = 600;
// Criteria 8 and 9
constexpr double kTrainingStudySeconds = 1800;
// Criterion 12
constexpr double kLandscapeTol = 1e-10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Underfitting regime: labels from a depth-4 teacher that a depth-2 student
// of width 32 cannot match.
KeyValues underfitting_base(std::size_t n_train) {
  KeyValues k;
  k.set("data.kind", "teacher_mlp");
  k.set("data.n_train", std::to_string(n_train));
  k.set("data.n_test", "2000");
  k.set("data.input_dim", "32");
  k.set("data.n_classes", "10");
  k.set("data.teacher_depth", "4");
  k.set("model.family", "residual_mlp");
  k.set("model.hidden_dim", "32");
  k.set("model.depth", "2");
  k.set("train.batch_size", "32");
  return k;
}

// Overfitting regime: 2k examples with 20% of train labels flipped and a
// student far larger than the clusters need.
KeyValues overfitting_base() {
  KeyValues k;
  k.set("data.kind", "gaussian_clusters");
  k.set("data.n_train", "2000");
  k.set("data.n_test", "2000");
  k.set("data.input_dim", "32");
  k.set("data.n_classes", "10");
  k.set("data.separation", "3");
  k.set("data.noise", "0.2");
  k.set("model.family", "residual_mlp");
  k.set("model.hidden_dim", "128");
  k.set("model.depth", "4");
  k.set("model.sd_granularity", "per_sample");
  k.set("opt.kind", "adamw");
  k.set("opt.lr", "0.001");
  k.set("train.epochs", "30");
  k.set("train.batch_size", "32");
  k.set("drop.target", "stochastic_depth");
  return k;
}

class Suite {
public:
  explicit Suite(fs::path workdir) : work_(std::move(workdir)) { fs::create_directories(work_); }

  RunSummary run(const KeyValues &keys, const std::string &name) {
    const fs::path dir = work_ / name;
    fs::remove_all(dir);
    RunOptions ro;
    ro.threads = env_thread_count();
    return run_experiment(ExperimentConfig::from_keys(keys), dir.string(), ro);
  }
  fs::path dir(const std::string &name) const { return work_ / name; }

private:
  fs::path work_;
};

// 1. Backward against central differences with frozen masks.
Outcome gradient_correctness(Suite &) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20240101);
  double worst = 0.0;
  std::size_t coords = 0;
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig c;
    c.family = trial % 2 == 0 ? Family::mlp : Family::residual_mlp;
    c.input_dim = 2 + gen() % 5;
    c.output_dim = 2 + gen() % 4;
    c.hidden_dim = 3 + gen() % 6;
    c.depth = 1 + gen() % 3;
    c.activation = gen() % 2 == 0 ? Activation::gelu : Activation::relu;
    c.sd_granularity = gen() % 2 == 0 ? DepthGranularity::per_batch : DepthGranularity::per_sample;
    c.init_seed = gen();
    c.init_std = 0.5;
    const Model m(c);
    const std::size_t n = 2 + gen() % 5;
    Batch b{Tensor({n, c.input_dim}, random_vector(gen, n * c.input_dim)), {}};
    for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<std::uint32_t>(gen() % c.output_dim));

    ForwardOptions o;
    o.mode = Mode::train;
    o.rates = {std::uniform_real_distribution<double>(0.0, 0.5)(gen),
               c.family == Family::residual_mlp ? std::uniform_real_distribution<double>(0.0, 0.5)(gen) : 0.0};
    o.rng = Rng(gen(), 0);
    MaskSet masks;
    o.record = &masks;
    ForwardPass pass = m.forward(b, o);
    const GradientVector g = backward(pass);
    o.record = nullptr;
    o.replay = &masks;
    const GradientVector fd = finite_difference_gradient(m, b, o, kFdEps);
    for (std::size_t i = 0; i < g.size(); ++i)
      worst = std::max(worst, earlydrop::testing::rel_err(g.values[i], fd.values[i], kFdRelFloor));
    coords += g.size();
  }
  const double secs = seconds_since(t0);
  return {worst <= kFdRelTol && secs <= kGradSeconds,
          "max rel err " + fmt("%.2e", worst) + " over " + std::to_string(coords) + " coordinates of 10 models, " +
              fmt("%.1f", secs) + " s"};
}

// 2. Metrics against brute-force oracles, plus hand cases.
Outcome metric_oracles(Suite &) {
  double worst = 0.0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  bool hand = true;
  auto set_of = [](std::vector<std::vector<double>> v) {
    GradientSet s;
    for (auto &m : v) s.members.push_back(GradientVector{std::move(m)});
    return s;
  };
  const std::vector<double> e1{1, 0}, e2{0, 1}, neg{-1, 0};
  hand &= cosine_distance(e1, e1) == 0.0 && cosine_distance(e1, neg) == 1.0 && cosine_distance(e1, e2) == 0.5;
  hand &= gdv(set_of({{0.3, -2}, {0.3, -2}})) == 0.0 && gdv(set_of({{1, 0}, {0, 1}})) == 0.5;
  hand &= gde(set_of({{0, 1}, {1, 0}}), GradientVector{{1, 0}}) == 0.25;
  hand &= model_distance(std::vector<double>{1, 1, 1, 1}, std::vector<double>{0, 0, 0, 0}) == 2.0;
  const std::vector<std::pair<std::int64_t, double>> flat{{0, 0.5}, {100, 0.5}};
  hand &= gde_auc(flat, 100) == 50.0;
  hand &= landscape_delta(evaluate_grid([](double a, double b) { return a * a + b * b; }, 3, 1.0)) == 1.0;

  std::mt19937_64 gen(99);
  for (int trial = 0; trial < kOracleTrials; ++trial) {
    const std::size_t dim = 2 + gen() % 60, k = 2 + gen() % 10;
    GradientSet s;
    std::vector<std::vector<double>> raw;
    for (std::size_t i = 0; i < k; ++i) {
      raw.push_back(random_vector(gen, dim));
      s.members.push_back(GradientVector{raw.back()});
    }
    const auto ref = random_vector(gen, dim);
    track(cosine_distance(raw[0], ref), oracle::cosine_distance(raw[0], ref));
    track(gdv(s), oracle::gdv(raw));
    track(gde(s, GradientVector{ref}), oracle::gde(raw, ref));
    track(model_distance(raw[0], ref), oracle::distance(raw[0], ref));

    std::vector<std::pair<std::int64_t, double>> series;
    std::int64_t it = static_cast<std::int64_t>(gen() % 5);
    for (int p = 0; p < 3 + static_cast<int>(gen() % 20); ++p) {
      series.emplace_back(it, std::uniform_real_distribution<double>(0, 1)(gen));
      it += 1 + static_cast<std::int64_t>(gen() % 40);
    }
    const std::int64_t end = series[1].first + static_cast<std::int64_t>(gen() % (it - series[1].first + 20));
    track(gde_auc(series, end), oracle::auc(series, end));

    const std::size_t res = 3 + 2 * (gen() % 5);
    LandscapeGrid g;
    g.resolution = res;
    g.losses = random_vector(gen, res * res);
    track(landscape_delta(g), oracle::landscape_delta(g.losses, res));
  }
  return {hand && worst <= kOracleTol,
          std::string(hand ? "hand cases exact" : "hand case mismatch") + ", max abs diff " + fmt("%.2e", worst) +
              " over " + std::to_string(kOracleTrials) + " random inputs per metric"};
}

// 3. Eval-mode mini-batch gradients over a partition average to the
// whole-dataset gradient.
Outcome unbiasedness(Suite &) {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    DatasetSpec spec;
    spec.n_train = 96;
    spec.n_test = 10;
    spec.input_dim = 6;
    spec.n_classes = 4;
    spec.seed = 300 + trial;
    const Dataset d = generate(spec).train;
    ModelConfig c;
    c.family = trial % 2 == 0 ? Family::residual_mlp : Family::mlp;
    c.input_dim = 6;
    c.output_dim = 4;
    c.hidden_dim = 8;
    c.depth = 1 + trial % 3;
    c.init_seed = 900 + trial;
    c.init_std = 0.3;
    const Model m(c);
    const DropRates rates{0.3, c.family == Family::residual_mlp ? 0.4 : 0.0};

    CollectOptions co;
    co.k = 6;
    co.batch_size = 16;
    co.mode = Mode::eval;
    co.rates = rates;
    for (std::uint32_t b = 0; b < 6; ++b) {
      std::vector<std::uint32_t> idx;
      for (std::uint32_t i = 0; i < 16; ++i) idx.push_back(b * 16 + i);
      co.batches.push_back(idx);
    }
    const GradientVector mean = mean_gradient(collect_minibatch_gradients(m, d, co));
    EvalOptions eo;
    eo.rates = rates;
    const GradientVector full = whole_dataset_gradient(m, d, eo);
    for (std::size_t i = 0; i < full.size(); ++i) worst = std::max(worst, std::abs(mean.values[i] - full.values[i]));
  }
  return {worst <= kPartitionTol, "max abs diff " + fmt("%.2e", worst) + " over 5 checkpoints"};
}

// 4. Monte-Carlo mean of train-mode dropout against eval mode.
Outcome dropout_expectation(Suite &) {
  std::mt19937_64 gen(4);
  std::vector<double> xs(16);
  for (double &x : xs)
    x = (gen() % 2 == 0 ? 1.0 : -1.0) * std::uniform_real_distribution<double>(0.5, 2.0)(gen);
  const Tensor x({xs.size()}, xs);
  double worst = 0.0;
  bool identity = true;
  for (double p : {0.1, 0.5}) {
    Rng rng(77, static_cast<std::uint64_t>(p * 100));
    std::vector<double> sum(xs.size(), 0.0);
    for (int i = 0; i < kMcMasks; ++i) {
      const Tensor y = dropout_forward(x, p, Mode::train, rng);
      for (std::size_t j = 0; j < xs.size(); ++j) sum[j] += y[j];
    }
    const Tensor ev = dropout_forward(x, p, Mode::eval, rng);
    identity &= ev == x;
    for (std::size_t j = 0; j < xs.size(); ++j) worst = std::max(worst, std::abs(sum[j] / kMcMasks - ev[j]) / std::abs(ev[j]));
  }

  // Eval-mode model output does not depend on the dropout rate.
  ModelConfig c;
  c.family = Family::mlp;
  c.input_dim = 5;
  c.output_dim = 3;
  c.hidden_dim = 7;
  c.depth = 2;
  c.init_std = 0.5;
  const Model m(c);
  Batch b{Tensor({4, 5}, random_vector(gen, 20)), {0, 1, 2, 0}};
  ForwardOptions a, z;
  a.rates.dropout = 0.6;
  identity &= m.forward(b, a).logits() == m.forward(b, z).logits();

  return {identity && worst <= kMcRelTol,
          std::string(identity ? "eval identity exact" : "eval identity broken") + ", max rel dev " +
              fmt("%.4f", worst) + " over " + std::to_string(kMcMasks) + " masks at p=0.1 and p=0.5"};
}

// Early-training study shared by criteria 5 to 7: three optimizers, dropout
// 0.1 against none, five seeds. Diagnostics every 10 iterations up to 300.
struct EarlyStats {
  double gde = 0.0;
  double gdv = 0.0;
  double grad_norm = 0.0;
};

struct GradientStudy {
  // optimizer -> seed -> {without, with}
  std::map<std::string, std::vector<std::pair<EarlyStats, EarlyStats>>> results;
  double seconds = 0.0;
  bool done = false;
};

EarlyStats early_stats(const fs::path &dir) {
  const CsvTable d = CsvTable::load((dir / "diagnostics.csv").string());
  const auto it = d.numbers("iteration"), gde = d.numbers("gde"), gdv = d.numbers("gdv");
  EarlyStats s;
  std::size_t n = 0;
  for (std::size_t i = 0; i < it.size(); ++i)
    if (it[i] < kEarlyIterations) {
      s.gde += gde[i];
      s.gdv += gdv[i];
      ++n;
    }
  s.gde /= static_cast<double>(n);
  s.gdv /= static_cast<double>(n);
  s.grad_norm = mean_grad_norm(dir.string(), kEarlyIterations);
  return s;
}

GradientStudy &gradient_study(Suite &suite) {
  static GradientStudy study;
  if (study.done) return study;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::pair<std::string, std::string>> optimizers{
      {"sgd", "0.05"}, {"momentum_sgd", "0.005"}, {"adamw", "0.001"}};
  for (const auto &[opt, lr] : optimizers) {
    for (int seed = 0; seed < kSeeds; ++seed) {
      EarlyStats arm[2];
      for (int with = 0; with < 2; ++with) {
        KeyValues k = underfitting_base(20000);
        k.set("opt.kind", opt);
        k.set("opt.lr", lr);
        k.set("train.epochs", "1");
        k.set("train.seed", std::to_string(seed));
        k.set("drop.strategy", with ? "standard" : "none");
        k.set("drop.rate", with ? "0.1" : "0");
        k.set("diag.enabled", "true");
        k.set("diag.k", "8");
        k.set("diag.dense_every", "10");
        k.set("diag.dense_until", std::to_string(kEarlyIterations));
        k.set("diag.max_iteration", std::to_string(kEarlyIterations));
        k.set("diag.auc_window", std::to_string(kEarlyIterations));
        const std::string name = "early_" + opt + "_seed" + std::to_string(seed) + (with ? "_dropout" : "_none");
        suite.run(k, name);
        arm[with] = early_stats(suite.dir(name));
      }
      study.results[opt].emplace_back(arm[0], arm[1]);
    }
  }
  study.seconds = seconds_since(t0);
  study.done = true;
  return study;
}

std::string wins_detail(const std::string &label, int wins, double without, double with) {
  return label + " lower with dropout in " + std::to_string(wins) + "/" + std::to_string(kSeeds) + " seeds (mean " +
         fmt("%.4f", without) + " without, " + fmt("%.4f", with) + " with)";
}

template <class Field>
std::pair<int, std::string> count_wins(const std::vector<std::pair<EarlyStats, EarlyStats>> &r, Field f,
                                       const std::string &label) {
  int wins = 0;
  double a = 0, b = 0;
  for (const auto &[without, with] : r) {
    wins += f(with) < f(without);
    a += f(without) / r.size();
    b += f(with) / r.size();
  }
  return {wins, wins_detail(label, wins, a, b)};
}

// 5. GDE lower with dropout for every optimizer.
Outcome gde_reduction(Suite &suite) {
  GradientStudy &s = gradient_study(suite);
  bool pass = s.seconds <= kGradientStudySeconds;
  std::string detail;
  for (const char *opt : {"sgd", "momentum_sgd", "adamw"}) {
    const auto [wins, text] = count_wins(s.results.at(opt), [](const EarlyStats &e) { return e.gde; }, std::string(opt) + " GDE");
    pass &= wins >= kMinSeedWins;
    detail += text + "; ";
  }
  return {pass, detail + fmt("%.0f", s.seconds) + " s for 30 runs"};
}

// 6. GDV lower with dropout, AdamW.
Outcome gdv_reduction(Suite &suite) {
  GradientStudy &s = gradient_study(suite);
  const auto [wins, text] = count_wins(s.results.at("adamw"), [](const EarlyStats &e) { return e.gdv; }, "adamw GDV");
  return {wins >= kMinSeedWins, text};
}

// 7. Mean gradient norm lower with dropout, AdamW.
Outcome grad_norm_reduction(Suite &suite) {
  GradientStudy &s = gradient_study(suite);
  const auto [wins, text] =
      count_wins(s.results.at("adamw"), [](const EarlyStats &e) { return e.grad_norm; }, "adamw grad norm");
  return {wins >= kMinSeedWins, text};
}

// Criterion 8 recipe: 50k examples, 10 epochs of AdamW at lr 1e-2; early
// dropout is 0.1 for the first epoch.
KeyValues train_loss_recipe(const std::string &strategy, int seed) {
  KeyValues k = underfitting_base(50000);
  k.set("opt.kind", "adamw");
  k.set("opt.lr", "0.01");
  k.set("train.epochs", "10");
  k.set("train.seed", std::to_string(seed));
  k.set("drop.strategy", strategy);
  k.set("drop.rate", strategy == "none" ? "0" : "0.1");
  k.set("drop.shape", "constant");
  k.set("drop.window_epochs", strategy == "early" ? "1" : "0");
  return k;
}

double pooled_std(const MeanStd &a, const MeanStd &b) { return std::sqrt(0.5 * (a.std * a.std + b.std * b.std)); }

// 8. Final train loss: standard > none > early, early gain above one pooled
// standard deviation.
Outcome train_loss_ordering(Suite &suite) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, std::vector<double>> loss;
  for (const char *strategy : {"none", "standard", "early"})
    for (int seed = 0; seed < kSeeds; ++seed)
      loss[strategy].push_back(
          suite.run(train_loss_recipe(strategy, seed), std::string("fit_") + strategy + "_seed" + std::to_string(seed))
              .final_train_loss);
  const double secs = seconds_since(t0);
  const MeanStd none = mean_std(loss["none"]), standard = mean_std(loss["standard"]), early = mean_std(loss["early"]);
  const double pooled = pooled_std(none, early);
  const CompareReport cmp =
      compare_runs(suite.dir("fit_none_seed0").string(), suite.dir("fit_early_seed0").string());
  const double seed0_delta = cmp.row("final_train_loss").delta;
  const bool pass = standard.mean > none.mean && early.mean < none.mean && none.mean - early.mean > pooled &&
                    secs <= kTrainingStudySeconds;
  return {pass, "train loss none " + fmt("%.4f", none.mean) + ", standard " + fmt("%.4f", standard.mean) + ", early " +
                    fmt("%.4f", early.mean) + "; early gain " + fmt("%.4f", none.mean - early.mean) + " vs pooled std " +
                    fmt("%.4f", pooled) + "; seed 0 early-minus-none train-loss delta " +
                    fmt("%+.4f", seed0_delta) + ", " + fmt("%.0f", secs) + " s"};
}

// 9. Final test accuracy: late s.d. >= standard s.d. > none. Late s.d. is
// off for the first third of training.
Outcome late_generalization(Suite &suite) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, std::vector<double>> acc;
  for (const char *strategy : {"none", "standard", "late"})
    for (int seed = 0; seed < kSeeds; ++seed) {
      KeyValues k = overfitting_base();
      k.set("train.seed", std::to_string(seed));
      k.set("drop.strategy", strategy);
      k.set("drop.rate", std::string(strategy) == "none" ? "0" : "0.5");
      k.set("drop.shape", "constant");
      k.set("drop.window_epochs", std::string(strategy) == "late" ? "10" : "0");
      acc[strategy].push_back(
          suite.run(k, std::string("gen_") + strategy + "_seed" + std::to_string(seed)).final_test_accuracy);
    }
  const double secs = seconds_since(t0);
  const MeanStd none = mean_std(acc["none"]), standard = mean_std(acc["standard"]), late = mean_std(acc["late"]);
  const bool pass = late.mean >= standard.mean && standard.mean > none.mean && secs <= kTrainingStudySeconds;
  return {pass, "test accuracy none " + fmt("%.4f", none.mean) + ", standard s.d. " + fmt("%.4f", standard.mean) +
                    ", late s.d. " + fmt("%.4f", late.mean) + ", " + fmt("%.0f", secs) + " s"};
}

// 10. Schedule example rows bit for bit, and the zero regions of early and
// late schedules.
Outcome schedule_exactness(Suite &) {
  auto sched = [](DropStrategy st, DropShape sh, double p, double w) {
    DropSchedule s;
    s.strategy = st;
    s.shape = sh;
    s.rate = p;
    s.window_epochs = w;
    return s;
  };
  int failures = 0, checks = 0;
  auto expect = [&](double got, double want) {
    ++checks;
    failures += got != want;
  };
  const auto early = sched(DropStrategy::early, DropShape::linear, 0.1, 50);
  expect(drop_rate_at(early, 0, 300), 0.1);
  expect(drop_rate_at(early, 25, 300), 0.05);
  expect(drop_rate_at(early, 50, 300), 0.0);
  const auto late = sched(DropStrategy::late, DropShape::constant, 0.4, 50);
  expect(drop_rate_at(late, 10, 300), 0.0);
  expect(drop_rate_at(late, 50, 300), 0.4);
  expect(drop_rate_at(late, 299, 300), 0.4);
  const auto standard = sched(DropStrategy::standard, DropShape::constant, 0.1, 0);
  for (double t : {0.0, 1.5, 150.0, 299.99}) expect(drop_rate_at(standard, t, 300), 0.1);

  LrConfig warm;
  warm.base_lr = 0.1;
  warm.warmup_epochs = 10;
  warm.total_epochs = 100;
  expect(lr_at(warm, 10 * 37, 37), warm.effective_base());
  LrConfig cos;
  cos.base_lr = 0.3;
  cos.total_epochs = 10;
  const std::int64_t ipe = 11, total = 110;
  const double last = lr_at(cos, total - 1, ipe);
  ++checks;
  failures += !(last > 0.0 && last <= cos.effective_base() * (1.0 - std::cos(std::numbers::pi / total)));
  LrConfig scaled;
  scaled.base_lr = 4e-3;
  scaled.batch = 8192;
  scaled.reference_batch = 4096;
  expect(scaled.effective_base(), 8e-3);

  // Zero regions over a dense grid of randomized schedules.
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 200; ++trial) {
    const double total_epochs = 10.0 + static_cast<double>(gen() % 300);
    const double window = std::uniform_real_distribution<double>(0.01, 0.5)(gen) * total_epochs;
    const double p = std::uniform_real_distribution<double>(0.01, 0.9)(gen);
    for (DropShape sh : {DropShape::constant, DropShape::linear, DropShape::cosine}) {
      const auto e = sched(DropStrategy::early, sh, p, window);
      for (double t = window; t <= total_epochs; t += total_epochs / 97) expect(drop_rate_at(e, t, total_epochs), 0.0);
    }
    const auto l = sched(DropStrategy::late, DropShape::constant, p, window);
    for (double t = 0; t < window; t += window / 53) expect(drop_rate_at(l, t, total_epochs), 0.0);
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " checks exact"};
}

// 11. Same seed, same bytes.
Outcome reproducibility(Suite &suite) {
  const KeyValues k = train_loss_recipe("none", 0);
  if (!fs::exists(suite.dir("fit_none_seed0") / "metrics.csv")) suite.run(k, "fit_none_seed0");
  suite.run(k, "fit_none_seed0_repeat");
  const std::string a = read_text_file((suite.dir("fit_none_seed0") / "metrics.csv").string());
  const std::string b = read_text_file((suite.dir("fit_none_seed0_repeat") / "metrics.csv").string());
  return {!a.empty() && a == b, a == b ? std::to_string(a.size()) + " bytes identical" : "metrics.csv differs"};
}

// 12. Landscape delta on planar and constant losses.
Outcome landscape(Suite &) {
  double worst = 0.0;
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t res = 3 + 2 * (gen() % 8);
    const double span = std::uniform_real_distribution<double>(0.1, 3.0)(gen);
    const double a = std::normal_distribution<double>()(gen), b = std::normal_distribution<double>()(gen);
    const double c = std::normal_distribution<double>()(gen);
    const LandscapeGrid g = evaluate_grid([&](double x, double y) { return a * x + b * y + c; }, res, span);
    // Every horizontal pair differs by |a| h and every vertical pair by
    // |b| h; there are equally many of each.
    const double h = 2.0 * span / static_cast<double>(res - 1);
    worst = std::max(worst, std::abs(landscape_delta(g) - 0.5 * h * (std::abs(a) + std::abs(b))));
  }
  const double constant = landscape_delta(evaluate_grid([](double, double) { return -1.75; }, 9, 2.0));
  return {worst <= kLandscapeTol && constant == 0.0,
          "planar max abs err " + fmt("%.2e", worst) + ", constant delta " + fmt("%g", constant)};
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"acceptance suite"};
  std::string workdir = "acceptance_runs";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "directory for run outputs");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome(Suite &)>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"metric oracles", metric_oracles},
      {"unbiasedness", unbiasedness},
      {"dropout expectation", dropout_expectation},
      {"GDE reduction", gde_reduction},
      {"GDV reduction", gdv_reduction},
      {"gradient-norm reduction", grad_norm_reduction},
      {"early-dropout train-loss ordering", train_loss_ordering},
      {"late-dropout generalization", late_generalization},
      {"schedule exactness", schedule_exactness},
      {"reproducibility", reproducibility},
      {"landscape delta", landscape},
  };
  const std::set<int> selected(only.begin(), only.end());
  Suite suite{fs::path(workdir)};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second(suite);
    } catch (const std::exception &e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
