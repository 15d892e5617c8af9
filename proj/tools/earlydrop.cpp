// SPDX-License-Identifier: Apache-2.0
// earlydrop: command-line front end for the experiment harness.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "earlydrop/checkpoint.hpp"
#include "earlydrop/compare.hpp"
#include "earlydrop/config.hpp"
#include "earlydrop/data.hpp"
#include "earlydrop/diagnostics.hpp"
#include "earlydrop/error.hpp"
#include "earlydrop/experiment.hpp"
#include "earlydrop/plot.hpp"
#include "earlydrop/sweep.hpp"
#include "earlydrop/text_io.hpp"

namespace fs = std::filesystem;
using namespace earlydrop;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

KeyValues load_keys(const Common &c) {
  KeyValues kv = c.config.empty() ? KeyValues{} : KeyValues::load(c.config);
  for (const auto &o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + o + "'");
    apply_override(kv, o.substr(0, eq), o.substr(eq + 1));
  }
  return kv;
}

// Keys only some subcommands read; the experiment config rejects them.
KeyValues take_prefixed(KeyValues &kv, const std::string &prefix) {
  KeyValues out;
  std::vector<std::string> keys;
  for (const auto &[k, v] : kv.items())
    if (k.rfind(prefix, 0) == 0) keys.push_back(k);
  for (const auto &k : keys) {
    out.set(k, *kv.get(k));
    kv.erase(k);
  }
  return out;
}

ExperimentConfig load_config(const Common &c, KeyValues *landscape = nullptr,
                             KeyValues *plot = nullptr) {
  KeyValues kv = load_keys(c);
  KeyValues l = take_prefixed(kv, "landscape.");
  KeyValues p = take_prefixed(kv, "plot.");
  if (landscape) *landscape = l;
  if (plot) *plot = p;
  ExperimentConfig cfg = ExperimentConfig::from_keys(kv);
  for (const auto &w : cfg.validate()) std::cerr << "warning: " << w << "\n";
  return cfg;
}

void add_common(CLI::App *app, Common &c, bool config_required) {
  auto *opt = app->add_option("--config", c.config, "key=value config file");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output location")->required();
  app->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

Model model_from(const ExperimentConfig &cfg, const Dataset &train, const std::string &ckpt,
                 std::int64_t *epochs_done) {
  Model model(resolve_model_config(cfg, train));
  if (!ckpt.empty()) {
    const ParameterVector saved = load_checkpoint(ckpt);
    restore_parameters(model, saved);
    if (epochs_done) {
      for (const auto &seg : saved.segments())
        if (seg.name == "train.epochs_done")
          *epochs_done = static_cast<std::int64_t>(
              saved.segment_values(saved.find(seg.name))[0]);
    }
  }
  return model;
}

std::vector<std::uint64_t> parse_seeds(const std::string &s) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    if (comma > start)
      out.push_back(static_cast<std::uint64_t>(parse_int(s.substr(start, comma - start), "seed")));
    start = comma + 1;
  }
  return out;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Early/late dropout and stochastic depth experiments"};
  app.require_subcommand(1);

  Common gen_c, train_c, sweep_c, diag_c, land_c, cmp_c, plot_c;

  auto *gen = app.add_subcommand("gen-data", "generate a synthetic dataset pair");
  add_common(gen, gen_c, true);

  auto *train = app.add_subcommand("train", "run one training experiment");
  add_common(train, train_c, true);
  std::string resume;
  train->add_option("--resume", resume, "checkpoint to continue from")->check(CLI::ExistingFile);

  auto *sweep = app.add_subcommand("sweep", "grid sweep over config keys and seeds");
  add_common(sweep, sweep_c, true);
  std::vector<std::string> axes;
  std::string seeds = "0";
  sweep->add_option("--axis", axes, "key=v1,v2,... (repeatable)");
  sweep->add_option("--seeds", seeds, "comma-separated seeds");

  auto *diagnose = app.add_subcommand("diagnose", "gradient diagnostics at a checkpoint");
  add_common(diagnose, diag_c, true);
  std::string diag_ckpt;
  diagnose->add_option("--checkpoint", diag_ckpt, "checkpoint file (default: initialization)")
      ->check(CLI::ExistingFile);

  auto *landscape = app.add_subcommand("landscape", "2-D loss landscape and its delta");
  add_common(landscape, land_c, true);
  std::string land_ckpt;
  landscape->add_option("--checkpoint", land_ckpt, "checkpoint file (default: initialization)")
      ->check(CLI::ExistingFile);

  auto *compare = app.add_subcommand("compare", "compare two finished runs");
  add_common(compare, cmp_c, false);
  std::vector<std::string> runs;
  std::int64_t first_n = 300;
  compare->add_option("runs", runs, "run directories a and b")->required()->expected(2);
  compare->add_option("--first", first_n, "iterations for the grad-norm mean");

  auto *plot = app.add_subcommand("plot", "SVG line plot of CSV columns");
  add_common(plot, plot_c, false);
  std::vector<std::string> csvs, names;
  std::string px, py, ptitle;
  plot->add_option("csv", csvs, "CSV files, one series each")->required();
  plot->add_option("--names", names, "legend labels");
  plot->add_option("-x", px, "x column (default plot.x or iteration)");
  plot->add_option("-y", py, "y column (default plot.y or gde)");
  plot->add_option("--title", ptitle, "plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const std::size_t threads = env_thread_count();
    if (*gen) {
      const ExperimentConfig cfg = load_config(gen_c);
      const DatasetPair d = generate(cfg.data);
      fs::create_directories(gen_c.out);
      save_dataset(d.train, (fs::path(gen_c.out) / "train.ddds").string());
      save_dataset(d.test, (fs::path(gen_c.out) / "test.ddds").string());
      write_text_file((fs::path(gen_c.out) / "manifest.txt").string(), dataset_manifest(cfg.data));
      std::cout << "wrote " << d.train.size() << " train and " << d.test.size()
                << " test examples to " << gen_c.out << "\n";
    } else if (*train) {
      const ExperimentConfig cfg = load_config(train_c);
      RunOptions ro;
      ro.resume_from = resume;
      ro.threads = threads;
      const RunSummary s = run_experiment(cfg, train_c.out, ro);
      std::cout << summary_to_text(s);
    } else if (*sweep) {
      KeyValues kv = load_keys(sweep_c);
      take_prefixed(kv, "landscape.");
      take_prefixed(kv, "plot.");
      std::vector<SweepAxis> parsed;
      for (const auto &a : axes) parsed.push_back(parse_axis(a));
      const SweepTable t = run_sweep(kv, parsed, parse_seeds(seeds), sweep_c.out, threads);
      std::cout << t.to_csv();
      for (const auto &cell : t.cells)
        for (const auto &f : cell.failures) std::cerr << "run failed: " << f << "\n";
    } else if (*diagnose) {
      const ExperimentConfig cfg = load_config(diag_c);
      const DatasetPair d = load_experiment_data(cfg);
      std::int64_t epochs_done = 0;
      const Model model = model_from(cfg, d.train, diag_ckpt, &epochs_done);
      const Model initial = model_from(cfg, d.train, "", nullptr);
      const std::int64_t ipe = iterations_per_epoch(d.train.size(), cfg.batch_size);
      const std::int64_t it = epochs_done * ipe;
      const double rate =
          drop_rate_at(cfg.drop, static_cast<double>(epochs_done), static_cast<double>(cfg.epochs));
      CollectOptions co;
      co.k = cfg.diag.k;
      co.batch_size = cfg.diag.batch_size == 0 ? cfg.batch_size : cfg.diag.batch_size;
      (cfg.drop.target == DropTarget::dropout ? co.rates.dropout : co.rates.depth) = rate;
      co.seed = stream_id({cfg.seed, static_cast<std::uint64_t>(StreamTag::diagnostics)});
      co.checkpoint = it;
      co.threads = threads;
      const EvalOptions eo{cfg.diag.chunk_size, threads, co.rates};
      const GradientVector full = whole_dataset_gradient(model, d.train, eo);
      const GradientSet set = collect_minibatch_gradients(model, d.train, co);
      KeyValues out;
      out.set("iteration", std::to_string(it));
      out.set("drop_rate", format_double(rate));
      out.set("members", std::to_string(set.size()));
      out.set("grad_norm", format_double(gradient_norm(full.values)));
      out.set("model_distance", format_double(model_distance(model.parameters().values(),
                                                             initial.parameters().values())));
      out.set("gdv", format_double(set.size() >= 2 ? gdv(set) : std::nan("")));
      out.set("gde", format_double(set.size() >= 2 ? gde(set, full) : std::nan("")));
      out.set("bias_norm", format_double(set.size() > 0 ? bias_norm(set, full) : std::nan("")));
      for (const auto &w : set.warnings) std::cerr << "warning: " << w << "\n";
      fs::create_directories(diag_c.out);
      write_text_file((fs::path(diag_c.out) / "diagnostics.txt").string(), out.serialize());
      std::cout << out.serialize();
    } else if (*landscape) {
      KeyValues lk;
      const ExperimentConfig cfg = load_config(land_c, &lk);
      const DatasetPair d = load_experiment_data(cfg);
      std::int64_t epochs_done = 0;
      const Model model = model_from(cfg, d.train, land_ckpt, &epochs_done);
      LandscapeConfig lc;
      if (auto v = lk.get("landscape.resolution"))
        lc.resolution = static_cast<std::size_t>(parse_int(*v, "landscape.resolution"));
      if (auto v = lk.get("landscape.span")) lc.span = parse_double(*v, "landscape.span");
      lc.seed = stream_id({cfg.seed, static_cast<std::uint64_t>(StreamTag::landscape)});
      if (auto v = lk.get("landscape.seed"))
        lc.seed = static_cast<std::uint64_t>(parse_int(*v, "landscape.seed"));
      lc.eval = EvalOptions{cfg.diag.chunk_size, threads, {}};
      const double rate =
          drop_rate_at(cfg.drop, static_cast<double>(epochs_done), static_cast<double>(cfg.epochs));
      (cfg.drop.target == DropTarget::dropout ? lc.eval.rates.dropout : lc.eval.rates.depth) = rate;
      const LandscapeResult r = loss_landscape_delta(model, d.train, lc);
      std::string csv = "alpha,beta,loss\n";
      for (std::size_t j = 0; j < r.grid.resolution; ++j)
        for (std::size_t i = 0; i < r.grid.resolution; ++i)
          csv += format_double(r.grid.coordinate(i)) + "," + format_double(r.grid.coordinate(j)) +
                 "," + format_double(r.grid.losses[j * r.grid.resolution + i]) + "\n";
      fs::create_directories(land_c.out);
      write_text_file((fs::path(land_c.out) / "landscape.csv").string(), csv);
      write_text_file((fs::path(land_c.out) / "delta.txt").string(),
                      "delta=" + format_double(r.delta) + "\n");
      for (const auto &w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "delta=" << format_double(r.delta) << "\n";
    } else if (*compare) {
      const CompareReport rep = compare_runs(runs[0], runs[1], first_n);
      const std::string text = rep.to_text();
      if (fs::path(cmp_c.out).has_parent_path())
        fs::create_directories(fs::path(cmp_c.out).parent_path());
      write_text_file(cmp_c.out, text);
      std::cout << text;
    } else if (*plot) {
      KeyValues kv = plot_c.config.empty() ? KeyValues{} : KeyValues::load(plot_c.config);
      PlotSpec spec;
      spec.x = kv.get("plot.x").value_or("iteration");
      spec.y = kv.get("plot.y").value_or("gde");
      spec.title = kv.get("plot.title").value_or("");
      if (!px.empty()) spec.x = px;
      if (!py.empty()) spec.y = py;
      if (!ptitle.empty()) spec.title = ptitle;
      spec.names = names;
      if (fs::path(plot_c.out).has_parent_path())
        fs::create_directories(fs::path(plot_c.out).parent_path());
      emit_plot(csvs, spec, plot_c.out);
      std::cout << "wrote " << plot_c.out << "\n";
    }
  } catch (const ValidationError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
