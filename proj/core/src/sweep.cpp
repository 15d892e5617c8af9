// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/sweep.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "earlydrop/config.hpp"
#include "earlydrop/diagnostics.hpp"
#include "earlydrop/error.hpp"

namespace earlydrop {

MeanStd mean_std(const std::vector<double> &xs) {
  MeanStd r;
  if (xs.empty()) {
    r.mean = r.std = std::nan("");
    return r;
  }
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return r;
}

SweepAxis parse_axis(const std::string &spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("sweep axis '" + spec + "' must look like key=v1,v2");
  SweepAxis a;
  a.key = spec.substr(0, eq);
  std::size_t start = eq + 1;
  while (start <= spec.size()) {
    auto comma = spec.find(',', start);
    if (comma == std::string::npos) comma = spec.size();
    if (comma > start) a.values.push_back(spec.substr(start, comma - start));
    start = comma + 1;
  }
  if (a.values.empty()) throw ValidationError("sweep axis '" + a.key + "' has no values");
  return a;
}

SweepTable run_sweep(const KeyValues &base, const std::vector<SweepAxis> &axes,
                     const std::vector<std::uint64_t> &seeds, const std::string &out_dir,
                     std::size_t threads) {
  if (seeds.empty()) throw ValidationError("sweep needs at least one seed");
  SweepTable table;
  std::size_t n_cells = 1;
  for (const auto &a : axes) {
    if (a.values.empty()) throw ValidationError("sweep axis '" + a.key + "' has no values");
    table.axis_keys.push_back(a.key);
    n_cells *= a.values.size();
  }

  // Cross product, last axis fastest. Every cell config is validated up front.
  std::vector<ExperimentConfig> configs;
  for (std::size_t c = 0; c < n_cells; ++c) {
    SweepCell cell;
    KeyValues kv = base;
    std::size_t rem = c;
    std::vector<std::size_t> pick(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pick[a] = rem % axes[a].values.size();
      rem /= axes[a].values.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      apply_override(kv, axes[a].key, axes[a].values[pick[a]]);
      cell.overrides.emplace_back(axes[a].key, axes[a].values[pick[a]]);
    }
    ExperimentConfig cfg = ExperimentConfig::from_keys(kv);
    (void)cfg.validate();
    configs.push_back(std::move(cfg));
    table.cells.push_back(std::move(cell));
  }

  std::filesystem::create_directories(out_dir);
  struct Outcome {
    bool ok = false;
    RunSummary summary;
    std::string error;
  };
  std::vector<Outcome> outcomes(n_cells * seeds.size());
  parallel_for(outcomes.size(), threads, [&](std::size_t job) {
    const std::size_t c = job / seeds.size(), s = job % seeds.size();
    ExperimentConfig cfg = configs[c];
    cfg.seed = seeds[s];
    const std::string dir = (std::filesystem::path(out_dir) /
                             ("cell" + std::to_string(c) + "_seed" + std::to_string(seeds[s])))
                                .string();
    try {
      outcomes[job].summary = run_experiment(cfg, dir);
      outcomes[job].ok = true;
    } catch (const std::exception &e) {
      outcomes[job].error = e.what();
    }
  });

  for (std::size_t c = 0; c < n_cells; ++c) {
    SweepCell &cell = table.cells[c];
    std::vector<double> tl, vl, va, auc;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const Outcome &o = outcomes[c * seeds.size() + s];
      if (!o.ok) {
        ++cell.failed;
        cell.failures.push_back("seed " + std::to_string(seeds[s]) + ": " + o.error);
        continue;
      }
      ++cell.runs;
      tl.push_back(o.summary.final_train_loss);
      vl.push_back(o.summary.final_test_loss);
      va.push_back(o.summary.final_test_accuracy);
      if (std::isfinite(o.summary.gde_auc_early)) auc.push_back(o.summary.gde_auc_early);
    }
    cell.final_train_loss = mean_std(tl);
    cell.final_test_loss = mean_std(vl);
    cell.final_test_accuracy = mean_std(va);
    cell.gde_auc_early = mean_std(auc);
  }

  // Best drop rate per setting of the remaining axes.
  std::map<std::string, std::size_t> best_in_group;
  for (std::size_t c = 0; c < n_cells; ++c) {
    const SweepCell &cell = table.cells[c];
    if (cell.runs == 0) continue;
    std::string group;
    for (const auto &[k, v] : cell.overrides)
      if (k != "drop.rate") group += k + "=" + v + ";";
    auto it = best_in_group.find(group);
    if (it == best_in_group.end() ||
        cell.final_test_accuracy.mean > table.cells[it->second].final_test_accuracy.mean)
      best_in_group[group] = c;
  }
  for (const auto &[group, c] : best_in_group) table.cells[c].best = true;

  write_text_file((std::filesystem::path(out_dir) / "sweep.csv").string(), table.to_csv());
  return table;
}

std::string SweepTable::to_csv() const {
  std::string out = "cell";
  for (const auto &k : axis_keys) out += "," + k;
  out += ",runs,failed,final_train_loss_mean,final_train_loss_std,final_test_loss_mean,"
         "final_test_loss_std,final_test_accuracy_mean,final_test_accuracy_std,"
         "gde_auc_early_mean,gde_auc_early_std,best\n";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const SweepCell &cell = cells[c];
    out += std::to_string(c);
    for (const auto &[k, v] : cell.overrides) out += "," + v;
    out += "," + std::to_string(cell.runs) + "," + std::to_string(cell.failed);
    for (const MeanStd &m : {cell.final_train_loss, cell.final_test_loss,
                             cell.final_test_accuracy, cell.gde_auc_early})
      out += "," + format_double(m.mean) + "," + format_double(m.std);
    out += cell.best ? ",1\n" : ",0\n";
  }
  return out;
}

} // namespace earlydrop
