// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/compare.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "earlydrop/error.hpp"
#include "earlydrop/experiment.hpp"
#include "earlydrop/text_io.hpp"

namespace earlydrop {

double mean_grad_norm(const std::string &run_dir, std::int64_t n) {
  const CsvTable t = CsvTable::load((std::filesystem::path(run_dir) / "metrics.csv").string());
  const auto it = t.numbers("iteration");
  const auto g = t.numbers("grad_norm");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < it.size(); ++i) {
    if (it[i] >= static_cast<double>(n)) continue;
    sum += g[i];
    ++count;
  }
  return count == 0 ? std::nan("") : sum / static_cast<double>(count);
}

const CompareRow &CompareReport::row(const std::string &quantity) const {
  for (const auto &r : rows)
    if (r.quantity == quantity) return r;
  throw ValidationError("no comparison row '" + quantity + "'");
}

CompareReport compare_runs(const std::string &run_a_dir, const std::string &run_b_dir,
                           std::int64_t grad_norm_iterations) {
  CompareReport rep;
  rep.run_a = run_a_dir;
  rep.run_b = run_b_dir;
  const RunSummary a = summarize_run(run_a_dir);
  const RunSummary b = summarize_run(run_b_dir);

  auto add = [&](const std::string &name, double x, double y) {
    // Identical inputs give an exact zero, NaN included.
    const double d = (x == y || (std::isnan(x) && std::isnan(y))) ? 0.0 : y - x;
    rep.rows.push_back({name, x, y, d});
  };
  add("final_train_loss", a.final_train_loss, b.final_train_loss);
  add("final_test_loss", a.final_test_loss, b.final_test_loss);
  add("final_test_accuracy", a.final_test_accuracy, b.final_test_accuracy);
  add("gde_auc_early", a.gde_auc_early, b.gde_auc_early);
  add("grad_norm_mean_first_" + std::to_string(grad_norm_iterations),
      mean_grad_norm(run_a_dir, grad_norm_iterations),
      mean_grad_norm(run_b_dir, grad_norm_iterations));
  add("final_model_distance", a.final_model_distance, b.final_model_distance);

  const auto ka = KeyValues::load((std::filesystem::path(run_a_dir) / "config.txt").string());
  const auto kb = KeyValues::load((std::filesystem::path(run_b_dir) / "config.txt").string());
  bool seed_differs = false;
  auto note = [&](const std::string &key) {
    if (key == "train.seed") {
      seed_differs = true;
      return;
    }
    if (key == "run.name") return;
    rep.warnings.push_back("config differs: " + key + " (" + ka.get(key).value_or("<unset>") +
                           " vs " + kb.get(key).value_or("<unset>") + ")");
  };
  for (const auto &[k, v] : ka.items())
    if (kb.get(k) != v) note(k);
  for (const auto &[k, v] : kb.items())
    if (!ka.has(k)) note(k);
  rep.seed_only = seed_differs && rep.warnings.empty();
  return rep;
}

std::string CompareReport::to_text() const {
  std::string out = "a: " + run_a + "\nb: " + run_b + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %14s %14s %14s\n", "quantity", "a", "b", "change");
  out += line;
  for (const auto &r : rows) {
    std::snprintf(line, sizeof line, "%-28s %14.6g %14.6g %+14.6g\n", r.quantity.c_str(), r.a,
                  r.b, r.delta);
    out += line;
  }
  if (seed_only) out += "note: runs differ only in seed\n";
  for (const auto &w : warnings) out += "warning: " + w + "\n";
  return out;
}

} // namespace earlydrop
