// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "earlydrop/experiment.hpp"
#include "earlydrop/text_io.hpp"

namespace earlydrop {

/// One swept key and the values it takes.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0; // sample standard deviation; 0 with fewer than 2 runs
};

MeanStd mean_std(const std::vector<double> &xs);

/// One cell of the cross product of axis values, aggregated over seeds.
struct SweepCell {
  std::vector<std::pair<std::string, std::string>> overrides;
  std::size_t runs = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;
  MeanStd final_train_loss;
  MeanStd final_test_loss;
  MeanStd final_test_accuracy;
  MeanStd gde_auc_early;
  /// Highest mean test accuracy among cells that agree on every axis except
  /// drop.rate (or among all cells when drop.rate is not swept).
  bool best = false;
};

struct SweepTable {
  std::vector<std::string> axis_keys;
  std::vector<SweepCell> cells;

  std::string to_csv() const;
};

/// Runs every (cell, seed) pair into `out_dir/cell<i>_seed<s>`, writes
/// `out_dir/sweep.csv`, and returns the table. A failed run is recorded in
/// its cell and the sweep continues. Runs are spread over `threads` workers.
SweepTable run_sweep(const KeyValues &base, const std::vector<SweepAxis> &axes,
                     const std::vector<std::uint64_t> &seeds, const std::string &out_dir,
                     std::size_t threads = 1);

/// Parses "key=v1,v2,...".
SweepAxis parse_axis(const std::string &spec);

} // namespace earlydrop
