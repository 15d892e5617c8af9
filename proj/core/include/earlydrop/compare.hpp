// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace earlydrop {

struct CompareRow {
  std::string quantity;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0; // b - a
};

struct CompareReport {
  std::string run_a, run_b;
  std::vector<CompareRow> rows;
  /// Config keys (other than the seed) whose values differ.
  std::vector<std::string> warnings;
  bool seed_only = false;

  const CompareRow &row(const std::string &quantity) const;
  std::string to_text() const;
};

/// Compares two finished run directories. Grad-norm means cover the first
/// `grad_norm_iterations` iterations of metrics.csv.
CompareReport compare_runs(const std::string &run_a_dir, const std::string &run_b_dir,
                           std::int64_t grad_norm_iterations = 300);

/// Mean of metrics.csv grad_norm over iterations [0, n).
double mean_grad_norm(const std::string &run_dir, std::int64_t n);

} // namespace earlydrop
