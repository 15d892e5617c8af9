// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace earlydrop {

struct PlotSpec {
  std::string x = "iteration";
  std::string y = "gde";
  std::string title;
  /// Legend labels, one per CSV; defaults to the parent directory name.
  std::vector<std::string> names;
};

/// Renders one standalone SVG line plot with a series per CSV. Throws
/// ValidationError naming any missing column, or when a series is empty;
/// nothing is written in either case. Output bytes depend only on inputs.
std::string render_plot(const std::vector<std::string> &csv_paths, const PlotSpec &spec);

/// render_plot, written to `out_path`.
void emit_plot(const std::vector<std::string> &csv_paths, const PlotSpec &spec,
               const std::string &out_path);

} // namespace earlydrop
