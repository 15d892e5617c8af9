// SPDX-License-Identifier: Apache-2.0
// Shared helpers and brute-force oracles for the test binaries. The oracles
// are written independently of the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace earlydrop::testing {

inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("earlydrop_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline std::vector<double> random_vector(std::mt19937_64 &gen, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double &x : v) x = d(gen);
  return v;
}

namespace oracle {

// Cosine distance via long-double accumulation and the textbook formula.
inline double cosine_distance(const std::vector<double> &a, const std::vector<double> &b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  long double c = ab / (std::sqrt(aa) * std::sqrt(bb));
  c = std::clamp(c, -1.0L, 1.0L);
  return static_cast<double>(0.5L * (1.0L - c));
}

// Mean over all ordered pairs i != j, which equals the mean over i < j.
inline double gdv(const std::vector<std::vector<double>> &g) {
  long double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      if (i != j) {
        s += cosine_distance(g[i], g[j]);
        ++n;
      }
  return static_cast<double>(s / n);
}

inline double gde(const std::vector<std::vector<double>> &g, const std::vector<double> &ref) {
  long double s = 0;
  for (const auto &m : g) s += cosine_distance(m, ref);
  return static_cast<double>(s / g.size());
}

inline double distance(const std::vector<double> &a, const std::vector<double> &b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (static_cast<long double>(a[i]) - b[i]) * (a[i] - b[i]);
  return static_cast<double>(std::sqrt(s));
}

// Piecewise-linear integral by fine midpoint sampling inside each segment;
// exact for linear pieces up to rounding.
inline double auc(const std::vector<std::pair<std::int64_t, double>> &s, std::int64_t end) {
  long double total = 0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const long double x0 = s[i].first, x1 = s[i + 1].first;
    if (x0 >= end) break;
    const long double y0 = s[i].second, y1 = s[i + 1].second;
    const long double hi = std::min<long double>(x1, end);
    const int steps = 64;
    const long double h = (hi - x0) / steps;
    for (int k = 0; k < steps; ++k) {
      const long double xm = x0 + (k + 0.5L) * h;
      total += (y0 + (y1 - y0) * (xm - x0) / (x1 - x0)) * h;
    }
  }
  return static_cast<double>(total);
}

// Scans every pair of cells and keeps those at Manhattan distance 1.
inline double landscape_delta(const std::vector<double> &losses, std::size_t res) {
  long double s = 0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < losses.size(); ++p)
    for (std::size_t q = p + 1; q < losses.size(); ++q) {
      const long long dx = static_cast<long long>(p % res) - static_cast<long long>(q % res);
      const long long dy = static_cast<long long>(p / res) - static_cast<long long>(q / res);
      if (std::llabs(dx) + std::llabs(dy) != 1) continue;
      s += std::abs(static_cast<long double>(losses[p]) - losses[q]);
      ++n;
    }
  return static_cast<double>(s / n);
}

} // namespace oracle
} // namespace earlydrop::testing
