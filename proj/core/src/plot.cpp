// SPDX-License-Identifier: Apache-2.0
#include "earlydrop/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "earlydrop/error.hpp"
#include "earlydrop/text_io.hpp"

namespace earlydrop {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 50;

const char *const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

} // namespace

std::string render_plot(const std::vector<std::string> &csv_paths, const PlotSpec &spec) {
  if (csv_paths.empty()) throw ValidationError("plot needs at least one CSV");
  std::vector<Series> series;
  for (std::size_t i = 0; i < csv_paths.size(); ++i) {
    const CsvTable t = CsvTable::load(csv_paths[i]);
    std::string missing;
    for (const auto *col : {&spec.x, &spec.y})
      if (!t.column(*col)) missing += (missing.empty() ? "" : ", ") + *col;
    if (!missing.empty())
      throw ValidationError(csv_paths[i] + ": missing column(s) " + missing);
    Series s;
    if (i < spec.names.size()) {
      s.name = spec.names[i];
    } else {
      const auto parent = std::filesystem::path(csv_paths[i]).parent_path().filename().string();
      s.name = parent.empty() ? std::filesystem::path(csv_paths[i]).stem().string() : parent;
    }
    const auto xs = t.numbers(spec.x), ys = t.numbers(spec.y);
    for (std::size_t r = 0; r < xs.size(); ++r)
      if (std::isfinite(xs[r]) && std::isfinite(ys[r])) s.points.emplace_back(xs[r], ys[r]);
    if (s.points.empty()) throw ValidationError(csv_paths[i] + ": empty series for " + spec.y);
    series.push_back(std::move(s));
  }

  double x0 = series[0].points[0].first, x1 = x0;
  double y0 = series[0].points[0].second, y1 = y0;
  for (const auto &s : series)
    for (const auto &[x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  // A flat range gets a unit-width window around it.
  if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
  if (y1 == y0) { y0 -= 0.5; y1 += 0.5; }

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) + "\" height=\"" +
       fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " + fmt(kHeight) + "\">\n";
  o += "<rect x=\"0\" y=\"0\" width=\"" + fmt(kWidth) + "\" height=\"" + fmt(kHeight) +
       "\" fill=\"white\"/>\n";
  const std::string title = spec.title.empty() ? spec.y + " vs " + spec.x : spec.title;
  o += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" +
       escape(title) + "</text>\n";
  o += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) +
       "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    o += "<text x=\"" + fmt(px(fx)) + "\" y=\"" + fmt(kTop + ph + 18) +
         "\" text-anchor=\"middle\" font-size=\"11\">" + tick(fx) + "</text>\n";
    o += "<text x=\"" + fmt(kLeft - 6) + "\" y=\"" + fmt(py(fy) + 4) +
         "\" text-anchor=\"end\" font-size=\"11\">" + tick(fy) + "</text>\n";
  }
  o += "<text x=\"" + fmt(kLeft + pw / 2) + "\" y=\"" + fmt(kHeight - 10) +
       "\" text-anchor=\"middle\" font-size=\"13\">" + escape(spec.x) + "</text>\n";
  o += "<text x=\"16\" y=\"" + fmt(kTop + ph / 2) + "\" text-anchor=\"middle\" font-size=\"13\" "
       "transform=\"rotate(-90 16 " + fmt(kTop + ph / 2) + ")\">" + escape(spec.y) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto &s = series[i];
    const std::string color = kColors[i % std::size(kColors)];
    if (s.points.size() == 1) {
      o += "<circle cx=\"" + fmt(px(s.points[0].first)) + "\" cy=\"" +
           fmt(py(s.points[0].second)) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
    } else {
      o += "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t p = 0; p < s.points.size(); ++p) {
        if (p) o += ' ';
        o += fmt(px(s.points[p].first)) + "," + fmt(py(s.points[p].second));
      }
      o += "\"/>\n";
    }
    const double ly = kTop + 14 + 18.0 * static_cast<double>(i);
    o += "<line x1=\"" + fmt(kWidth - kRight + 12) + "\" y1=\"" + fmt(ly - 4) + "\" x2=\"" +
         fmt(kWidth - kRight + 32) + "\" y2=\"" + fmt(ly - 4) + "\" stroke=\"" + color +
         "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + fmt(kWidth - kRight + 38) + "\" y=\"" + fmt(ly) + "\" font-size=\"11\">" +
         escape(s.name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

void emit_plot(const std::vector<std::string> &csv_paths, const PlotSpec &spec,
               const std::string &out_path) {
  const std::string svg = render_plot(csv_paths, spec);
  write_text_file(out_path, svg);
}

} // namespace earlydrop
