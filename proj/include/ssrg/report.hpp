// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run comparison tables and dependency-free SVG line plots.

#pragma once

#include "ssrg/analysis.hpp"
#include "ssrg/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ssrg {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

inline std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<PlotSeries>& series) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  constexpr double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::xml_escape(title)
    << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << detail::num(px(xv)) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt6(xv)
      << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << detail::num(py(yv) + 4) << "\" text-anchor=\"end\">" << fmt6(yv)
      << "</text>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
    << detail::xml_escape(xlabel) << "</text>\n";
  o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (T + H - B) / 2 << ")\">" << detail::xml_escape(ylabel) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = palette[s % (sizeof palette / sizeof *palette)];
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
      if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
      o << detail::num(px(series[s].x[i])) << ',' << detail::num(py(series[s].y[i])) << ' ';
    }
    o << "\"/>\n";
    const double ly = T + 16.0 * static_cast<double>(s) + 8;
    o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(series[s].name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// One row of the run comparison table: the target's erasure rate and the
/// non-target means of drift and consistency.
struct ComparisonRow {
  std::string method;
  std::string run;
  double erasure_rate = 0.0;
  double mmd2 = 0.0;
  double consistency = 0.0;
};

inline ComparisonRow summarize(const MetricReport& r, const std::string& run) {
  const std::size_t k = r.concepts.size();
  if (r.erasure_rate.size() != k || r.drift.size() != k || r.consistency.size() != k)
    throw FormatError(run + ": metrics arrays do not match the concept list");
  if (r.target < 0 || static_cast<std::size_t>(r.target) >= k) throw FormatError(run + ": metrics target out of range");
  ComparisonRow row{r.method, run, r.erasure_rate[static_cast<std::size_t>(r.target)], 0.0, 0.0};
  int n = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (static_cast<int>(i) == r.target) continue;
    row.mmd2 += r.drift[i];
    row.consistency += r.consistency[i];
    ++n;
  }
  if (n > 0) {
    row.mmd2 /= n;
    row.consistency /= n;
  }
  return row;
}

inline std::string comparison_csv(std::vector<ComparisonRow> rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.method < b.method; });
  std::ostringstream o;
  o << "method,run,erasure_rate,mmd2,consistency\n";
  for (const auto& r : rows)
    o << r.method << ',' << r.run << ',' << fmt6(r.erasure_rate) << ',' << fmt6(r.mmd2) << ','
      << fmt6(r.consistency) << '\n';
  return o.str();
}

}  // namespace ssrg
