// Copyright 2026 The TypoLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TYPOLAB_SVG_HPP_
#define TYPOLAB_SVG_HPP_

// Plain SVG charts. Every chart comes with a CSV of exactly the plotted
// numbers.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "typolab/detector.hpp"
#include "typolab/harness.hpp"

namespace typolab {

struct Plot {
  std::string svg;
  std::string csv;
};

namespace svg {

inline std::string num(double v, int precision = 2) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default:
        out += (static_cast<unsigned char>(c) < 0x20) ? '?' : c;
    }
  }
  return out;
}

inline std::string header(double w, double h, std::string_view title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w, 0) + "\" height=\"" +
         num(h, 0) + "\" viewBox=\"0 0 " + num(w, 0) + " " + num(h, 0) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" "
         "height=\"100%\" fill=\"white\"/>\n<text x=\"" +
         num(w / 2, 1) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
         escape(title) + "</text>\n";
}

inline std::string text(double x, double y, std::string_view s,
                        std::string_view anchor = "middle", double rotate = 0.0) {
  std::string out = "<text x=\"" + num(x, 1) + "\" y=\"" + num(y, 1) + "\" text-anchor=\"" +
                    std::string(anchor) + "\"";
  if (rotate != 0.0) {
    out += " transform=\"rotate(" + num(rotate, 0) + " " + num(x, 1) + " " + num(y, 1) + ")\"";
  }
  return out + ">" + escape(s) + "</text>\n";
}

inline std::string rect(double x, double y, double w, double h, std::string_view fill) {
  return "<rect x=\"" + num(x, 1) + "\" y=\"" + num(y, 1) + "\" width=\"" + num(w, 1) +
         "\" height=\"" + num(h, 1) + "\" fill=\"" + std::string(fill) + "\"/>\n";
}

inline std::string line(double x1, double y1, double x2, double y2,
                        std::string_view stroke = "black") {
  return "<line x1=\"" + num(x1, 1) + "\" y1=\"" + num(y1, 1) + "\" x2=\"" + num(x2, 1) +
         "\" y2=\"" + num(y2, 1) + "\" stroke=\"" + std::string(stroke) + "\"/>\n";
}

inline std::string rgb(double r, double g, double b) {
  char buf[16];
  auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255)); };
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

// Blue for negative, white at zero, red for positive; v in [-1, 1].
inline std::string diverging(double v) {
  v = std::clamp(v, -1.0, 1.0);
  return v >= 0 ? rgb(1.0, 1.0 - v, 1.0 - v) : rgb(1.0 + v, 1.0 + v, 1.0);
}

// White to dark blue; v in [0, 1].
inline std::string sequential(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return rgb(1.0 - 0.9 * v, 1.0 - 0.75 * v, 1.0 - 0.35 * v);
}

inline constexpr std::string_view kPalette[] = {"#4e79a7", "#e15759", "#59a14f",
                                                 "#f28e2b", "#b07aa1", "#76b7b2"};

inline std::string fmt(double v) { return format_number(v); }

}  // namespace svg

// Grouped bars of the percentage of selected units per relative-depth bin.
inline Plot plot_layer_hist(const std::vector<std::pair<std::string, LayerDistribution>>& series,
                            std::string_view title = "Selected units per relative depth") {
  TYPOLAB_REQUIRE(!series.empty(), ErrorCode::kInvalidArgument, "nothing to plot");
  const size_t bins = series.front().second.bins.size();
  for (const auto& [name, d] : series) {
    TYPOLAB_REQUIRE(d.bins.size() == bins, ErrorCode::kShapeMismatch,
                    "distributions differ in bin count");
  }
  const double w = 120.0 + 70.0 * static_cast<double>(bins), h = 320.0;
  const double left = 60, right = w - 20, top = 40, bottom = h - 60;
  double ymax = 0.0;
  for (const auto& [name, d] : series) {
    for (const auto& b : d.bins) ymax = std::max(ymax, b.percent);
  }
  ymax = ymax > 0 ? std::ceil(ymax / 10.0) * 10.0 : 100.0;
  Plot p;
  p.csv = "series,depth_begin,depth_end,count,percent\n";
  p.svg = svg::header(w, h, title);
  p.svg += svg::line(left, bottom, right, bottom) + svg::line(left, top, left, bottom);
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    const double y = bottom - (bottom - top) * k / 4.0;
    p.svg += svg::text(left - 6, y + 4, svg::num(v, 0), "end");
  }
  p.svg += svg::text(16, (top + bottom) / 2, "percent", "middle", -90);
  p.svg += svg::text((left + right) / 2, h - 12, "relative depth");
  const double slot = (right - left) / static_cast<double>(bins);
  const double bar = slot * 0.8 / static_cast<double>(series.size());
  for (size_t s = 0; s < series.size(); ++s) {
    const auto& [name, d] = series[s];
    const auto colour = svg::kPalette[s % std::size(svg::kPalette)];
    for (size_t b = 0; b < bins; ++b) {
      const auto& bin = d.bins[b];
      const double x = left + slot * static_cast<double>(b) + slot * 0.1 + bar * static_cast<double>(s);
      const double bh = (bottom - top) * bin.percent / ymax;
      p.svg += svg::rect(x, bottom - bh, bar, bh, colour);
      p.csv += name + "," + svg::fmt(bin.depth_begin) + "," + svg::fmt(bin.depth_end) + "," +
               std::to_string(bin.count) + "," + svg::fmt(bin.percent) + "\n";
    }
    p.svg += svg::rect(right - 150, top + 14.0 * static_cast<double>(s), 10, 10, colour);
    p.svg += svg::text(right - 136, top + 9 + 14.0 * static_cast<double>(s), name, "start");
  }
  for (size_t b = 0; b < bins; ++b) {
    const auto& bin = series.front().second.bins[b];
    p.svg += svg::text(left + slot * (static_cast<double>(b) + 0.5), bottom + 16,
                       svg::num(bin.depth_begin, 1) + "-" + svg::num(bin.depth_end, 1));
  }
  p.svg += "</svg>\n";
  return p;
}

// Layer x unit grid of delta with a colour scale symmetric around zero.
inline Plot plot_delta_heatmap(const std::vector<UnitScore>& scores,
                               std::string_view title = "Delta per head") {
  TYPOLAB_REQUIRE(!scores.empty(), ErrorCode::kInvalidArgument, "nothing to plot");
  int layers = 0, units = 0;
  double vmax = 0.0;
  for (const auto& s : scores) {
    layers = std::max(layers, s.layer + 1);
    units = std::max(units, s.index + 1);
    vmax = std::max(vmax, std::abs(s.delta));
  }
  if (vmax == 0.0) vmax = 1.0;
  const double cell = std::clamp(480.0 / std::max(units, layers), 4.0, 36.0);
  const double left = 60, top = 40;
  const double w = left + cell * units + 110, h = top + cell * layers + 50;
  Plot p;
  p.csv = "layer,index,delta\n";
  p.svg = svg::header(w, h, title);
  for (const auto& s : scores) {
    p.svg += svg::rect(left + cell * s.index, top + cell * s.layer, cell, cell,
                       svg::diverging(s.delta / vmax));
    p.csv += std::to_string(s.layer) + "," + std::to_string(s.index) + "," +
             svg::fmt(s.delta) + "\n";
  }
  for (int l = 0; l < layers; ++l) {
    p.svg += svg::text(left - 6, top + cell * (l + 0.5) + 4, std::to_string(l), "end");
  }
  p.svg += svg::text(16, top + cell * layers / 2, "layer", "middle", -90);
  p.svg += svg::text(left + cell * units / 2, top + cell * layers + 18, "index");
  const double lx = left + cell * units + 20;
  for (int k = 0; k < 20; ++k) {
    const double v = 1.0 - 2.0 * k / 19.0;
    p.svg += svg::rect(lx, top + 8.0 * k, 14, 8, svg::diverging(v));
  }
  p.svg += svg::text(lx + 18, top + 8, svg::num(vmax, 4), "start");
  p.svg += svg::text(lx + 18, top + 84, "0", "start");
  p.svg += svg::text(lx + 18, top + 160, svg::num(-vmax, 4), "start");
  p.svg += "</svg>\n";
  return p;
}

struct AttentionPanel {
  std::string name;                 // e.g. "clean"
  std::vector<std::string> labels;  // token strings
  Mat<double> scores;               // query x key
};

// Side-by-side attention maps of one head, one panel per variant.
inline Plot plot_attention_map(const std::vector<AttentionPanel>& panels,
                               std::string_view title = "Attention") {
  TYPOLAB_REQUIRE(!panels.empty(), ErrorCode::kInvalidArgument, "nothing to plot");
  Eigen::Index n = 0;
  for (const auto& panel : panels) n = std::max(n, panel.scores.rows());
  const double cell = std::clamp(360.0 / static_cast<double>(std::max<Eigen::Index>(n, 1)), 3.0, 16.0);
  const double margin = 90, gap = 30;
  const double pw = cell * static_cast<double>(n);
  const double w = margin + static_cast<double>(panels.size()) * (pw + gap + margin);
  const double h = 60 + pw + margin;
  Plot p;
  p.csv = "panel,query,key,score\n";
  p.svg = svg::header(w, h, title);
  for (size_t k = 0; k < panels.size(); ++k) {
    const auto& panel = panels[k];
    const double x0 = margin + static_cast<double>(k) * (pw + gap + margin);
    const double y0 = 40;
    p.svg += svg::text(x0 + pw / 2, y0 - 6, panel.name);
    for (Eigen::Index q = 0; q < panel.scores.rows(); ++q) {
      for (Eigen::Index c = 0; c <= q && c < panel.scores.cols(); ++c) {
        const double v = panel.scores(q, c);
        p.svg += svg::rect(x0 + cell * static_cast<double>(c), y0 + cell * static_cast<double>(q),
                           cell, cell, svg::sequential(v));
        p.csv += panel.name + "," + std::to_string(q) + "," + std::to_string(c) + "," +
                 svg::fmt(v) + "\n";
      }
      if (static_cast<size_t>(q) < panel.labels.size() && cell >= 6) {
        p.svg += "<text x=\"" + svg::num(x0 - 4, 1) + "\" y=\"" +
                 svg::num(y0 + cell * (static_cast<double>(q) + 0.8), 1) +
                 "\" text-anchor=\"end\" font-size=\"" + svg::num(cell * 0.8, 1) + "\">" +
                 svg::escape(panel.labels[static_cast<size_t>(q)]) + "</text>\n";
      }
    }
  }
  p.svg += "</svg>\n";
  return p;
}

// Accuracy against the number of typos, one line per series.
inline Plot plot_accuracy_curve(
    const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& series,
    std::string_view title = "Accuracy against number of typos") {
  TYPOLAB_REQUIRE(!series.empty(), ErrorCode::kInvalidArgument, "nothing to plot");
  double tmax = 1.0;
  for (const auto& [name, pts] : series) {
    for (const auto& pt : pts) tmax = std::max(tmax, static_cast<double>(pt.t));
  }
  const double w = 480, h = 320, left = 60, right = w - 20, top = 40, bottom = h - 50;
  auto px = [&](double t) { return left + (right - left) * t / tmax; };
  auto py = [&](double a) { return bottom - (bottom - top) * a; };
  Plot p;
  p.csv = "series,t,accuracy,samples\n";
  p.svg = svg::header(w, h, title);
  p.svg += svg::line(left, bottom, right, bottom) + svg::line(left, top, left, bottom);
  for (int k = 0; k <= 4; ++k) {
    p.svg += svg::text(left - 6, py(k / 4.0) + 4, svg::num(k / 4.0, 2), "end");
  }
  p.svg += svg::text((left + right) / 2, h - 12, "number of typos t");
  p.svg += svg::text(16, (top + bottom) / 2, "accuracy", "middle", -90);
  for (size_t s = 0; s < series.size(); ++s) {
    const auto& [name, pts] = series[s];
    const auto colour = std::string(svg::kPalette[s % std::size(svg::kPalette)]);
    std::string path;
    for (const auto& pt : pts) {
      path += (path.empty() ? "M" : " L") + svg::num(px(static_cast<double>(pt.t)), 1) + " " +
              svg::num(py(pt.accuracy), 1);
      p.svg += "<circle cx=\"" + svg::num(px(static_cast<double>(pt.t)), 1) + "\" cy=\"" +
               svg::num(py(pt.accuracy), 1) + "\" r=\"3\" fill=\"" + colour + "\"/>\n";
      p.csv += name + "," + std::to_string(pt.t) + "," + svg::fmt(pt.accuracy) + "," +
               std::to_string(pt.samples) + "\n";
    }
    p.svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + colour + "\"/>\n";
    p.svg += svg::text(right - 10, top + 12 + 14.0 * static_cast<double>(s), name, "end");
  }
  for (const auto& pt : series.front().second) {
    p.svg += svg::text(px(static_cast<double>(pt.t)), bottom + 16, std::to_string(pt.t));
  }
  p.svg += "</svg>\n";
  return p;
}

}  // namespace typolab

#endif  // TYPOLAB_SVG_HPP_
