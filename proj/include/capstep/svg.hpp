#pragma once

// Hand-rolled SVG renderings of the analysis artifacts: phase-space heat
// panels with zero-energy overlays, fall-probability curves, and
// orbital-energy series with per-step box plots.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <capstep/analysis.hpp>

namespace capstep {
namespace detail {

inline void svg_num(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  out += buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    if (ch == '&') out += "&amp;";
    else if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else out += ch;
  }
  return out;
}

// Maps a data rectangle onto a pixel rectangle (y axis flipped).
struct SvgFrame {
  double px = 0, py = 0, pw = 0, ph = 0;  // pixel rect, top-left origin
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;  // data bounds

  double sx(double x) const { return px + (x - x0) / (x1 - x0) * pw; }
  double sy(double y) const { return py + (y1 - y) / (y1 - y0) * ph; }
};

inline void svg_open(std::string& out, double w, double h) {
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
  svg_num(out, w);
  out += "\" height=\"";
  svg_num(out, h);
  out += "\" viewBox=\"0 0 ";
  svg_num(out, w);
  out += ' ';
  svg_num(out, h);
  out +=
      "\" font-family=\"sans-serif\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void svg_rect(std::string& out, double x, double y, double w, double h,
                     const std::string& fill,
                     const std::string& extra = std::string()) {
  out += "<rect x=\"";
  svg_num(out, x);
  out += "\" y=\"";
  svg_num(out, y);
  out += "\" width=\"";
  svg_num(out, w);
  out += "\" height=\"";
  svg_num(out, h);
  out += "\" fill=\"" + fill + "\"";
  out += extra;
  out += "/>\n";
}

inline void svg_line(std::string& out, double x1, double y1, double x2,
                     double y2, const std::string& stroke, double width = 1.0,
                     const std::string& extra = std::string()) {
  out += "<line x1=\"";
  svg_num(out, x1);
  out += "\" y1=\"";
  svg_num(out, y1);
  out += "\" x2=\"";
  svg_num(out, x2);
  out += "\" y2=\"";
  svg_num(out, y2);
  out += "\" stroke=\"" + stroke + "\" stroke-width=\"";
  svg_num(out, width);
  out += "\"";
  out += extra;
  out += "/>\n";
}

inline void svg_text(std::string& out, double x, double y,
                     const std::string& text, double size = 11.0,
                     const std::string& anchor = "start",
                     const std::string& extra = std::string()) {
  out += "<text x=\"";
  svg_num(out, x);
  out += "\" y=\"";
  svg_num(out, y);
  out += "\" font-size=\"";
  svg_num(out, size);
  out += "\" text-anchor=\"" + anchor + "\"";
  out += extra;
  out += ">" + svg_escape(text) + "</text>\n";
}

inline void svg_poly(std::string& out,
                     const std::vector<std::pair<double, double>>& pts,
                     const std::string& stroke, double width,
                     const std::string& fill = "none",
                     const std::string& extra = std::string()) {
  if (pts.empty()) return;
  out += fill == "none" ? "<polyline points=\"" : "<polygon points=\"";
  for (const auto& [x, y] : pts) {
    svg_num(out, x);
    out += ',';
    svg_num(out, y);
    out += ' ';
  }
  out += "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\" stroke-width=\"";
  svg_num(out, width);
  out += "\"";
  out += extra;
  out += "/>\n";
}

// Plain frame with five linear ticks per axis and centered axis labels.
inline void svg_axes(std::string& out, const SvgFrame& f,
                     const std::string& xlabel, const std::string& ylabel) {
  svg_rect(out, f.px, f.py, f.pw, f.ph, "none",
           " stroke=\"#444444\" stroke-width=\"1\"");
  char buf[40];
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    svg_line(out, f.sx(xv), f.py + f.ph, f.sx(xv), f.py + f.ph + 4, "#444444");
    std::snprintf(buf, sizeof buf, "%.3g", xv);
    svg_text(out, f.sx(xv), f.py + f.ph + 16, buf, 10, "middle");
    svg_line(out, f.px - 4, f.sy(yv), f.px, f.sy(yv), "#444444");
    std::snprintf(buf, sizeof buf, "%.3g", yv);
    svg_text(out, f.px - 6, f.sy(yv) + 3.5, buf, 10, "end");
  }
  svg_text(out, f.px + f.pw / 2, f.py + f.ph + 32, xlabel, 11, "middle");
  svg_text(out, f.px - 40, f.py + f.ph / 2, ylabel, 11, "middle",
           " transform=\"rotate(-90 " + [&] {
             std::string t;
             svg_num(t, f.px - 40);
             t += ' ';
             svg_num(t, f.py + f.ph / 2);
             return t;
           }() + ")\"");
}

inline const char* svg_palette(std::size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  return kColors[i % 6];
}

// White-to-red ramp for heat intensities in [0, 1].
inline std::string svg_heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int g = static_cast<int>(std::lround(255.0 * (1.0 - 0.85 * t)));
  char buf[10];
  std::snprintf(buf, sizeof buf, "#ff%02x%02x", g, g);
  return buf;
}

// Draws vy = slope*y clipped to the frame's data bounds.
inline void svg_energy_line(std::string& out, const SvgFrame& f,
                            double slope) {
  const double cands[2] = {slope > 0 ? f.y0 / slope : f.y1 / slope,
                           slope > 0 ? f.y1 / slope : f.y0 / slope};
  const double xa = std::max(f.x0, cands[0]);
  const double xb = std::min(f.x1, cands[1]);
  if (!(xa < xb)) return;
  svg_line(out, f.sx(xa), f.sy(slope * xa), f.sx(xb), f.sy(slope * xb),
           "#000000", 1.2, " stroke-dasharray=\"5 3\" class=\"zero-energy\"");
}

}  // namespace detail

// One heat panel per labeled map, two panels per row; the color scale is
// shared across panels so controllers can be compared directly.
inline std::string render_heatmap_svg(
    const std::vector<std::pair<std::string, PhaseSpaceHeatmap>>& panels) {
  if (panels.empty()) throw std::invalid_argument("svg: no heatmap panels");
  const double pw = 300, ph = 300, ml = 64, mt = 36, mr = 20, mb = 52;
  const std::size_t ncols = panels.size() >= 2 ? 2 : 1;
  const std::size_t nrows = (panels.size() + ncols - 1) / ncols;
  const double cell_w = ml + pw + mr, cell_h = mt + ph + mb;

  long long max_count = 1;
  for (const auto& [label, h] : panels)
    for (long long v : h.counts) max_count = std::max(max_count, v);

  std::string out;
  detail::svg_open(out, cell_w * ncols, cell_h * nrows);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& [label, h] = panels[p];
    const double ox = cell_w * (p % ncols), oy = cell_h * (p / ncols);
    detail::SvgFrame f{ox + ml,     oy + mt,     pw,          ph,
                       h.spec.y_min, h.spec.y_max, h.spec.vy_min,
                       h.spec.vy_max};
    out += "<g class=\"panel\">\n";
    const double cw = pw / h.spec.ny, chh = ph / h.spec.nvy;
    for (int iy = 0; iy < h.spec.ny; ++iy)
      for (int ivy = 0; ivy < h.spec.nvy; ++ivy) {
        const long long n = h.counts[h.idx(iy, ivy)];
        std::string fill;
        if (h.masked(iy, ivy) && n == 0)
          fill = "#ebebeb";
        else if (n == 0)
          fill = "#ffffff";
        else
          fill = detail::svg_heat_color(double(n) / double(max_count));
        detail::svg_rect(out, f.px + iy * cw, f.py + ph - (ivy + 1) * chh, cw,
                         chh, fill);
      }
    detail::svg_energy_line(out, f, h.c);
    detail::svg_energy_line(out, f, -h.c);
    detail::svg_axes(out, f, "y (m)", "vy (m/s)");
    char cap[64];
    std::snprintf(cap, sizeof cap, "%lld falls",
                  static_cast<long long>(h.falls));
    detail::svg_text(out, f.px, oy + 22, label + "  (" + cap + ")", 13);
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

// Fall probability versus push magnitude, one curve per labeled table.
inline std::string render_fallprob_svg(
    const std::vector<std::pair<std::string, FallProbabilityTable>>& curves) {
  if (curves.empty()) throw std::invalid_argument("svg: no fallprob curves");
  const double pw = 460, ph = 280, ml = 64, mt = 28, mr = 150, mb = 52;
  double xmax = 1.0;
  for (const auto& [label, t] : curves)
    if (!t.bins.empty()) xmax = std::max(xmax, t.bins.back().hi);

  std::string out;
  detail::svg_open(out, ml + pw + mr, mt + ph + mb);
  detail::SvgFrame f{ml, mt, pw, ph, 0.0, xmax, 0.0, 1.0};
  detail::svg_axes(out, f, "push impulse magnitude (Ns)",
                   "fall probability");
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& [label, t] = curves[i];
    std::vector<std::pair<double, double>> pts;
    for (const FallBin& b : t.bins) {
      if (b.empty) continue;
      pts.emplace_back(f.sx(0.5 * (b.lo + b.hi)), f.sy(b.probability));
    }
    detail::svg_poly(out, pts, detail::svg_palette(i), 1.8);
    const double ly = mt + 16.0 * (static_cast<double>(i) + 1.0);
    detail::svg_line(out, ml + pw + 12, ly - 4, ml + pw + 34, ly - 4,
                     detail::svg_palette(i), 2.0);
    detail::svg_text(out, ml + pw + 40, ly, label);
  }
  out += "</svg>\n";
  return out;
}

// Push-aligned excess-energy curves with interquartile bands on top, one
// box plot per step index and controller below, efficiencies in the legend.
inline std::string render_energy_svg(
    const std::vector<std::pair<std::string, EnergyStats>>& rows) {
  if (rows.empty()) throw std::invalid_argument("svg: no energy stats");
  const double pw = 460, ph = 230, ml = 64, mt = 28, mr = 190, mb = 52;
  const double gap = 40;

  double tmax = 0.1, emax = 1e-6;
  int max_step = 0;
  for (const auto& [label, st] : rows) {
    for (const SeriesPoint& pt : st.push_aligned) {
      tmax = std::max(tmax, pt.t);
      emax = std::max(emax, pt.q75);
      emax = std::max(emax, pt.mean);
    }
    for (const StepBox& b : st.step_boxes) {
      max_step = std::max(max_step, b.step);
      emax = std::max(emax, b.hi);
    }
  }

  std::string out;
  detail::svg_open(out, ml + pw + mr, mt + 2 * ph + gap + mb);
  detail::SvgFrame top{ml, mt, pw, ph, 0.0, tmax, 0.0, emax};
  detail::svg_axes(out, top, "time since push (s)", "excess energy");
  detail::SvgFrame bot{ml, mt + ph + gap, pw, ph, -0.5,
                       static_cast<double>(max_step) + 0.5, 0.0, emax};
  detail::svg_axes(out, bot, "steps after push", "excess energy");

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [label, st] = rows[i];
    const std::string color = detail::svg_palette(i);

    std::vector<std::pair<double, double>> band, mean;
    for (const SeriesPoint& pt : st.push_aligned)
      band.emplace_back(top.sx(pt.t), top.sy(pt.q25));
    for (auto it = st.push_aligned.rbegin(); it != st.push_aligned.rend();
         ++it)
      band.emplace_back(top.sx(it->t), top.sy(it->q75));
    detail::svg_poly(out, band, "none", 0.0, color, " fill-opacity=\"0.18\"");
    for (const SeriesPoint& pt : st.push_aligned)
      mean.emplace_back(top.sx(pt.t), top.sy(pt.mean));
    detail::svg_poly(out, mean, color, 1.8);

    // one box per step index, controllers side by side within the slot
    const double slot = bot.pw / (static_cast<double>(max_step) + 1.0);
    const double bw = std::min(14.0, slot / (2.0 * rows.size()));
    for (const StepBox& b : st.step_boxes) {
      const double cx =
          bot.sx(b.step) +
          (static_cast<double>(i) - (rows.size() - 1.0) / 2.0) * 1.3 * bw;
      detail::svg_line(out, cx, bot.sy(b.lo), cx, bot.sy(b.q25), color, 1.0);
      detail::svg_line(out, cx, bot.sy(b.q75), cx, bot.sy(b.hi), color, 1.0);
      detail::svg_rect(out, cx - bw / 2, bot.sy(b.q75), bw,
                       bot.sy(b.q25) - bot.sy(b.q75), "none",
                       " stroke=\"" + color + "\" class=\"stepbox\"");
      detail::svg_line(out, cx - bw / 2, bot.sy(b.median), cx + bw / 2,
                       bot.sy(b.median), color, 1.6);
    }

    char eff[80];
    std::snprintf(eff, sizeof eff, "%s: %.1f%%", label.c_str(),
                  100.0 * st.efficiency);
    const double ly = mt + 16.0 * (static_cast<double>(i) + 1.0);
    detail::svg_line(out, ml + pw + 12, ly - 4, ml + pw + 34, ly - 4, color,
                     2.0);
    detail::svg_text(out, ml + pw + 40, ly, eff);
  }
  detail::svg_text(out, ml + pw + 12, mt + 16.0 * (rows.size() + 1.5),
                   "legend: capture-step efficiency", 10);
  out += "</svg>\n";
  return out;
}

}  // namespace capstep
