#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kdisc/core/error.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/harness/report.hpp"

namespace kdisc::harness {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string rgb(double r, double g, double b) {
  char buf[16];
  auto c = [](double x) { return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Linear axis mapping [lo, hi] onto [a, b].
struct Scale {
  double lo, hi, a, b;
  double operator()(double v) const { return hi == lo ? 0.5 * (a + b) : a + (v - lo) / (hi - lo) * (b - a); }
};

std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.05, hi + 0.05};
  const double pad = 0.06 * (hi - lo);
  return {lo - pad, hi + pad};
}

void y_axis(Svg& svg, const Scale& y, double x0, double x1, int ticks) {
  for (int t = 0; t <= ticks; ++t) {
    const double v = y.lo + (y.hi - y.lo) * t / ticks;
    svg.line(x0, y(v), x1, y(v), "#e4e4e4", 1.0);
    svg.text(x0 - 6, y(v) + 4, fmt3(v), 10, "end");
  }
  svg.line(x0, y.a, x0, y.b, "#333", 1.0);
}

}  // namespace

std::string xml_escape(const std::string& s) {
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

Svg::Svg(double width, double height) : w_(width), h_(height) {}

Svg& Svg::rect(double x, double y, double w, double h, const std::string& fill, const std::string& cls,
               const std::string& title) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
           "\" fill=\"" + fill + "\"";
  if (!cls.empty()) body_ += " class=\"" + cls + "\"";
  if (title.empty()) {
    body_ += "/>\n";
  } else {
    body_ += "><title>" + xml_escape(title) + "</title></rect>\n";
  }
  return *this;
}

Svg& Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
           "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"/>\n";
  return *this;
}

Svg& Svg::circle(double cx, double cy, double r, const std::string& fill, const std::string& cls) {
  body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" + fill + "\"";
  if (!cls.empty()) body_ += " class=\"" + cls + "\"";
  body_ += "/>\n";
  return *this;
}

Svg& Svg::text(double x, double y, const std::string& s, double size, const std::string& anchor, double rotate) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) + "\" text-anchor=\"" +
           anchor + "\"";
  if (rotate != 0.0) body_ += " transform=\"rotate(" + num(rotate) + " " + num(x) + " " + num(y) + ")\"";
  body_ += ">" + xml_escape(s) + "</text>\n";
  return *this;
}

std::string Svg::str() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w_) + "\" height=\"" + num(h_) +
         "\" viewBox=\"0 0 " + num(w_) + " " + num(h_) + "\" font-family=\"sans-serif\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ + "</svg>\n";
}

std::string diverging_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // #3b4cc0 -> white -> #b40426
  if (t < 0.5) {
    const double u = t / 0.5;
    return rgb(lerp(0.231, 0.97, u), lerp(0.298, 0.97, u), lerp(0.753, 0.97, u));
  }
  const double u = (t - 0.5) / 0.5;
  return rgb(lerp(0.97, 0.706, u), lerp(0.97, 0.016, u), lerp(0.97, 0.149, u));
}

std::string sequential_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // dark purple -> teal -> light yellow
  if (t < 0.5) {
    const double u = t / 0.5;
    return rgb(lerp(0.267, 0.128, u), lerp(0.005, 0.567, u), lerp(0.329, 0.551, u));
  }
  const double u = (t - 0.5) / 0.5;
  return rgb(lerp(0.128, 0.993, u), lerp(0.567, 0.906, u), lerp(0.551, 0.144, u));
}

BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw DataError("box statistics of an empty group");
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] + f * (v[i + 1] - v[i]) : v[i];
  };
  BoxStats b;
  b.q1 = q(0.25);
  b.median = q(0.5);
  b.q3 = q(0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.min = b.q1;
  b.max = b.q3;
  for (double x : v) {
    if (x < lo || x > hi) {
      b.outliers.push_back(x);
    } else {
      b.min = std::min(b.min, x);
      b.max = std::max(b.max, x);
    }
  }
  return b;
}

std::string boxplot_svg(const std::string& title, const std::vector<std::string>& groups,
                        const std::vector<std::vector<double>>& values) {
  const double left = 70, right = 20, top = 40, bottom = 50, slot = 80;
  const double W = left + right + slot * static_cast<double>(groups.size()), H = 360;
  double lo = 1e300, hi = -1e300;
  for (const auto& g : values)
    for (double x : g) lo = std::min(lo, x), hi = std::max(hi, x);
  if (lo > hi) lo = 0, hi = 1;
  const auto [plo, phi] = padded_range(lo, hi);
  const Scale y{plo, phi, H - bottom, top};
  Svg svg(W, H);
  svg.text(W / 2, 22, title, 14, "middle");
  y_axis(svg, y, left, W - right, 5);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double cx = left + slot * (static_cast<double>(g) + 0.5);
    svg.text(cx, H - bottom + 18, groups[g], 11, "middle");
    if (values[g].empty()) continue;
    const auto b = box_stats(values[g]);
    const double bw = slot * 0.5;
    svg.line(cx, y(b.min), cx, y(b.q1), "#333");
    svg.line(cx, y(b.q3), cx, y(b.max), "#333");
    svg.line(cx - bw / 4, y(b.min), cx + bw / 4, y(b.min), "#333");
    svg.line(cx - bw / 4, y(b.max), cx + bw / 4, y(b.max), "#333");
    svg.rect(cx - bw / 2, y(b.q3), bw, std::max(0.5, y(b.q1) - y(b.q3)), "#9ecae1", "box",
             groups[g] + " median " + fmt3(b.median));
    svg.line(cx - bw / 2, y(b.median), cx + bw / 2, y(b.median), "#08306b", 2.0);
    for (double o : b.outliers) svg.circle(cx, y(o), 2.5, "#555", "outlier");
  }
  return svg.str();
}

std::string tukey_heatmap_svg(const std::string& title, const std::vector<std::string>& names,
                              const std::vector<std::vector<double>>& p) {
  const std::size_t k = names.size();
  const double cell = 60, left = 90, top = 50, legend = 60;
  const double W = left + cell * static_cast<double>(k > 0 ? k - 1 : 0) + legend + 40;
  const double H = top + cell * static_cast<double>(k > 0 ? k - 1 : 0) + 70;
  Svg svg(std::max(W, 260.0), H);
  svg.text(std::max(W, 260.0) / 2, 24, title, 14, "middle");
  // Rows 1..k-1, columns 0..row-1.
  for (std::size_t i = 1; i < k; ++i) {
    const double yy = top + cell * static_cast<double>(i - 1);
    svg.text(left - 6, yy + cell / 2 + 4, names[i], 11, "end");
    for (std::size_t j = 0; j < i; ++j) {
      const double xx = left + cell * static_cast<double>(j);
      const double pv = p[i][j];
      // Small p-values dark.
      const double t = std::clamp(std::log10(std::max(pv, 1e-6)) / -6.0, 0.0, 1.0);
      svg.rect(xx, yy, cell - 2, cell - 2, sequential_color(1.0 - t), "pair",
               names[i] + " vs " + names[j] + ": p_adj " + fmt3(pv));
      svg.text(xx + cell / 2 - 1, yy + cell / 2 + 4, pv < 0.001 ? "<.001" : fmt3(pv), 10, "middle");
      if (pv < 0.05) svg.text(xx + cell - 8, yy + 12, "*", 12, "middle");
    }
  }
  for (std::size_t j = 0; j + 1 < k; ++j)
    svg.text(left + cell * (static_cast<double>(j) + 0.5), top + cell * static_cast<double>(k - 1) + 16, names[j],
             11, "middle");
  svg.text(left, H - 14, "cells: Tukey-adjusted p; * marks p < 0.05", 10);
  return svg.str();
}

std::string calibration_svg(const std::string& title,
                            const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& curves) {
  const double W = 420, H = 420, left = 60, right = 120, top = 40, bottom = 50;
  const Scale x{0, 1, left, W - right};
  const Scale y{0, 1, H - bottom, top};
  Svg svg(W, H);
  svg.text(W / 2, 22, title, 14, "middle");
  y_axis(svg, y, left, W - right, 5);
  svg.line(left, H - bottom, W - right, H - bottom, "#333");
  for (int t = 0; t <= 5; ++t) svg.text(x(t / 5.0), H - bottom + 16, fmt3(t / 5.0), 10, "middle");
  svg.text((left + W - right) / 2, H - 12, "mean predicted probability", 11, "middle");
  svg.text(16, (top + H - bottom) / 2, "fraction transplanted", 11, "middle", -90);
  svg.line(x(0), y(0), x(1), y(1), "#999", 1.0);
  static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const std::string col = palette[c % 6];
    const auto& pts = curves[c].second;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      svg.line(x(pts[i].mean_pred), y(pts[i].frac_pos), x(pts[i + 1].mean_pred), y(pts[i + 1].frac_pos), col, 1.8);
    for (const auto& pt : pts) svg.circle(x(pt.mean_pred), y(pt.frac_pos), 3, col, "point");
    svg.line(W - right + 10, top + 16 * static_cast<double>(c) + 6, W - right + 26,
             top + 16 * static_cast<double>(c) + 6, col, 3);
    svg.text(W - right + 30, top + 16 * static_cast<double>(c) + 10, curves[c].first, 11);
  }
  return svg.str();
}

std::string shap_bar_svg(const std::string& title, const std::vector<std::string>& features,
                         const std::vector<double>& values) {
  const double left = 230, right = 60, top = 40, bar = 22;
  const double W = 620, H = top + bar * static_cast<double>(features.size()) + 50;
  double hi = 0;
  for (double v : values) hi = std::max(hi, v);
  if (hi <= 0) hi = 1;
  const Scale x{0, hi, left, W - right};
  Svg svg(W, H);
  svg.text(W / 2, 22, title, 14, "middle");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double yy = top + bar * static_cast<double>(i);
    svg.text(left - 6, yy + bar / 2 + 4, features[i], 11, "end");
    svg.rect(left, yy + 3, std::max(0.5, x(values[i]) - left), bar - 6, "#3182bd", "bar",
             features[i] + ": " + fmt3(values[i]));
    svg.text(x(values[i]) + 4, yy + bar / 2 + 4, fmt3(values[i]), 10);
  }
  svg.line(left, top, left, H - 50, "#333");
  svg.text((left + W - right) / 2, H - 16, "mean |SHAP value| (probability units)", 11, "middle");
  return svg.str();
}

std::string beeswarm_svg(const std::string& title, const std::vector<std::string>& features,
                         const std::vector<std::vector<SwarmPoint>>& points) {
  const double left = 230, right = 40, top = 40, row = 28;
  const double W = 680, H = top + row * static_cast<double>(features.size()) + 60;
  double lim = 0;
  for (const auto& r : points)
    for (const auto& p : r) lim = std::max(lim, std::abs(p.phi));
  if (lim <= 0) lim = 1;
  const Scale x{-lim * 1.05, lim * 1.05, left, W - right};
  Svg svg(W, H);
  svg.text(W / 2, 22, title, 14, "middle");
  svg.line(x(0), top, x(0), H - 60, "#999");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double yc = top + row * (static_cast<double>(i) + 0.5);
    svg.text(left - 6, yc + 4, features[i], 11, "end");
    // Stack points falling into the same horizontal bucket.
    std::vector<int> used(200, 0);
    for (const auto& p : points[i]) {
      const double px = x(p.phi);
      const auto bucket = static_cast<std::size_t>(std::clamp((px - left) / (W - left - right) * 199.0, 0.0, 199.0));
      const int k = used[bucket]++;
      const double off = (k % 2 == 0 ? 1 : -1) * 2.2 * ((k + 1) / 2);
      svg.circle(px, yc + std::clamp(off, -row / 2 + 2, row / 2 - 2), 2.2, diverging_color(p.value_rank), "dot");
    }
  }
  svg.text((left + W - right) / 2, H - 30, "SHAP value (probability units)", 11, "middle");
  svg.text(left, H - 12, "colour: feature value, low (blue) to high (red)", 10);
  return svg.str();
}

}  // namespace kdisc::harness
