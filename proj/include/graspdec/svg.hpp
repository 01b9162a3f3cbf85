#pragma once

// Minimal SVG 1.1 writer. Coordinates are printed with fixed precision so the
// output is byte-stable across runs.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace graspdec::svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Rgb {
  int r = 0, g = 0, b = 0;
};

inline std::string hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

// Blue-white-red, v in [-1, 1]; 0 maps to white.
inline Rgb diverging(double v) {
  v = std::clamp(v, -1.0, 1.0);
  auto mix = [](int a, int b, double t) { return static_cast<int>(std::lround(a + (b - a) * t)); };
  if (v < 0.0) return {mix(255, 33, -v), mix(255, 102, -v), mix(255, 172, -v)};
  return {mix(255, 178, v), mix(255, 24, v), mix(255, 43, v)};
}

inline const std::array<std::string_view, 6>& palette() {
  static const std::array<std::string_view, 6> p{"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  return p;
}

class Document {
 public:
  Document(double width, double height) : width_(width), height_(height) {}

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view extra = "") {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
             "\" fill=\"" + std::string(fill) + "\"" + attr(extra) + "/>\n";
  }

  void circle(double cx, double cy, double r, std::string_view fill, std::string_view stroke = "none",
              double stroke_width = 1.0) {
    body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" +
             std::string(fill) + "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(stroke_width) +
             "\"/>\n";
  }

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            std::string_view extra = "") {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
             "\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width) + "\"" + attr(extra) + "/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke, double width = 1.5) {
    std::string p;
    for (const auto& [x, y] : pts) p += num(x) + "," + num(y) + " ";
    if (!p.empty()) p.pop_back();
    body_ += "<polyline points=\"" + p + "\" fill=\"none\" stroke=\"" + std::string(stroke) +
             "\" stroke-width=\"" + num(width) + "\"/>\n";
  }

  void path(std::string_view d, std::string_view fill, std::string_view stroke, double width = 1.0) {
    body_ += "<path d=\"" + std::string(d) + "\" fill=\"" + std::string(fill) + "\" stroke=\"" +
             std::string(stroke) + "\" stroke-width=\"" + num(width) + "\"/>\n";
  }

  void text(double x, double y, std::string_view content, double size = 12.0, std::string_view anchor = "start") {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" + num(size) +
             "\" text-anchor=\"" + std::string(anchor) + "\">" + escape(content) + "</text>\n";
  }

  void raw(std::string_view s) { body_ += s; }

  std::string str() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) +
           "\">\n" + body_ + "</svg>\n";
  }

 private:
  static std::string attr(std::string_view extra) { return extra.empty() ? "" : " " + std::string(extra); }

  double width_, height_;
  std::string body_;
};

// Axis-aligned line chart: one polyline per series, shared x values.
struct Series {
  std::string name;
  std::vector<double> y;
};

inline std::string line_chart(std::string_view title, std::string_view x_label, const std::vector<double>& x,
                              const std::vector<Series>& series, std::vector<double> vlines = {},
                              std::vector<double> hlines = {}) {
  constexpr double W = 560, H = 360, L = 60, R = 20, T = 40, B = 50;
  Document doc(W, H);
  doc.rect(0, 0, W, H, "#ffffff");
  double x0 = x.empty() ? 0.0 : x.front(), x1 = x.empty() ? 1.0 : x.back();
  double y0 = 0.0, y1 = 0.0;
  bool first = true;
  for (const auto& s : series) {
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      if (first) y0 = y1 = v, first = false;
      y0 = std::min(y0, v);
      y1 = std::max(y1, v);
    }
  }
  for (double h : hlines) y0 = std::min(y0, h), y1 = std::max(y1, h);
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

  doc.line(L, H - B, W - R, H - B, "#000000");
  doc.line(L, T, L, H - B, "#000000");
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", xv);
    doc.text(px(xv), H - B + 16, buf, 10, "middle");
    std::snprintf(buf, sizeof buf, "%.2f", yv);
    doc.text(L - 6, py(yv) + 3, buf, 10, "end");
  }
  for (double v : vlines) doc.line(px(v), T, px(v), H - B, "#888888", 1.0, "stroke-dasharray=\"4,3\"");
  for (double h : hlines) doc.line(L, py(h), W - R, py(h), "#888888", 1.0, "stroke-dasharray=\"4,3\"");
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i) pts.emplace_back(px(x[i]), py(series[s].y[i]));
    const auto color = palette()[s % palette().size()];
    doc.polyline(pts, color);
    doc.text(W - R - 4, T + 14.0 * static_cast<double>(s + 1), series[s].name, 11, "end");
    doc.rect(W - R - 4 - 8.0 * static_cast<double>(series[s].name.size()) - 16, T + 14.0 * static_cast<double>(s + 1) - 8, 10, 3,
             color);
  }
  doc.text(W / 2, 22, title, 14, "middle");
  doc.text(W / 2, H - 12, x_label, 12, "middle");
  return doc.str();
}

}  // namespace graspdec::svg
