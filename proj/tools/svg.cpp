#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace meanfield::svg {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

std::string header(const Axes& a) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(kWidth) + "\" height=\"" +
       num(kHeight) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(a.title) +
       "</text>\n";
  s += "<text x=\"" + num(kWidth / 2) + "\" y=\"" + num(kHeight - 10) + "\" text-anchor=\"middle\">" +
       escape(a.x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num(kHeight / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num(kHeight / 2) + ")\">" + escape(a.y_label) + "</text>\n";
  return s;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-300) {
      const double pad = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
      lo -= pad;
      hi += pad;
    }
  }
};

double tr(double v, bool log) { return log ? (v > 0.0 ? std::log10(v) : std::numeric_limits<double>::quiet_NaN()) : v; }

std::string ticks(const Range& rx, const Range& ry, bool log_x, bool log_y) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string s = "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" +
                  num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = i / 4.0;
    const double vx = rx.lo + fx * (rx.hi - rx.lo);
    const double px = kLeft + fx * pw;
    s += "<line x1=\"" + num(px) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px) + "\" y2=\"" +
         num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(px) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         num(log_x ? std::pow(10.0, vx) : vx) + "</text>\n";
    const double vy = ry.lo + fx * (ry.hi - ry.lo);
    const double py = kTop + ph - fx * ph;
    s += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(py) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py + 4) + "\" text-anchor=\"end\">" +
         num(log_y ? std::pow(10.0, vy) : vy) + "</text>\n";
  }
  return s;
}

}  // namespace

std::string line_plot(const Axes& axes, const std::vector<Series>& series) {
  Range rx, ry;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      rx.add(tr(s.x[i], axes.log_x));
      ry.add(tr(s.y[i], axes.log_y));
    }
  rx.finish();
  ry.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string out = header(axes) + ticks(rx, ry, axes.log_x, axes.log_y);
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % 6];
    std::string pts;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      const double x = tr(s.x[i], axes.log_x), y = tr(s.y[i], axes.log_y);
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      const double px = kLeft + (x - rx.lo) / (rx.hi - rx.lo) * pw;
      const double py = kTop + ph - (y - ry.lo) / (ry.hi - ry.lo) * ph;
      pts += num(px) + "," + num(py) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
           (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + " points=\"" + pts + "\"/>\n";
    const double ly = kTop + 14 + 16 * double(k);
    out += "<line x1=\"" + num(kLeft + 10) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(kLeft + 30) + "\" y2=\"" +
           num(ly - 4) + "\" stroke=\"" + color + "\"" + (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
    out += "<text x=\"" + num(kLeft + 36) + "\" y=\"" + num(ly) + "\">" + escape(s.label) + "</text>\n";
  }
  return out + "</svg>\n";
}

std::string heatmap(const Axes& axes, int nx, int ny, const std::vector<double>& values, double x0, double x1,
                    double y0, double y1) {
  Range rx, ry, rv;
  rx.add(x0);
  rx.add(x1);
  ry.add(y0);
  ry.add(y1);
  for (double v : values) rv.add(v);
  rx.finish();
  ry.finish();
  rv.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const double cw = pw / nx, ch = ph / ny;
  std::string out = header(axes);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const double t = (values[size_t(i) * size_t(ny) + size_t(j)] - rv.lo) / (rv.hi - rv.lo);
      const int level = std::clamp(int(std::lround(255.0 * t)), 0, 255);
      char color[8];
      // white to dark blue
      std::snprintf(color, sizeof color, "#%02x%02x%02x", 255 - level, 255 - level * 3 / 4, 255 - level / 4);
      out += "<rect x=\"" + num(kLeft + i * cw) + "\" y=\"" + num(kTop + ph - (j + 1) * ch) + "\" width=\"" +
             num(cw + 0.05) + "\" height=\"" + num(ch + 0.05) + "\" fill=\"" + color + "\"/>\n";
    }
  out += ticks(rx, ry, false, false);
  out += "<text x=\"" + num(kWidth - kRight) + "\" y=\"34\" text-anchor=\"end\">range " + num(rv.lo) + " .. " +
         num(rv.hi) + "</text>\n";
  return out + "</svg>\n";
}

}  // namespace meanfield::svg
