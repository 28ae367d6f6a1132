#pragma once

#include <string>
#include <vector>

namespace meanfield::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct Axes {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

/// SVG 1.1 line chart. Output depends only on the inputs.
std::string line_plot(const Axes& axes, const std::vector<Series>& series);

/// Heatmap of values[i * ny + j] over [x0, x1] x [y0, y1], i along x.
std::string heatmap(const Axes& axes, int nx, int ny, const std::vector<double>& values, double x0, double x1,
                    double y0, double y1);

}  // namespace meanfield::svg
