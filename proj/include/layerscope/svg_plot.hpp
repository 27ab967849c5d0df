#pragma once

#include <optional>
#include <string>
#include <vector>

namespace layerscope {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional symmetric error bar per point.
  std::vector<double> err;
};

struct PlotSpec {
  std::string title;
  std::string x_label = "layer";
  std::string y_label = "score";
  std::optional<double> y_min;
  std::optional<double> y_max;
  int width = 640;
  int height = 400;
};

/// Self-contained SVG line chart, one line per series with a legend.
std::string render_line_plot(const std::vector<PlotSeries>& series,
                             const PlotSpec& spec);

}  // namespace layerscope
