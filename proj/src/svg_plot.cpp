#include "layerscope/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "layerscope/errors.hpp"

namespace layerscope {
namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

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

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

}  // namespace

std::string render_line_plot(const std::vector<PlotSeries>& series,
                             const PlotSpec& spec) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size()))
      throw ShapeError("plot series '" + s.label + "' has ragged columns");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double e = s.err.empty() ? 0.0 : s.err[i];
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i] - e);
      y1 = std::max(y1, s.y[i] + e);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (spec.y_min) y0 = *spec.y_min;
  if (spec.y_max) y1 = *spec.y_max;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;

  const double left = 60, right = 150, top = 40, bottom = 50;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width << ' '
      << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-size=\"14\">" << escape(spec.title) << "</text>\n";

  // Axes, ticks and grid.
  svg << "<g stroke=\"#ccc\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y0 + (y1 - y0) * i / 5.0;
    svg << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(py(y)) << "\" x2=\""
        << fmt(left + pw) << "\" y2=\"" << fmt(py(y)) << "\"/>\n";
  }
  svg << "</g>\n";
  svg << "<g font-size=\"10\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y0 + (y1 - y0) * i / 5.0;
    svg << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(y) + 3)
        << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
  }
  const double span = x1 - x0;
  const double step = span <= 15 ? 1.0 : std::ceil(span / 10.0);
  for (double x = std::ceil(x0); x <= x1 + 1e-9; x += step)
    svg << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(top + ph + 15)
        << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
  svg << "</g>\n";
  svg << "<path d=\"M" << fmt(left) << ' ' << fmt(top) << " V" << fmt(top + ph)
      << " H" << fmt(left + pw) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(spec.height - 12.0)
      << "\" text-anchor=\"middle\">" << escape(spec.x_label) << "</text>\n";
  svg << "<text transform=\"translate(16 " << fmt(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(spec.y_label)
      << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& ser = series[s];
    const char* color = kPalette[s % std::size(kPalette)];
    if (!ser.x.empty()) {
      svg << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" d=\"";
      for (std::size_t i = 0; i < ser.x.size(); ++i)
        svg << (i ? " L" : "M") << fmt(px(ser.x[i])) << ' ' << fmt(py(ser.y[i]));
      svg << "\"/>\n";
    }
    for (std::size_t i = 0; i < ser.x.size(); ++i) {
      if (!ser.err.empty() && ser.err[i] > 0)
        svg << "<line stroke=\"" << color << "\" x1=\"" << fmt(px(ser.x[i]))
            << "\" y1=\"" << fmt(py(ser.y[i] - ser.err[i])) << "\" x2=\""
            << fmt(px(ser.x[i])) << "\" y2=\"" << fmt(py(ser.y[i] + ser.err[i]))
            << "\"/>\n";
      svg << "<circle r=\"3\" fill=\"" << color << "\" cx=\"" << fmt(px(ser.x[i]))
          << "\" cy=\"" << fmt(py(ser.y[i])) << "\"/>\n";
    }
    const double ly = top + 10 + 18.0 * static_cast<double>(s);
    svg << "<line stroke=\"" << color << "\" stroke-width=\"2\" x1=\""
        << fmt(left + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(left + pw + 32) << "\" y2=\"" << fmt(ly) << "\"/>\n";
    svg << "<text x=\"" << fmt(left + pw + 36) << "\" y=\"" << fmt(ly + 4) << "\">"
        << escape(ser.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace layerscope
