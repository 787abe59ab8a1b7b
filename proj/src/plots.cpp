#include "jamfield/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace jamfield {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 70.0;

const std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                          "#9467bd", "#8c564b", "#e377c2", "#17becf"};

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

void save(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

// Piecewise-linear approximation of the viridis colormap.
std::string colormap(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                               {59, 82, 139},
                                                               {33, 145, 140},
                                                               {94, 201, 98},
                                                               {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(k);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(stops[k][0] + f * (stops[k + 1][0] - stops[k][0]))),
                static_cast<int>(std::lround(stops[k][1] + f * (stops[k + 1][1] - stops[k][1]))),
                static_cast<int>(std::lround(stops[k][2] + f * (stops[k + 1][2] - stops[k][2]))));
  return buf;
}

}  // namespace

void write_line_plot_svg(const LinePlot& plot, const std::filesystem::path& file) {
  auto usable = [&](double y) { return std::isfinite(y) && (!plot.log_y || y > 0.0); };

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !usable(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      const double y = plot.log_y ? std::log10(s.y[i]) : s.y[i];
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!(xmin <= xmax)) {
    xmin = 0.0;
    xmax = 1.0;
    ymin = 0.0;
    ymax = 1.0;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (plot.log_y) {
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
  }
  if (ymax == ymin) ymax = ymin + 1.0;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    const double v = plot.log_y ? std::log10(y) : y;
    return kTop + (1.0 - (v - ymin) / (ymax - ymin)) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(plot.title) << "</text>\n";

  // Grid and ticks.
  const int n_xticks = 6;
  for (int k = 0; k <= n_xticks; ++k) {
    const double x = xmin + (xmax - xmin) * k / n_xticks;
    svg << "<line x1=\"" << num(px(x)) << "\" y1=\"" << kTop << "\" x2=\"" << num(px(x)) << "\" y2=\""
        << kTop + ph << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << num(px(x)) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">"
        << num(x) << "</text>\n";
  }
  if (plot.log_y) {
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); ++e) {
      const double y = std::pow(10.0, e);
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(y)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
          << num(py(y)) << "\" stroke=\"#e0e0e0\"/>\n";
      svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">1e" << e
          << "</text>\n";
    }
  } else {
    for (int k = 0; k <= 5; ++k) {
      const double y = ymin + (ymax - ymin) * k / 5;
      svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(py(y)) << "\" x2=\"" << kLeft + pw << "\" y2=\""
          << num(py(y)) << "\" stroke=\"#e0e0e0\"/>\n";
      svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">"
          << num(y) << "</text>\n";
    }
  }
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 30 << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << "</text>\n";
  svg << "<text transform=\"translate(20," << kTop + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(plot.y_label) << "</text>\n";

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = s.dashed ? "black" : kPalette[k % kPalette.size()];
    std::string points;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !usable(s.y[i])) continue;
      points += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"" << points << "\"/>\n";
    if (!s.dashed) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!std::isfinite(s.x[i]) || !usable(s.y[i])) continue;
        svg << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\""
            << color << "\"/>\n";
      }
    }
    const double ly = kTop + 10 + 20.0 * static_cast<double>(k);
    svg << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 40
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
    svg << "<text x=\"" << kLeft + pw + 46 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
  }
  if (!plot.caption.empty()) {
    svg << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 10 << "\" font-size=\"10\" fill=\"#555\">"
        << escape(plot.caption) << "</text>\n";
  }
  svg << "</svg>\n";
  save(file, svg.str());
}

void write_field_svg(const FieldRaster& raster, const FieldOverlay& overlay,
                     const std::filesystem::path& file) {
  if (raster.nx <= 0 || raster.ny <= 0 ||
      raster.values.size() != static_cast<std::size_t>(raster.nx) * raster.ny) {
    throw std::invalid_argument("field raster size mismatch");
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : raster.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo < hi)) {
    lo = 0.0;
    hi = 1.0;
  }

  const double side = 560.0;
  const double margin = 50.0;
  const double bar = 90.0;
  const double sx = side / (raster.x1 - raster.x0);
  const double sy = side / (raster.y1 - raster.y0);
  auto px = [&](double x) { return margin + (x - raster.x0) * sx; };
  auto py = [&](double y) { return margin + side - (y - raster.y0) * sy; };
  const double cw = side / raster.nx;
  const double ch = side / raster.ny;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << side + 2 * margin + bar << "\" height=\""
      << side + 2 * margin << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << margin + side / 2 << "\" y=\"30\" text-anchor=\"middle\" font-size=\"15\">"
      << "Received jammer power [dBW]</text>\n";
  svg << "<g shape-rendering=\"crispEdges\">\n";
  for (int iy = 0; iy < raster.ny; ++iy) {
    for (int ix = 0; ix < raster.nx; ++ix) {
      const double v = raster.values[static_cast<std::size_t>(iy) * raster.nx + ix];
      const std::string fill = std::isfinite(v) ? colormap((v - lo) / (hi - lo)) : std::string("#808080");
      svg << "<rect x=\"" << num(margin + ix * cw) << "\" y=\"" << num(margin + side - (iy + 1) * ch)
          << "\" width=\"" << num(cw + 0.05) << "\" height=\"" << num(ch + 0.05) << "\" fill=\"" << fill
          << "\"/>\n";
    }
  }
  svg << "</g>\n";

  if (overlay.buildings) {
    for (const auto& poly : overlay.buildings->polygons) {
      std::string pts;
      for (const auto& v : poly.vertices) pts += num(px(v.x)) + "," + num(py(v.y)) + " ";
      svg << "<polygon points=\"" << pts << "\" fill=\"#808080\" stroke=\"black\"/>\n";
    }
  }
  for (const auto& o : overlay.observers) {
    svg << "<circle cx=\"" << num(px(o.x)) << "\" cy=\"" << num(py(o.y))
        << "\" r=\"4\" fill=\"white\" stroke=\"black\"/>\n";
  }
  svg << "<path d=\"M" << num(px(overlay.jammer.x) - 7) << ' ' << num(py(overlay.jammer.y) - 7) << " l14 14 m0 -14 l-14 14\""
      << " stroke=\"red\" stroke-width=\"3\"/>\n";
  svg << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << side << "\" height=\"" << side
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << margin << "\" y=\"" << margin + side + 20 << "\">" << num(raster.x0) << " m</text>\n";
  svg << "<text x=\"" << margin + side << "\" y=\"" << margin + side + 20 << "\" text-anchor=\"end\">"
      << num(raster.x1) << " m</text>\n";

  const double bx = margin + side + 20;
  const int steps = 50;
  for (int k = 0; k < steps; ++k) {
    const double t = (k + 0.5) / steps;
    svg << "<rect x=\"" << bx << "\" y=\"" << num(margin + side * (1.0 - (k + 1.0) / steps)) << "\" width=\"20\" height=\""
        << num(side / steps + 0.5) << "\" fill=\"" << colormap(t) << "\"/>\n";
  }
  svg << "<text x=\"" << bx + 26 << "\" y=\"" << margin + 10 << "\">" << num(hi) << "</text>\n";
  svg << "<text x=\"" << bx + 26 << "\" y=\"" << margin + side << "\">" << num(lo) << "</text>\n";
  svg << "</svg>\n";
  save(file, svg.str());
}

}  // namespace jamfield
