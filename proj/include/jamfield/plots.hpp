#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jamfield/geometry.hpp"
#include "jamfield/propagation.hpp"

namespace jamfield {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = true;
  std::vector<PlotSeries> series;
  std::string caption;
};

/// Non-finite and (on a log axis) non-positive points are dropped.
void write_line_plot_svg(const LinePlot& plot, const std::filesystem::path& file);

/// Row-major raster over [x0, x1] x [y0, y1]; row 0 is y0. NaN cells are
/// drawn as buildings.
struct FieldRaster {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> values;
};

struct FieldOverlay {
  const BuildingMap* buildings = nullptr;
  geo::Vec2 jammer;
  std::vector<geo::Vec2> observers;
};

void write_field_svg(const FieldRaster& raster, const FieldOverlay& overlay,
                     const std::filesystem::path& file);

}  // namespace jamfield
