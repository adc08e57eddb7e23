#pragma once

#include "fluidctl/control/window.hpp"

#include <string>
#include <vector>

namespace fluidctl::io {

/// Single-channel image with values in [0, 1]. Row 0 is the top row.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // row-major

  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

/// Binary (P5) or ASCII (P2) PGM, 8 or 16 bit.
Raster parse_pgm(const std::string& bytes);
Raster read_pgm(const std::string& path);
/// Writes a 16-bit binary PGM.
void write_pgm(const std::string& path, const Raster& raster);

/// Bilinear sample at normalized coordinates (u, v) in [0, 1]^2 with pixel
/// centers on the corners: u = 0 is the left column, v = 0 the top row.
double sample_bilinear(const Raster& raster, double u, double v);

/// Raster value at every node of a 2D window. The window's low-y edge maps to
/// the bottom image row.
std::vector<double> sample_on_window(const Raster& raster, const control::SpacetimeWindow& window);

/// Node density targets from a raster, scaled so they sum to `total_mass`.
/// Throws ValidationError for an all-zero raster or a 3D window.
std::vector<double> ingest_image_keyframe(const Raster& raster, const control::SpacetimeWindow& window,
                                          double total_mass);

/// Renders node values as a raster of one pixel per node, normalized to a
/// maximum of 1 (the inverse of sample_on_window up to scale).
Raster rasterize_nodes(const std::vector<double>& values, const control::SpacetimeWindow& window);

}  // namespace fluidctl::io
