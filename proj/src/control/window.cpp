#include "fluidctl/control/window.hpp"

#include <algorithm>
#include <cmath>

namespace fluidctl::control {

std::array<int, 3> SpacetimeWindow::node_index(std::size_t node) const {
  const int i = static_cast<int>(node % node_counts[0]);
  const int j = static_cast<int>((node / node_counts[0]) % node_counts[1]);
  const int k = static_cast<int>(node / (static_cast<std::size_t>(node_counts[0]) * node_counts[1]));
  return {i, j, k};
}

Vec3 SpacetimeWindow::node_position(std::size_t node) const {
  const auto idx = node_index(node);
  Vec3 p = origin;
  for (int a = 0; a < dim; ++a) p[a] += idx[a] * spacing;
  return p;
}

Aabb SpacetimeWindow::box() const {
  Aabb b{origin, origin};
  for (int a = 0; a < dim; ++a) b.hi[a] = origin[a] + (node_counts[a] - 1) * spacing;
  return b;
}

void SpacetimeWindow::validate(double kernel_radius) const {
  std::vector<std::string> issues;
  if (dim != 2 && dim != 3) issues.push_back("window.dim: must be 2 or 3");
  for (int a = 0; a < std::clamp(dim, 2, 3); ++a) {
    if (node_counts[a] < 2) {
      issues.push_back("window.nodes[" + std::to_string(a) + "]: must be >= 2");
    }
  }
  if (dim == 2 && node_counts[2] != 1) issues.push_back("window.nodes: 2D windows have one layer");
  if (!(std::isfinite(spacing) && spacing > 0.0)) issues.push_back("window.spacing: must be > 0");
  if (!(buffer >= 2.0 * kernel_radius)) {
    issues.push_back("window.buffer: must be >= 2 * kernel_radius");
  }
  if (t_start < 0) issues.push_back("window.t_start: must be >= 0");
  if (!(t_end > t_start)) issues.push_back("window.t_end: must exceed t_start");
  if (!origin.allFinite()) issues.push_back("window.origin: must be finite");
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

double ForceField::max_abs() const {
  double m = 0.0;
  for (const double v : data_) m = std::max(m, std::abs(v));
  return m;
}

double ForceField::squared_norm() const {
  double s = 0.0;
  for (const double v : data_) s += v * v;
  return s;
}

bool ForceField::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace fluidctl::control
