#pragma once

#include "fluidctl/control/window.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace fluidctl::control {

/// Calls fn(node, weight, offset) for every grid node within the cutoff of x,
/// in increasing node order. weight = exp(-|offset|^2 / (2 alpha^2)) and
/// offset = x - node_position.
template <class Fn>
void for_each_node_weight(const SpacetimeWindow& w, const Vec3& x, Fn&& fn) {
  const double cutoff = w.cutoff();
  const double cutoff2 = cutoff * cutoff;
  const double inv_two_alpha2 = 1.0 / (2.0 * w.alpha() * w.alpha());
  int lo[3] = {0, 0, 0};
  int hi[3] = {0, 0, 0};
  for (int a = 0; a < w.dim; ++a) {
    const double rel = (x[a] - w.origin[a]) / w.spacing;
    const double reach = cutoff / w.spacing;
    const double first = std::ceil(rel - reach);
    const double last = std::floor(rel + reach);
    if (last < 0.0 || first > w.node_counts[a] - 1) return;
    lo[a] = first < 0.0 ? 0 : static_cast<int>(first);
    hi[a] = last > w.node_counts[a] - 1 ? w.node_counts[a] - 1 : static_cast<int>(last);
  }
  for (int k = lo[2]; k <= hi[2]; ++k) {
    for (int j = lo[1]; j <= hi[1]; ++j) {
      for (int i = lo[0]; i <= hi[0]; ++i) {
        const std::size_t node = w.flat_index(i, j, k);
        const Vec3 offset = x - w.node_position(node);
        const double d2 = offset.squaredNorm();
        if (d2 > cutoff2) continue;
        fn(node, std::exp(-d2 * inv_two_alpha2), offset);
      }
    }
  }
}

/// Grid-to-particle force transfer: f_p = sum_i w_i F_i over nodes within
/// the cutoff. Throws ShapeError when `slab` does not match the window.
std::vector<Vec3> transfer_forces(std::span<const double> slab, std::span<const Vec3> x,
                                  const SpacetimeWindow& window);

/// Adjoint of transfer_forces. Accumulates d/dF into `slab_bar` and, when
/// given, d/dx into `x_bar`.
void transfer_forces_adjoint(std::span<const double> slab, std::span<const Vec3> x,
                             const SpacetimeWindow& window, std::span<const Vec3> force_bar,
                             std::span<double> slab_bar, std::span<Vec3> x_bar = {});

/// Mass-weighted projection of particles onto the window nodes with the
/// transfer Gaussian: rho_g = sum_p m w(x_p - X_g).
std::vector<double> project_density(std::span<const Vec3> x, double mass,
                                    const SpacetimeWindow& window);

/// Adds d/dx of sum_g rho_bar_g rho_g to x_bar.
void project_density_adjoint(std::span<const Vec3> x, double mass, const SpacetimeWindow& window,
                             std::span<const double> rho_bar, std::span<Vec3> x_bar);

}  // namespace fluidctl::control
