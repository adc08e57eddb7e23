#include "fluidctl/control/transfer.hpp"

#include <string>

namespace fluidctl::control {

namespace {

void check_slab(std::size_t size, const SpacetimeWindow& w, const char* what) {
  if (size != w.node_count() * w.dim) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(w.node_count() * w.dim) +
                     " entries, got " + std::to_string(size));
  }
}

Vec3 node_force(std::span<const double> slab, std::size_t node, int dim) {
  Vec3 f = Vec3::Zero();
  for (int a = 0; a < dim; ++a) f[a] = slab[node * dim + a];
  return f;
}

}  // namespace

std::vector<Vec3> transfer_forces(std::span<const double> slab, std::span<const Vec3> x,
                                  const SpacetimeWindow& window) {
  check_slab(slab.size(), window, "transfer_forces");
  std::vector<Vec3> out(x.size(), Vec3::Zero());
  for (std::size_t p = 0; p < x.size(); ++p) {
    for_each_node_weight(window, x[p], [&](std::size_t node, double weight, const Vec3&) {
      out[p] += weight * node_force(slab, node, window.dim);
    });
  }
  return out;
}

void transfer_forces_adjoint(std::span<const double> slab, std::span<const Vec3> x,
                             const SpacetimeWindow& window, std::span<const Vec3> force_bar,
                             std::span<double> slab_bar, std::span<Vec3> x_bar) {
  check_slab(slab.size(), window, "transfer_forces_adjoint");
  check_slab(slab_bar.size(), window, "transfer_forces_adjoint");
  if (force_bar.size() != x.size() || (!x_bar.empty() && x_bar.size() != x.size())) {
    throw ShapeError("transfer_forces_adjoint: particle count mismatch");
  }
  const double inv_alpha2 = 1.0 / (window.alpha() * window.alpha());
  const int dim = window.dim;
  for (std::size_t p = 0; p < x.size(); ++p) {
    const Vec3& fb = force_bar[p];
    if (fb.isZero(0.0)) continue;
    for_each_node_weight(window, x[p], [&](std::size_t node, double weight, const Vec3& offset) {
      for (int a = 0; a < dim; ++a) slab_bar[node * dim + a] += weight * fb[a];
      if (!x_bar.empty()) {
        const double s = node_force(slab, node, dim).dot(fb);
        x_bar[p] -= (s * weight * inv_alpha2) * offset;
      }
    });
  }
}

std::vector<double> project_density(std::span<const Vec3> x, double mass,
                                    const SpacetimeWindow& window) {
  std::vector<double> rho(window.node_count(), 0.0);
  for (const Vec3& p : x) {
    for_each_node_weight(window, p, [&](std::size_t node, double weight, const Vec3&) {
      rho[node] += mass * weight;
    });
  }
  return rho;
}

void project_density_adjoint(std::span<const Vec3> x, double mass, const SpacetimeWindow& window,
                             std::span<const double> rho_bar, std::span<Vec3> x_bar) {
  if (rho_bar.size() != window.node_count()) {
    throw ShapeError("project_density_adjoint: node count mismatch");
  }
  const double inv_alpha2 = 1.0 / (window.alpha() * window.alpha());
  for (std::size_t p = 0; p < x.size(); ++p) {
    for_each_node_weight(window, x[p], [&](std::size_t node, double weight, const Vec3& offset) {
      x_bar[p] -= (rho_bar[node] * mass * weight * inv_alpha2) * offset;
    });
  }
}

}  // namespace fluidctl::control
