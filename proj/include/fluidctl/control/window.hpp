#pragma once

#include "fluidctl/common.hpp"

#include <array>
#include <span>

namespace fluidctl::control {

/// Axis-aligned control grid plus buffer shell plus step interval.
///
/// Nodes sit at origin + i * spacing (vertex centered), so the control box is
/// [origin, origin + (counts - 1) * spacing]. Forces are applied on steps
/// t_start .. t_end - 1; the trajectory the window is judged on runs over
/// frames t_start .. t_end, and frame k is the state after k steps.
struct SpacetimeWindow {
  int dim = 2;
  Vec3 origin = Vec3::Zero();
  std::array<int, 3> node_counts{2, 2, 1};
  double spacing = 1.0;
  double buffer = 0.0;
  int t_start = 0;
  int t_end = 1;

  int steps() const { return t_end - t_start; }
  std::size_t node_count() const {
    return static_cast<std::size_t>(node_counts[0]) * node_counts[1] * node_counts[2];
  }
  /// Gaussian width of the grid-to-particle transfer, half the grid spacing.
  double alpha() const { return 0.5 * spacing; }
  /// Transfer weights are truncated beyond this distance.
  double cutoff() const { return 3.0 * alpha(); }

  Vec3 node_position(std::size_t node) const;
  std::array<int, 3> node_index(std::size_t node) const;
  std::size_t flat_index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * node_counts[1] + j) * node_counts[0] + i;
  }

  Aabb box() const;
  Aabb buffer_box() const { return box().dilated(buffer, dim); }

  /// Throws ValidationError; `kernel_radius` bounds the buffer from below.
  void validate(double kernel_radius) const;

  bool operator==(const SpacetimeWindow&) const = default;
};

/// Control forces for every (step, node) of a window: time-major slabs of
/// node-major dim-component vectors.
class ForceField {
 public:
  ForceField() = default;
  explicit ForceField(const SpacetimeWindow& window)
      : ForceField(window.steps(), window.node_count(), window.dim) {}
  ForceField(int slabs, std::size_t nodes, int dim)
      : slabs_(slabs), nodes_(nodes), dim_(dim),
        data_(static_cast<std::size_t>(slabs) * nodes * dim, 0.0) {}

  int slabs() const { return slabs_; }
  std::size_t nodes() const { return nodes_; }
  int dim() const { return dim_; }
  std::size_t slab_size() const { return nodes_ * dim_; }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> slab(int t) { return {data_.data() + t * slab_size(), slab_size()}; }
  std::span<const double> slab(int t) const {
    return {data_.data() + t * slab_size(), slab_size()};
  }

  double& at(int t, std::size_t node, int component) {
    return data_[(t * nodes_ + node) * dim_ + component];
  }
  double at(int t, std::size_t node, int component) const {
    return data_[(t * nodes_ + node) * dim_ + component];
  }

  bool matches(const SpacetimeWindow& window) const {
    return slabs_ == window.steps() && nodes_ == window.node_count() && dim_ == window.dim;
  }
  double max_abs() const;
  double squared_norm() const;
  bool all_finite() const;

  bool operator==(const ForceField&) const = default;

 private:
  int slabs_ = 0;
  std::size_t nodes_ = 0;
  int dim_ = 2;
  std::vector<double> data_;
};

}  // namespace fluidctl::control
