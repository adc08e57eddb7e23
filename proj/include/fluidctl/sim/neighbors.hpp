#pragma once

#include "fluidctl/common.hpp"

#include <span>

namespace fluidctl::sim {

/// Compressed per-particle neighbor lists (self excluded), each sorted by
/// particle index. Pairs are symmetric and within the kernel radius.
class NeighborTable {
 public:
  NeighborTable() = default;

  /// Uniform-grid search with cell size h. Cells are laid over `bounds`;
  /// particles outside it land in the border cells.
  static NeighborTable build(std::span<const Vec3> positions, double h, int dim,
                             const Aabb& bounds);

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }

  std::span<const std::uint32_t> of(std::size_t i) const {
    return {indices_.data() + offsets_[i], indices_.data() + offsets_[i + 1]};
  }

  std::size_t pair_entries() const { return indices_.size(); }
  std::span<const std::uint32_t> offsets() const { return offsets_; }
  std::span<const std::uint32_t> indices() const { return indices_; }

  bool operator==(const NeighborTable&) const = default;

 private:
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> indices_;
};

}  // namespace fluidctl::sim
