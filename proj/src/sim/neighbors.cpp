#include "fluidctl/sim/neighbors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace fluidctl::sim {

NeighborTable NeighborTable::build(std::span<const Vec3> positions, double h, int dim,
                                   const Aabb& bounds) {
  NeighborTable table;
  const std::size_t n = positions.size();
  table.offsets_.assign(n + 1, 0);
  if (n == 0) return table;

  std::array<int, 3> cells{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    cells[a] = std::max(1, static_cast<int>(std::ceil((bounds.hi[a] - bounds.lo[a]) / h)));
  }
  auto cell_coord = [&](const Vec3& p, int a) {
    if (a >= dim) return 0;
    const int c = static_cast<int>(std::floor((p[a] - bounds.lo[a]) / h));
    return std::clamp(c, 0, cells[a] - 1);
  };
  const std::size_t cell_count =
      static_cast<std::size_t>(cells[0]) * static_cast<std::size_t>(cells[1]) *
      static_cast<std::size_t>(cells[2]);
  auto flat = [&](int cx, int cy, int cz) {
    return (static_cast<std::size_t>(cz) * cells[1] + cy) * cells[0] + cx;
  };

  // Counting sort of particles into cells; stable, so each cell lists
  // particles in increasing index order.
  std::vector<std::uint32_t> cell_start(cell_count + 1, 0);
  std::vector<std::size_t> particle_cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = positions[i];
    particle_cell[i] = flat(cell_coord(p, 0), cell_coord(p, 1), cell_coord(p, 2));
    ++cell_start[particle_cell[i] + 1];
  }
  for (std::size_t c = 0; c < cell_count; ++c) cell_start[c + 1] += cell_start[c];
  std::vector<std::uint32_t> sorted(n);
  {
    std::vector<std::uint32_t> cursor(cell_start.begin(), cell_start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) sorted[cursor[particle_cell[i]]++] = static_cast<std::uint32_t>(i);
  }

  const double h2 = h * h;
  table.indices_.reserve(n * (dim == 2 ? 16 : 40));
  std::vector<std::uint32_t> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = positions[i];
    const int cx = cell_coord(p, 0), cy = cell_coord(p, 1), cz = cell_coord(p, 2);
    scratch.clear();
    for (int z = std::max(0, cz - 1); z <= std::min(cells[2] - 1, cz + 1); ++z) {
      for (int y = std::max(0, cy - 1); y <= std::min(cells[1] - 1, cy + 1); ++y) {
        for (int x = std::max(0, cx - 1); x <= std::min(cells[0] - 1, cx + 1); ++x) {
          const std::size_t c = flat(x, y, z);
          for (std::uint32_t k = cell_start[c]; k < cell_start[c + 1]; ++k) {
            const std::uint32_t j = sorted[k];
            if (j == i) continue;
            if ((positions[j] - p).squaredNorm() <= h2) scratch.push_back(j);
          }
        }
      }
    }
    std::sort(scratch.begin(), scratch.end());
    table.indices_.insert(table.indices_.end(), scratch.begin(), scratch.end());
    table.offsets_[i + 1] = static_cast<std::uint32_t>(table.indices_.size());
  }
  return table;
}

}  // namespace fluidctl::sim
