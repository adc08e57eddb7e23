#include "fluidctl/sim/layout.hpp"

#include <cmath>

namespace fluidctl::sim {

ParticleState make_block(const Aabb& region, double spacing, int dim, const Vec3& velocity) {
  ParticleState out;
  int counts[3] = {1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    counts[a] = static_cast<int>(std::floor((region.hi[a] - region.lo[a]) / spacing + 1e-9));
  }
  for (int k = 0; k < counts[2]; ++k) {
    for (int j = 0; j < counts[1]; ++j) {
      for (int i = 0; i < counts[0]; ++i) {
        Vec3 p = region.lo + Vec3(i + 0.5, j + 0.5, k + 0.5) * spacing;
        if (dim == 2) p.z() = 0.0;
        out.x.push_back(p);
        out.v.push_back(velocity);
      }
    }
  }
  return out;
}

ParticleState make_ball(const Vec3& center, double radius, double spacing, int dim,
                        const Vec3& velocity) {
  ParticleState out;
  const int reach = static_cast<int>(std::floor(radius / spacing));
  const int zreach = dim == 3 ? reach : 0;
  for (int k = -zreach; k <= zreach; ++k) {
    for (int j = -reach; j <= reach; ++j) {
      for (int i = -reach; i <= reach; ++i) {
        const Vec3 offset = Vec3(i, j, k) * spacing;
        if (offset.norm() > radius) continue;
        out.x.push_back(center + offset);
        out.v.push_back(velocity);
      }
    }
  }
  return out;
}

void append(ParticleState& a, const ParticleState& b) {
  a.x.insert(a.x.end(), b.x.begin(), b.x.end());
  a.v.insert(a.v.end(), b.v.begin(), b.v.end());
}

}  // namespace fluidctl::sim
