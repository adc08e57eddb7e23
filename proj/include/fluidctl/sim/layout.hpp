#pragma once

#include "fluidctl/sim/pbf.hpp"

namespace fluidctl::sim {

/// Regular lattice filling `region` (inclusive of lo, cells centered half a
/// spacing in from lo), all with the given velocity.
ParticleState make_block(const Aabb& region, double spacing, int dim,
                         const Vec3& velocity = Vec3::Zero());

/// Lattice points of the given spacing inside a disc (2D) or ball (3D).
ParticleState make_ball(const Vec3& center, double radius, double spacing, int dim,
                        const Vec3& velocity = Vec3::Zero());

/// Concatenates b onto a.
void append(ParticleState& a, const ParticleState& b);

}  // namespace fluidctl::sim
