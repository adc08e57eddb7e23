#pragma once

#include "fluidctl/control/window.hpp"
#include "fluidctl/sim/pbf.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fluidctl::control {

using ParticleId = std::uint32_t;

/// Partition of particle indices by window membership. Index lists are sorted.
struct ParticleClassification {
  std::vector<ParticleId> interior;  // inside the window box
  std::vector<ParticleId> buffer;    // inside the dilated box but not interior
  std::vector<ParticleId> exterior;

  std::size_t size() const { return interior.size() + buffer.size() + exterior.size(); }
  bool operator==(const ParticleClassification&) const = default;
};

ParticleClassification classify(const SpacetimeWindow& window, std::span<const Vec3> x);

/// Membership per frame of a baseline trajectory over the window, frames
/// t_start .. t_end. `baseline` is indexed by global frame.
std::vector<ParticleClassification> classify_window(const SpacetimeWindow& window,
                                                    const sim::Trajectory& baseline);

/// Particles that are in the buffer shell in at least one classified frame.
std::vector<ParticleId> buffer_union(std::span<const ParticleClassification> frames);

/// Particles never inside the dilated window box in any classified frame.
std::vector<ParticleId> never_inside(std::span<const ParticleClassification> frames,
                                     std::size_t particle_count);

/// Earliest start frame, not earlier than t_edit - cap, such that every edited
/// particle stays inside the window box on all frames from it through t_edit.
/// Throws ValidationError when some edited particle is outside at t_edit.
int backward_trace_window(const sim::Trajectory& baseline, const SpacetimeWindow& window,
                          std::span<const ParticleId> particles, int t_edit, int cap = 30);

}  // namespace fluidctl::control
