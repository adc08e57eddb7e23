#include "fluidctl/control/classify.hpp"

#include <algorithm>

namespace fluidctl::control {

ParticleClassification classify(const SpacetimeWindow& window, std::span<const Vec3> x) {
  const Aabb box = window.box();
  const Aabb outer = window.buffer_box();
  ParticleClassification out;
  for (std::size_t p = 0; p < x.size(); ++p) {
    const auto id = static_cast<ParticleId>(p);
    if (box.contains(x[p], window.dim)) {
      out.interior.push_back(id);
    } else if (outer.contains(x[p], window.dim)) {
      out.buffer.push_back(id);
    } else {
      out.exterior.push_back(id);
    }
  }
  return out;
}

std::vector<ParticleClassification> classify_window(const SpacetimeWindow& window,
                                                    const sim::Trajectory& baseline) {
  if (static_cast<int>(baseline.size()) <= window.t_end) {
    throw ShapeError("classify_window: baseline has " + std::to_string(baseline.size()) +
                     " frames, window needs " + std::to_string(window.t_end + 1));
  }
  std::vector<ParticleClassification> out;
  out.reserve(window.steps() + 1);
  for (int t = window.t_start; t <= window.t_end; ++t) out.push_back(classify(window, baseline[t].x));
  return out;
}

std::vector<ParticleId> buffer_union(std::span<const ParticleClassification> frames) {
  std::vector<ParticleId> ids;
  for (const auto& c : frames) ids.insert(ids.end(), c.buffer.begin(), c.buffer.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<ParticleId> never_inside(std::span<const ParticleClassification> frames,
                                     std::size_t particle_count) {
  std::vector<bool> touched(particle_count, false);
  for (const auto& c : frames) {
    for (const ParticleId p : c.interior) touched[p] = true;
    for (const ParticleId p : c.buffer) touched[p] = true;
  }
  std::vector<ParticleId> ids;
  for (std::size_t p = 0; p < particle_count; ++p) {
    if (!touched[p]) ids.push_back(static_cast<ParticleId>(p));
  }
  return ids;
}

int backward_trace_window(const sim::Trajectory& baseline, const SpacetimeWindow& window,
                          std::span<const ParticleId> particles, int t_edit, int cap) {
  if (t_edit < 0 || t_edit >= static_cast<int>(baseline.size())) {
    throw ValidationError("t_edit: outside the baseline trajectory");
  }
  if (particles.empty()) throw ValidationError("particles: no edited particles");
  const Aabb box = window.box();
  auto all_inside = [&](int t) {
    const auto& x = baseline[t].x;
    return std::all_of(particles.begin(), particles.end(), [&](ParticleId p) {
      return p < x.size() && box.contains(x[p], window.dim);
    });
  };
  if (!all_inside(t_edit)) {
    throw ValidationError("window: edited particles are not inside the window at the edit step");
  }
  const int floor = std::max(0, t_edit - cap);
  int t = t_edit;
  while (t > floor && all_inside(t - 1)) --t;
  return t;
}

}  // namespace fluidctl::control
