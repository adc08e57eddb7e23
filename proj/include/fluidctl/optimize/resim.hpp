#pragma once

#include "fluidctl/optimize/optimize.hpp"

#include <functional>
#include <vector>

namespace fluidctl::optimize {

/// Step interval [begin, end) during which a solution applies its slab
/// `begin - window.t_start` (template replays shift the interval).
struct ActiveInterval {
  int begin = 0;
  int end = 0;
  int solution = 0;
  int offset = 0;  // subtract from the step to get the slab index
};

std::vector<ActiveInterval> active_intervals(const std::vector<ControlSolution>& solutions);

/// Throws ValidationError when two active intervals overlap.
void check_non_overlapping(const std::vector<ControlSolution>& solutions);

/// Re-runs the global simulation from `initial` for `steps` steps, injecting
/// each solution's transferred forces during its active interval. Returns
/// frames 0 .. steps. `on_frame(k, state)` is called for every frame.
sim::Trajectory resim_blend(const sim::ParticleState& initial, const sim::SimConfig& cfg, int steps,
                            const std::vector<ControlSolution>& solutions,
                            const std::function<void(int, const sim::ParticleState&)>& on_frame = {});

/// Plain global simulation (no control).
sim::Trajectory simulate(const sim::ParticleState& initial, const sim::SimConfig& cfg, int steps,
                         const std::function<void(int, const sim::ParticleState&)>& on_frame = {});

}  // namespace fluidctl::optimize
