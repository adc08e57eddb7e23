#include "fluidctl/optimize/resim.hpp"

#include "fluidctl/control/transfer.hpp"

#include <algorithm>

namespace fluidctl::optimize {

std::vector<ActiveInterval> active_intervals(const std::vector<ControlSolution>& solutions) {
  std::vector<ActiveInterval> out;
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    const auto& sol = solutions[s];
    const auto& w = sol.window;
    const int repeats = sol.template_period > 0 ? sol.template_repeats : 0;
    for (int r = 0; r <= repeats; ++r) {
      const int shift = r * sol.template_period;
      out.push_back({w.t_start + shift, w.t_end + shift, static_cast<int>(s), w.t_start + shift});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ActiveInterval& a, const ActiveInterval& b) { return a.begin < b.begin; });
  return out;
}

void check_non_overlapping(const std::vector<ControlSolution>& solutions) {
  std::vector<std::string> issues;
  for (std::size_t s = 0; s < solutions.size(); ++s) {
    const auto& sol = solutions[s];
    const std::string path = "solutions[" + std::to_string(s) + "]";
    if (!sol.field.matches(sol.window)) issues.push_back(path + ".field: does not match its window");
    if (sol.template_period > 0 && sol.template_period < sol.window.steps()) {
      issues.push_back(path + ".template_period: shorter than the window, replays would overlap");
    }
  }
  const auto intervals = active_intervals(solutions);
  for (std::size_t k = 1; k < intervals.size(); ++k) {
    const auto& a = intervals[k - 1];
    const auto& b = intervals[k];
    if (b.begin < a.end) {
      issues.push_back("solutions: windows must be non-overlapping in time (steps [" +
                       std::to_string(a.begin) + ", " + std::to_string(a.end) + ") and [" +
                       std::to_string(b.begin) + ", " + std::to_string(b.end) + ") overlap)");
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

sim::Trajectory resim_blend(const sim::ParticleState& initial, const sim::SimConfig& cfg, int steps,
                            const std::vector<ControlSolution>& solutions,
                            const std::function<void(int, const sim::ParticleState&)>& on_frame) {
  check_non_overlapping(solutions);
  const auto intervals = active_intervals(solutions);
  sim::Trajectory traj;
  traj.reserve(steps + 1);
  traj.push_back(initial);
  if (on_frame) on_frame(0, initial);
  std::size_t next = 0;
  for (int t = 0; t < steps; ++t) {
    while (next < intervals.size() && intervals[next].end <= t) ++next;
    std::vector<Vec3> forces;
    if (next < intervals.size() && intervals[next].begin <= t) {
      const auto& iv = intervals[next];
      const auto& sol = solutions[iv.solution];
      const auto slab = sol.field.slab(t - iv.offset);
      // An all-zero slab leaves the step exactly as uncontrolled.
      if (std::any_of(slab.begin(), slab.end(), [](double v) { return v != 0.0; })) {
        forces = control::transfer_forces(slab, traj.back().x, sol.window);
      }
    }
    auto next_state = sim::step(traj.back(), forces, cfg);
    for (std::size_t i = 0; i < next_state.size(); ++i) {
      if (!next_state.x[i].allFinite() || !next_state.v[i].allFinite()) {
        throw NumericalError(t, "particle " + std::to_string(i) + " became non-finite");
      }
    }
    traj.push_back(std::move(next_state));
    if (on_frame) on_frame(t + 1, traj.back());
  }
  return traj;
}

sim::Trajectory simulate(const sim::ParticleState& initial, const sim::SimConfig& cfg, int steps,
                         const std::function<void(int, const sim::ParticleState&)>& on_frame) {
  return resim_blend(initial, cfg, steps, {}, on_frame);
}

}  // namespace fluidctl::optimize
