#include "fluidctl/diff/tape.hpp"

#include "fluidctl/control/transfer.hpp"
#include "fluidctl/diff/step_adjoint.hpp"

#include <algorithm>
#include <cmath>

namespace fluidctl::diff {

namespace {

void check_finite(const sim::ParticleState& s, int global_step) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.x[i].allFinite() || !s.v[i].allFinite()) {
      throw NumericalError(global_step, "particle " + std::to_string(i) + " became non-finite");
    }
  }
}

template <class Recorder>
sim::Trajectory run(const sim::ParticleState& start, const control::ForceField& field,
                    const control::SpacetimeWindow& window, const sim::SimConfig& cfg,
                    Recorder&& recorder) {
  if (!field.matches(window)) throw ShapeError("force field does not match the window");
  sim::Trajectory traj;
  traj.reserve(window.steps() + 1);
  traj.push_back(start);
  for (int k = 0; k < window.steps(); ++k) {
    const auto& cur = traj.back();
    const auto slab = field.slab(k);
    std::vector<Vec3> forces;
    if (std::any_of(slab.begin(), slab.end(), [](double v) { return v != 0.0; })) {
      forces = control::transfer_forces(slab, cur.x, window);
    }
    auto next = sim::step(cur, forces, cfg, recorder(k));
    check_finite(next, window.t_start + k);
    traj.push_back(std::move(next));
  }
  return traj;
}

}  // namespace

Tape forward_record(const sim::ParticleState& start, const control::ForceField& field,
                    const control::SpacetimeWindow& window, const sim::SimConfig& cfg) {
  Tape tape{cfg, window, field, {}, std::vector<sim::StepRecord>(window.steps())};
  tape.trajectory = run(start, field, window, cfg, [&](int k) { return &tape.steps[k]; });
  return tape;
}

sim::Trajectory forward(const sim::ParticleState& start, const control::ForceField& field,
                        const control::SpacetimeWindow& window, const sim::SimConfig& cfg) {
  return run(start, field, window, cfg, [](int) -> sim::StepRecord* { return nullptr; });
}

control::ForceField backward(const Tape& tape, const objective::PositionAdjoint& dx) {
  const int T = tape.window.steps();
  if (static_cast<int>(dx.size()) != T + 1 || static_cast<int>(tape.steps.size()) != T) {
    throw ShapeError("backward: adjoint covers " + std::to_string(dx.size()) +
                     " frames, tape has " + std::to_string(tape.trajectory.size()));
  }
  const std::size_t n = tape.trajectory.front().size();
  control::ForceField grad(tape.window);
  std::vector<Vec3> x_bar(dx[T].begin(), dx[T].end());
  std::vector<Vec3> v_bar(n, Vec3::Zero());
  if (x_bar.size() != n) throw ShapeError("backward: adjoint particle count mismatch");
  for (int k = T - 1; k >= 0; --k) {
    const auto& state = tape.trajectory[k];
    auto g = step_adjoint(state, tape.steps[k], tape.cfg, x_bar, v_bar);
    control::transfer_forces_adjoint(tape.field.slab(k), state.x, tape.window, g.control,
                                     grad.slab(k), g.x);
    for (std::size_t i = 0; i < n; ++i) g.x[i] += dx[k][i];
    x_bar = std::move(g.x);
    v_bar = std::move(g.v);
  }
  for (const double v : grad.data()) {
    if (!std::isfinite(v)) throw NumericalError(tape.window.t_start, "non-finite gradient");
  }
  return grad;
}

std::vector<std::vector<double>> replay_lambdas(const Tape& tape, int k) {
  const auto& rec = tape.steps.at(k);
  if (rec.iterations.empty()) return {};
  std::vector<sim::SolverIteration> iters;
  sim::solve_incompressibility(rec.iterations.front().x, rec.neighbors, tape.cfg, &iters);
  std::vector<std::vector<double>> out;
  for (auto& it : iters) out.push_back(std::move(it.lambda));
  return out;
}

}  // namespace fluidctl::diff
