#pragma once

#include "fluidctl/sim/pbf.hpp"

#include <span>
#include <vector>

namespace fluidctl::diff {

/// Reverse-mode sensitivities of one step with respect to its inputs.
struct StepGradient {
  std::vector<Vec3> x;        // d/dx_t
  std::vector<Vec3> v;        // d/dv_t
  std::vector<Vec3> control;  // d/d(per-particle control force)
};

/// Pulls (d/dx_{t+1}, d/dv_{t+1}) back through one recorded step. Neighbor
/// lists and clamp/mask decisions are taken from the record and held fixed.
StepGradient step_adjoint(const sim::ParticleState& start, const sim::StepRecord& record,
                          const sim::SimConfig& cfg, std::span<const Vec3> x_next_bar,
                          std::span<const Vec3> v_next_bar);

/// Adjoint of one Jacobi round x -> clamp(x + dx(x)) given d/d(output).
/// Returns d/d(iteration input).
std::vector<Vec3> solver_iteration_adjoint(const sim::SolverIteration& it,
                                           const sim::NeighborTable& neighbors,
                                           const sim::SimConfig& cfg,
                                           std::span<const Vec3> out_bar);

/// Adjoint of vorticity_confinement: accumulates into x_bar and v_bar.
void vorticity_adjoint(const sim::ParticleState& state, const sim::VorticityRecord& record,
                       const sim::SimConfig& cfg, std::span<const Vec3> force_bar,
                       std::span<Vec3> x_bar, std::span<Vec3> v_bar);

}  // namespace fluidctl::diff
