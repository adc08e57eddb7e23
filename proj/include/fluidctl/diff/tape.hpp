#pragma once

#include "fluidctl/control/window.hpp"
#include "fluidctl/objective/objective.hpp"
#include "fluidctl/sim/pbf.hpp"

#include <vector>

namespace fluidctl::diff {

/// A recorded window simulation: frames t_start .. t_end and the per-step
/// intermediates needed to run it backwards.
struct Tape {
  sim::SimConfig cfg;
  control::SpacetimeWindow window;
  control::ForceField field;
  sim::Trajectory trajectory;          // trajectory[k] is global frame t_start + k
  std::vector<sim::StepRecord> steps;  // steps[k] maps frame k to k + 1
};

/// Simulates the window from `start` with the control field transferred onto
/// the particles at every step. Throws NumericalError carrying the global step
/// index when the state turns non-finite.
Tape forward_record(const sim::ParticleState& start, const control::ForceField& field,
                    const control::SpacetimeWindow& window, const sim::SimConfig& cfg);

/// Same trajectory as forward_record without keeping intermediates.
sim::Trajectory forward(const sim::ParticleState& start, const control::ForceField& field,
                        const control::SpacetimeWindow& window, const sim::SimConfig& cfg);

/// Gradient with respect to every field entry of an objective whose
/// sensitivities to the trajectory positions are `dx` (one entry per frame).
control::ForceField backward(const Tape& tape, const objective::PositionAdjoint& dx);

/// Multipliers of every solver round of step k, recomputed from the recorded
/// predicted positions and neighbor lists.
std::vector<std::vector<double>> replay_lambdas(const Tape& tape, int k);

}  // namespace fluidctl::diff
