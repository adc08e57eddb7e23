#pragma once

#include "fluidctl/control/classify.hpp"
#include "fluidctl/control/window.hpp"
#include "fluidctl/objective/edit.hpp"

#include <vector>

namespace fluidctl::objective {

struct ObjectiveWeights {
  double k_e = 1.0;
  double k_f = 1e-3;
  double k_t = 1e-2;
  double k_s = 1e-2;
  double k_b = 10.0;

  void validate() const;
  bool operator==(const ObjectiveWeights&) const = default;
};

struct TermBreakdown {
  double editing = 0.0;
  double magnitude = 0.0;
  double temporal = 0.0;
  double spatial = 0.0;
  double buffer = 0.0;

  double force() const { return magnitude + temporal + spatial; }
  double total() const { return editing + force() + buffer; }
};

/// d(objective)/dx for every frame of a window trajectory.
using PositionAdjoint = std::vector<std::vector<Vec3>>;

PositionAdjoint zero_adjoint(const sim::Trajectory& traj);

// The window trajectory `traj` holds frames t_start .. t_end of the window
// (traj[0] is global frame t_start). Every term optionally accumulates its
// gradient into `grad`, which must already be shaped like its input.

double particle_edit_loss(const sim::Trajectory& traj, int t_start, const EditSpec& spec,
                          const ObjectiveWeights& weights, PositionAdjoint* grad = nullptr);

double grid_edit_loss(const sim::Trajectory& traj, const control::SpacetimeWindow& window,
                      const EditSpec& spec, double mass, const ObjectiveWeights& weights,
                      PositionAdjoint* grad = nullptr);

/// Magnitude, temporal and spatial force terms (editing and buffer left 0).
TermBreakdown force_reg_loss(const control::ForceField& field, const control::SpacetimeWindow& window,
                             const ObjectiveWeights& weights, control::ForceField* grad = nullptr);

/// Buffer term. `classes[k]` is the baseline classification of window frame k
/// and `baseline` is indexed by global frame. `empty_buffer` is set when no
/// particle is ever in the buffer (the term is then 0).
double buffer_loss(const sim::Trajectory& traj, const sim::Trajectory& baseline,
                   const control::SpacetimeWindow& window,
                   const std::vector<control::ParticleClassification>& classes,
                   const ObjectiveWeights& weights, PositionAdjoint* grad = nullptr,
                   bool* empty_buffer = nullptr);

/// The full objective for one window, with the baseline classification
/// precomputed.
class Objective {
 public:
  /// `spec` must already be compiled. Validates spec, window and weights.
  Objective(const sim::Trajectory& baseline, control::SpacetimeWindow window, EditSpec spec,
            ObjectiveWeights weights, double mass);

  TermBreakdown evaluate(const sim::Trajectory& traj, const control::ForceField& field,
                         PositionAdjoint* dx = nullptr, control::ForceField* df = nullptr) const;

  const control::SpacetimeWindow& window() const { return window_; }
  const EditSpec& spec() const { return spec_; }
  const ObjectiveWeights& weights() const { return weights_; }
  const std::vector<control::ParticleClassification>& classes() const { return classes_; }
  bool empty_buffer() const { return empty_buffer_; }
  const sim::ParticleState& start_state() const { return (*baseline_)[window_.t_start]; }

 private:
  const sim::Trajectory* baseline_;
  control::SpacetimeWindow window_;
  EditSpec spec_;
  ObjectiveWeights weights_;
  double mass_;
  std::vector<control::ParticleClassification> classes_;
  bool empty_buffer_ = false;
};

}  // namespace fluidctl::objective
