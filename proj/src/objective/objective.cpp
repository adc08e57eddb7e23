#include "fluidctl/objective/objective.hpp"

#include "fluidctl/control/transfer.hpp"

#include <cmath>

namespace fluidctl::objective {

using control::ForceField;
using control::SpacetimeWindow;

void ObjectiveWeights::validate() const {
  std::vector<std::string> issues;
  auto check = [&](const char* name, double v) {
    if (!(std::isfinite(v) && v >= 0.0)) {
      issues.push_back(std::string("weights.") + name + ": must be finite and >= 0");
    }
  };
  check("k_e", k_e);
  check("k_f", k_f);
  check("k_t", k_t);
  check("k_s", k_s);
  check("k_b", k_b);
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

PositionAdjoint zero_adjoint(const sim::Trajectory& traj) {
  PositionAdjoint out(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) out[k].assign(traj[k].size(), Vec3::Zero());
  return out;
}

namespace {

const sim::ParticleState& frame_of(const sim::Trajectory& traj, int t_start, int frame) {
  const int k = frame - t_start;
  if (k < 0 || k >= static_cast<int>(traj.size())) {
    throw ShapeError("frame " + std::to_string(frame) + " is not covered by the window trajectory");
  }
  return traj[k];
}

}  // namespace

double particle_edit_loss(const sim::Trajectory& traj, int t_start, const EditSpec& spec,
                          const ObjectiveWeights& weights, PositionAdjoint* grad) {
  if (spec.mode == EditMode::grid_density) {
    throw ValidationError("edit.mode: particle loss needs a particle edit");
  }
  const std::size_t n_p = spec.controlled_count();
  if (n_p == 0) return 0.0;
  const double scale = weights.k_e / static_cast<double>(n_p);
  double sum = 0.0;
  for (const auto& t : spec.targets) {
    const auto& state = frame_of(traj, t_start, t.frame);
    if (t.particle >= state.size()) {
      throw ValidationError("edit.targets: particle id " + std::to_string(t.particle) +
                            " out of range");
    }
    const Vec3 d = state.x[t.particle] - t.position;
    sum += t.weight * d.squaredNorm();
    if (grad) (*grad)[t.frame - t_start][t.particle] += (2.0 * scale * t.weight) * d;
  }
  return scale * sum;
}

double grid_edit_loss(const sim::Trajectory& traj, const SpacetimeWindow& window,
                      const EditSpec& spec, double mass, const ObjectiveWeights& weights,
                      PositionAdjoint* grad) {
  if (spec.mode != EditMode::grid_density) {
    throw ValidationError("edit.mode: grid loss needs a grid_density edit");
  }
  const std::size_t n_g = window.node_count();
  const double scale = weights.k_e / static_cast<double>(n_g);
  double sum = 0.0;
  for (const auto& key : spec.grid) {
    if (key.density.size() != n_g) {
      throw ShapeError("grid keyframe has " + std::to_string(key.density.size()) +
                       " nodes, window has " + std::to_string(n_g));
    }
    const auto& state = frame_of(traj, window.t_start, key.frame);
    const auto rho = control::project_density(state.x, mass, window);
    std::vector<double> rho_bar(n_g, 0.0);
    for (std::size_t g = 0; g < n_g; ++g) {
      const double d = rho[g] - key.density[g];
      sum += d * d;
      rho_bar[g] = 2.0 * scale * d;
    }
    if (grad) {
      control::project_density_adjoint(state.x, mass, window, rho_bar,
                                       (*grad)[key.frame - window.t_start]);
    }
  }
  return scale * sum;
}

TermBreakdown force_reg_loss(const ForceField& field, const SpacetimeWindow& window,
                             const ObjectiveWeights& weights, ForceField* grad) {
  if (!field.matches(window)) throw ShapeError("force field does not match the window");
  const int T = field.slabs();
  const int dim = field.dim();
  const std::size_t n_g = field.nodes();
  const double ng = static_cast<double>(n_g);
  TermBreakdown out;

  const double c_mag = weights.k_f / ng;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double f = field.data()[i];
    out.magnitude += f * f;
    if (grad) grad->data()[i] += 2.0 * c_mag * f;
  }
  out.magnitude *= c_mag;

  if (T >= 2) {
    const double c_t = weights.k_t / (ng * (T - 1));
    for (int t = 1; t < T; ++t) {
      const auto cur = field.slab(t);
      const auto prev = field.slab(t - 1);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const double d = cur[i] - prev[i];
        out.temporal += d * d;
        if (grad) {
          grad->slab(t)[i] += 2.0 * c_t * d;
          grad->slab(t - 1)[i] -= 2.0 * c_t * d;
        }
      }
    }
    out.temporal *= c_t;
  }

  // Forward differences, backward at the last node of each axis.
  const double c_s = weights.k_s / ng;
  const double inv_h = 1.0 / window.spacing;
  for (int t = 0; t < T; ++t) {
    for (std::size_t node = 0; node < n_g; ++node) {
      const auto idx = window.node_index(node);
      for (int a = 0; a < dim; ++a) {
        if (window.node_counts[a] < 2) continue;
        auto shifted = idx;
        std::size_t lo = node, hi = node;
        if (idx[a] + 1 < window.node_counts[a]) {
          ++shifted[a];
          hi = window.flat_index(shifted[0], shifted[1], shifted[2]);
        } else {
          --shifted[a];
          lo = window.flat_index(shifted[0], shifted[1], shifted[2]);
        }
        for (int c = 0; c < dim; ++c) {
          const double d = (field.at(t, hi, c) - field.at(t, lo, c)) * inv_h;
          out.spatial += d * d;
          if (grad) {
            grad->at(t, hi, c) += 2.0 * c_s * d * inv_h;
            grad->at(t, lo, c) -= 2.0 * c_s * d * inv_h;
          }
        }
      }
    }
  }
  out.spatial *= c_s;
  return out;
}

double buffer_loss(const sim::Trajectory& traj, const sim::Trajectory& baseline,
                   const SpacetimeWindow& window,
                   const std::vector<control::ParticleClassification>& classes,
                   const ObjectiveWeights& weights, PositionAdjoint* grad, bool* empty_buffer) {
  if (classes.size() != traj.size()) {
    throw ShapeError("buffer_loss: classification covers " + std::to_string(classes.size()) +
                     " frames, trajectory has " + std::to_string(traj.size()));
  }
  const std::size_t n_b = control::buffer_union(classes).size();
  if (empty_buffer) *empty_buffer = n_b == 0;
  if (n_b == 0) return 0.0;
  const double scale = weights.k_b / static_cast<double>(n_b);
  double sum = 0.0;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& x = traj[k].x;
    const auto& x0 = frame_of(baseline, 0, window.t_start + static_cast<int>(k)).x;
    for (const auto p : classes[k].buffer) {
      const Vec3 d = x[p] - x0[p];
      sum += d.squaredNorm();
      if (grad) (*grad)[k][p] += (2.0 * scale) * d;
    }
  }
  return scale * sum;
}

Objective::Objective(const sim::Trajectory& baseline, SpacetimeWindow window, EditSpec spec,
                     ObjectiveWeights weights, double mass)
    : baseline_(&baseline), window_(std::move(window)), spec_(std::move(spec)),
      weights_(weights), mass_(mass) {
  weights_.validate();
  if (static_cast<int>(baseline.size()) <= window_.t_end) {
    throw ValidationError("window.t_end: beyond the simulated range");
  }
  validate(spec_, window_, baseline[window_.t_start].size());
  classes_ = control::classify_window(window_, baseline);
  empty_buffer_ = control::buffer_union(classes_).empty();
}

TermBreakdown Objective::evaluate(const sim::Trajectory& traj, const ForceField& field,
                                  PositionAdjoint* dx, ForceField* df) const {
  TermBreakdown out = force_reg_loss(field, window_, weights_, df);
  if (spec_.mode == EditMode::grid_density) {
    out.editing = grid_edit_loss(traj, window_, spec_, mass_, weights_, dx);
  } else {
    out.editing = particle_edit_loss(traj, window_.t_start, spec_, weights_, dx);
  }
  out.buffer = buffer_loss(traj, *baseline_, window_, classes_, weights_, dx);
  return out;
}

}  // namespace fluidctl::objective
