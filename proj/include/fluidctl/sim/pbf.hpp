#pragma once

#include "fluidctl/sim/config.hpp"
#include "fluidctl/sim/kernels.hpp"
#include "fluidctl/sim/neighbors.hpp"

#include <span>
#include <vector>

namespace fluidctl::sim {

struct ParticleState {
  std::vector<Vec3> x;
  std::vector<Vec3> v;

  std::size_t size() const { return x.size(); }
  bool operator==(const ParticleState&) const = default;
};

/// Frame k is the state after k steps from the trajectory's first frame.
using Trajectory = std::vector<ParticleState>;

// Per-axis "free" flags: bit a is set when axis a was not clamped, i.e. the
// clamp had unit derivative along that axis.
using AxisMask = std::uint8_t;
inline constexpr AxisMask kAllFree = 0b111;

/// Intermediates of one Jacobi round of the density solve.
struct SolverIteration {
  std::vector<Vec3> x;           // positions the round started from
  std::vector<double> density;
  std::vector<double> denom;     // sum_k |grad_k C_i|^2 + relaxation
  std::vector<double> lambda;
  std::vector<AxisMask> clamp;   // clamp applied after the correction
};

/// Vorticity confinement evaluated on the state a step starts from.
struct VorticityRecord {
  NeighborTable neighbors;
  std::vector<double> density;
  std::vector<Vec3> omega;
  std::vector<double> omega_mag;  // smoothed |omega|
  std::vector<Vec3> eta;          // SPH estimate of grad |omega|
  std::vector<Vec3> force;
};

/// Everything the adjoint pass needs to replay one step backwards.
struct StepRecord {
  VorticityRecord vorticity;
  std::vector<Vec3> external;    // per-particle control forces
  std::vector<AxisMask> predict_clamp;
  NeighborTable neighbors;       // built on predicted positions
  std::vector<SolverIteration> iterations;
  std::vector<AxisMask> velocity_mask;  // velocity components kept after wall handling
};

/// Confinement force from the velocity field of `state`. Fills `record` when
/// provided. Returns all zeros when vorticity_strength == 0.
std::vector<Vec3> vorticity_confinement(const ParticleState& state, const NeighborTable& neighbors,
                                        const SimConfig& cfg, VorticityRecord* record = nullptr);

/// Semi-implicit Euler prediction under gravity plus `forces` (per particle).
/// Positions are clamped to the domain; `clamp` receives the axis masks.
ParticleState predict(const ParticleState& state, std::span<const Vec3> forces, const SimConfig& cfg,
                      std::vector<AxisMask>* clamp = nullptr);

/// Wall contribution for a particle at x: the fraction of kernel mass cut off
/// by the domain walls (summed over walls), its gradient, and the diagonal of
/// its Hessian.
struct WallTerm {
  double fraction = 0.0;
  Vec3 grad = Vec3::Zero();
  Vec3 hess_diag = Vec3::Zero();
};
WallTerm wall_term(const Vec3& x, const SimConfig& cfg, const WallKernel& kernel);

/// Density of every particle: self and neighbor contributions plus the wall
/// fill, rest_density * wall fraction.
std::vector<double> compute_density(std::span<const Vec3> x, const NeighborTable& neighbors,
                                    const SimConfig& cfg);

/// cfg.solver_iters Jacobi rounds of the density constraint projection. The
/// constraint is one-sided: only compressed particles (rho > rho0) produce a
/// multiplier; s_corr acts on every pair.
std::vector<Vec3> solve_incompressibility(std::span<const Vec3> predicted,
                                          const NeighborTable& neighbors, const SimConfig& cfg,
                                          std::vector<SolverIteration>* record = nullptr);

/// (x_new - x_old) / dt.
std::vector<Vec3> update_velocity(std::span<const Vec3> x_new, std::span<const Vec3> x_old,
                                  double dt);

/// Removes velocity components that push particles resting on a wall into it.
void apply_wall_velocity(std::span<const Vec3> x, std::span<Vec3> v, const SimConfig& cfg,
                         std::vector<AxisMask>* mask = nullptr);

/// One full solver step. `control` holds per-particle control forces or is
/// empty for none. The vorticity force of the incoming state is evaluated
/// first and injected in the prediction alongside gravity and control.
ParticleState step(const ParticleState& state, std::span<const Vec3> control, const SimConfig& cfg,
                   StepRecord* record = nullptr);

/// Mean |rho/rho0 - 1| over all particles.
double mean_density_error(const ParticleState& state, const SimConfig& cfg);

}  // namespace fluidctl::sim
