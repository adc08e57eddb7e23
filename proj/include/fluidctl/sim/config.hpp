#pragma once

#include "fluidctl/common.hpp"

namespace fluidctl::sim {

/// Physical and numerical parameters of the position-based fluid solver.
/// Units are SI-like: lengths in meters, time in seconds, density in kg/m^dim.
struct SimConfig {
  int dim = 2;
  double dt = 0.005;
  Vec3 gravity = Vec3(0.0, -9.8, 0.0);
  double particle_radius = 0.025;
  double kernel_radius = 0.1;  // 4r unless overridden
  double rest_density = 1000.0;
  int solver_iters = 4;
  // Constraint-force mixing added to the lambda denominator as relaxation / h^2.
  double relaxation = 1.0;
  // Tensile-instability correction: s = -k h^2 (W(d)/W(dq*h))^n, i.e. the
  // usual form with lengths measured in kernel radii.
  double scorr_k = 0.01;
  int scorr_n = 4;
  double scorr_dq = 0.3;
  double vorticity_strength = 0.0;
  // Guard added to |grad |omega|| when normalizing the confinement direction.
  double vorticity_eps = 1e-6;
  Aabb domain{Vec3(0.0, 0.0, 0.0), Vec3(1.0, 1.0, 0.0)};

  /// Throws ValidationError listing every violated invariant.
  void validate() const;

  /// Uniform particle mass. Chosen so a particle inside a regular lattice of
  /// spacing 2r sums to exactly rest_density under the density kernel.
  double mass() const;

  double rest_spacing() const { return 2.0 * particle_radius; }
};

}  // namespace fluidctl::sim
