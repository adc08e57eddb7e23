#include "fluidctl/sim/pbf.hpp"

#include <algorithm>
#include <cmath>

namespace fluidctl::sim {
namespace {

// Smoothing inside |omega| so its derivative exists at omega = 0.
constexpr double kOmegaSmoothing2 = 1e-24;

double ipow(double base, int exponent) {
  double out = 1.0;
  for (int k = 0; k < exponent; ++k) out *= base;
  return out;
}

AxisMask clamp_to_domain(Vec3& p, const SimConfig& cfg) {
  AxisMask free = kAllFree;
  for (int a = 0; a < cfg.dim; ++a) {
    if (p[a] < cfg.domain.lo[a]) {
      p[a] = cfg.domain.lo[a];
      free &= static_cast<AxisMask>(~(1u << a));
    } else if (p[a] > cfg.domain.hi[a]) {
      p[a] = cfg.domain.hi[a];
      free &= static_cast<AxisMask>(~(1u << a));
    }
  }
  return free;
}

}  // namespace

WallTerm wall_term(const Vec3& x, const SimConfig& cfg, const WallKernel& kernel) {
  WallTerm out;
  for (int a = 0; a < cfg.dim; ++a) {
    const double d_lo = x[a] - cfg.domain.lo[a];
    if (d_lo < kernel.h) {
      out.fraction += kernel.fraction(d_lo);
      out.grad[a] += kernel.d_fraction(d_lo);
      out.hess_diag[a] += kernel.d2_fraction(d_lo);
    }
    const double d_hi = cfg.domain.hi[a] - x[a];
    if (d_hi < kernel.h) {
      out.fraction += kernel.fraction(d_hi);
      out.grad[a] -= kernel.d_fraction(d_hi);
      out.hess_diag[a] += kernel.d2_fraction(d_hi);
    }
  }
  return out;
}

std::vector<double> compute_density(std::span<const Vec3> x, const NeighborTable& neighbors,
                                    const SimConfig& cfg) {
  const Kernel kernel(cfg.kernel_radius, cfg.dim);
  const WallKernel wall(cfg.kernel_radius, cfg.dim);
  const double m = cfg.mass();
  const double w0 = kernel.w(0.0);
  std::vector<double> density(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double sum = w0;
    for (const auto j : neighbors.of(i)) sum += kernel.w((x[i] - x[j]).squaredNorm());
    density[i] = m * sum + cfg.rest_density * wall_term(x[i], cfg, wall).fraction;
  }
  return density;
}

std::vector<Vec3> vorticity_confinement(const ParticleState& state, const NeighborTable& neighbors,
                                        const SimConfig& cfg, VorticityRecord* record) {
  const std::size_t n = state.size();
  std::vector<Vec3> force(n, Vec3::Zero());
  if (cfg.vorticity_strength == 0.0 || n == 0) {
    if (record) *record = VorticityRecord{};
    return force;
  }
  const Kernel kernel(cfg.kernel_radius, cfg.dim);
  const double m = cfg.mass();
  const auto& x = state.x;
  const auto& v = state.v;

  // Particle-only SPH density for the volume weights m / rho_j.
  std::vector<double> density(n);
  const double w0 = kernel.w(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = w0;
    for (const auto j : neighbors.of(i)) sum += kernel.w((x[i] - x[j]).squaredNorm());
    density[i] = m * sum;
  }
  std::vector<Vec3> omega(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 acc = Vec3::Zero();
    for (const auto j : neighbors.of(i)) {
      const Vec3 g = kernel.grad_spiky(x[i] - x[j]);
      acc += (m / density[j]) * g.cross(v[j] - v[i]);
    }
    omega[i] = acc;
  }
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::sqrt(omega[i].squaredNorm() + kOmegaSmoothing2);

  std::vector<Vec3> eta(n, Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 acc = Vec3::Zero();
    for (const auto j : neighbors.of(i)) {
      acc += (m / density[j]) * (mag[j] - mag[i]) * kernel.grad_spiky(x[i] - x[j]);
    }
    eta[i] = acc;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 normal = eta[i] / (eta[i].norm() + cfg.vorticity_eps);
    force[i] = cfg.vorticity_strength * normal.cross(omega[i]);
  }
  if (record) {
    record->neighbors = neighbors;
    record->density = std::move(density);
    record->omega = std::move(omega);
    record->omega_mag = std::move(mag);
    record->eta = std::move(eta);
    record->force = force;
  }
  return force;
}

ParticleState predict(const ParticleState& state, std::span<const Vec3> forces, const SimConfig& cfg,
                      std::vector<AxisMask>* clamp) {
  const std::size_t n = state.size();
  if (!forces.empty() && forces.size() != n) {
    throw ShapeError("predict: " + std::to_string(forces.size()) + " forces for " +
                     std::to_string(n) + " particles");
  }
  const double inv_m = 1.0 / cfg.mass();
  ParticleState out;
  out.x.resize(n);
  out.v.resize(n);
  if (clamp) clamp->assign(n, kAllFree);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 accel = cfg.gravity;
    if (!forces.empty()) accel += forces[i] * inv_m;
    out.v[i] = state.v[i] + cfg.dt * accel;
    out.x[i] = state.x[i] + cfg.dt * out.v[i];
    const AxisMask free = clamp_to_domain(out.x[i], cfg);
    if (clamp) (*clamp)[i] = free;
  }
  return out;
}

std::vector<Vec3> solve_incompressibility(std::span<const Vec3> predicted,
                                          const NeighborTable& neighbors, const SimConfig& cfg,
                                          std::vector<SolverIteration>* record) {
  const std::size_t n = predicted.size();
  const Kernel kernel(cfg.kernel_radius, cfg.dim);
  const WallKernel wall(cfg.kernel_radius, cfg.dim);
  const double m = cfg.mass();
  const double c = m / cfg.rest_density;
  const double w0 = kernel.w(0.0);
  const double dq = cfg.scorr_dq * cfg.kernel_radius;
  const double inv_wq = 1.0 / kernel.w(dq * dq);
  // lambda carries units of length^2; s_corr is expressed in kernel-radius units.
  const double scorr_scale = cfg.scorr_k * cfg.kernel_radius * cfg.kernel_radius;
  const double mixing = cfg.relaxation / (cfg.kernel_radius * cfg.kernel_radius);

  std::vector<Vec3> x(predicted.begin(), predicted.end());
  std::vector<double> density(n), denom(n), lambda(n);
  std::vector<Vec3> delta(n), wall_grad(n);
  if (record) record->clear();

  for (int iter = 0; iter < cfg.solver_iters; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum_w = w0;
      Vec3 grad_sum = Vec3::Zero();
      double grad_sq = 0.0;
      for (const auto j : neighbors.of(i)) {
        const Vec3 d = x[i] - x[j];
        sum_w += kernel.w(d.squaredNorm());
        const Vec3 g = kernel.grad_spiky(d);
        grad_sum += g;
        grad_sq += g.squaredNorm();
      }
      const WallTerm wt = wall_term(x[i], cfg, wall);
      wall_grad[i] = wt.grad;
      density[i] = m * sum_w + cfg.rest_density * wt.fraction;
      const double constraint = std::max(density[i] / cfg.rest_density - 1.0, 0.0);
      denom[i] = (c * grad_sum + wt.grad).squaredNorm() + c * c * grad_sq + mixing;
      lambda[i] = -constraint / denom[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 acc = Vec3::Zero();
      for (const auto j : neighbors.of(i)) {
        const Vec3 d = x[i] - x[j];
        const double s_corr = -scorr_scale * ipow(kernel.w(d.squaredNorm()) * inv_wq, cfg.scorr_n);
        acc += (lambda[i] + lambda[j] + s_corr) * kernel.grad_spiky(d);
      }
      delta[i] = c * acc + lambda[i] * wall_grad[i];
    }
    SolverIteration* rec = nullptr;
    if (record) {
      record->push_back(SolverIteration{x, density, denom, lambda, std::vector<AxisMask>(n)});
      rec = &record->back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += delta[i];
      const AxisMask free = clamp_to_domain(x[i], cfg);
      if (rec) rec->clamp[i] = free;
    }
  }
  return x;
}

std::vector<Vec3> update_velocity(std::span<const Vec3> x_new, std::span<const Vec3> x_old,
                                  double dt) {
  if (x_new.size() != x_old.size()) throw ShapeError("update_velocity: particle count mismatch");
  std::vector<Vec3> v(x_new.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (x_new[i] - x_old[i]) / dt;
  return v;
}

void apply_wall_velocity(std::span<const Vec3> x, std::span<Vec3> v, const SimConfig& cfg,
                         std::vector<AxisMask>* mask) {
  if (mask) mask->assign(x.size(), kAllFree);
  for (std::size_t i = 0; i < x.size(); ++i) {
    AxisMask free = kAllFree;
    for (int a = 0; a < cfg.dim; ++a) {
      const bool into_lo = x[i][a] <= cfg.domain.lo[a] && v[i][a] < 0.0;
      const bool into_hi = x[i][a] >= cfg.domain.hi[a] && v[i][a] > 0.0;
      if (into_lo || into_hi) {
        v[i][a] = 0.0;
        free &= static_cast<AxisMask>(~(1u << a));
      }
    }
    if (mask) (*mask)[i] = free;
  }
}

ParticleState step(const ParticleState& state, std::span<const Vec3> control, const SimConfig& cfg,
                   StepRecord* record) {
  const std::size_t n = state.size();
  if (state.v.size() != n) throw ShapeError("step: position/velocity count mismatch");
  if (!control.empty() && control.size() != n) throw ShapeError("step: control force count mismatch");
  if (n == 0) {
    if (record) *record = StepRecord{};
    return state;
  }

  std::vector<Vec3> forces;
  if (cfg.vorticity_strength != 0.0) {
    const NeighborTable vort_neighbors =
        NeighborTable::build(state.x, cfg.kernel_radius, cfg.dim, cfg.domain);
    forces = vorticity_confinement(state, vort_neighbors, cfg,
                                   record ? &record->vorticity : nullptr);
    if (!control.empty()) {
      for (std::size_t i = 0; i < n; ++i) forces[i] += control[i];
    }
  } else {
    if (record) record->vorticity = VorticityRecord{};
    forces.assign(control.begin(), control.end());
  }
  if (record) record->external.assign(control.begin(), control.end());

  ParticleState predicted = predict(state, forces, cfg, record ? &record->predict_clamp : nullptr);
  NeighborTable neighbors = NeighborTable::build(predicted.x, cfg.kernel_radius, cfg.dim, cfg.domain);
  ParticleState next;
  next.x = solve_incompressibility(predicted.x, neighbors, cfg, record ? &record->iterations : nullptr);
  next.v = update_velocity(next.x, state.x, cfg.dt);
  apply_wall_velocity(next.x, next.v, cfg, record ? &record->velocity_mask : nullptr);
  if (record) record->neighbors = std::move(neighbors);
  return next;
}

double mean_density_error(const ParticleState& state, const SimConfig& cfg) {
  if (state.size() == 0) return 0.0;
  const auto neighbors = NeighborTable::build(state.x, cfg.kernel_radius, cfg.dim, cfg.domain);
  const auto density = compute_density(state.x, neighbors, cfg);
  double sum = 0.0;
  for (const double rho : density) sum += std::abs(rho / cfg.rest_density - 1.0);
  return sum / static_cast<double>(density.size());
}

}  // namespace fluidctl::sim
