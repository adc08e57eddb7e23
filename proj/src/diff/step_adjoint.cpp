#include "fluidctl/diff/step_adjoint.hpp"

#include <cmath>

namespace fluidctl::diff {

using sim::AxisMask;
using sim::Kernel;
using sim::WallKernel;

namespace {

double ipow(double base, int exponent) {
  double out = 1.0;
  for (int k = 0; k < exponent; ++k) out *= base;
  return out;
}

Vec3 masked(const Vec3& g, AxisMask free) {
  Vec3 out = g;
  for (int a = 0; a < 3; ++a) {
    if (!(free & (1u << a))) out[a] = 0.0;
  }
  return out;
}

}  // namespace

std::vector<Vec3> solver_iteration_adjoint(const sim::SolverIteration& it,
                                           const sim::NeighborTable& neighbors,
                                           const sim::SimConfig& cfg,
                                           std::span<const Vec3> out_bar) {
  const std::size_t n = it.x.size();
  const Kernel kernel(cfg.kernel_radius, cfg.dim);
  const WallKernel wall(cfg.kernel_radius, cfg.dim);
  const double m = cfg.mass();
  const double rho0 = cfg.rest_density;
  const double c = m / rho0;
  const double dq = cfg.scorr_dq * cfg.kernel_radius;
  const double inv_wq = 1.0 / kernel.w(dq * dq);
  const double scorr_scale = cfg.scorr_k * cfg.kernel_radius * cfg.kernel_radius;
  const int n_corr = cfg.scorr_n;
  const auto& x = it.x;
  const auto& lambda = it.lambda;

  // The round's correction sees the output adjoint only on free axes.
  std::vector<Vec3> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = masked(out_bar[i], it.clamp[i]);

  std::vector<Vec3> x_bar(a);
  std::vector<sim::WallTerm> walls(n);
  std::vector<Vec3> grad_sum_bar(n), wall_grad_bar(n);
  std::vector<double> s_bar(n), rho_bar(n);

  for (std::size_t i = 0; i < n; ++i) {
    walls[i] = sim::wall_term(x[i], cfg, wall);
    Vec3 grad_sum = Vec3::Zero();
    double lambda_bar = a[i].dot(walls[i].grad);
    for (const auto j : neighbors.of(i)) {
      const Vec3 g = kernel.grad_spiky(x[i] - x[j]);
      grad_sum += g;
      lambda_bar += c * (a[i] - a[j]).dot(g);
    }
    const double constraint = std::max(it.density[i] / rho0 - 1.0, 0.0);
    const double denom = it.denom[i];
    const double c_bar = constraint > 0.0 ? -lambda_bar / denom : 0.0;
    s_bar[i] = -lambda_bar * lambda[i] / denom;
    rho_bar[i] = c_bar / rho0;
    const Vec3 inner = c * grad_sum + walls[i].grad;
    grad_sum_bar[i] = (2.0 * s_bar[i] * c) * inner;
    wall_grad_bar[i] = lambda[i] * a[i] + (2.0 * s_bar[i]) * inner;
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto j : neighbors.of(i)) {
      const Vec3 d = x[i] - x[j];
      const Vec3 g = kernel.grad_spiky(d);
      const Eigen::Matrix3d H = kernel.hess_spiky(d);
      const Vec3 grad_w = kernel.grad_w(d);
      const double wr = kernel.w(d.squaredNorm()) * inv_wq;
      const double s_corr = -scorr_scale * ipow(wr, n_corr);
      const Vec3 grad_s =
          (n_corr > 0 ? -scorr_scale * n_corr * ipow(wr, n_corr - 1) * inv_wq : 0.0) * grad_w;

      Vec3 g_bar = c * (lambda[i] + lambda[j] + s_corr) * a[i] + grad_sum_bar[i] +
                   (2.0 * c * c * s_bar[i]) * g;
      Vec3 d_bar = H * g_bar + (c * g.dot(a[i])) * grad_s + (rho_bar[i] * m) * grad_w;
      x_bar[i] += d_bar;
      x_bar[j] -= d_bar;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (int ax = 0; ax < cfg.dim; ++ax) {
      x_bar[i][ax] += wall_grad_bar[i][ax] * walls[i].hess_diag[ax] +
                      rho_bar[i] * rho0 * walls[i].grad[ax];
    }
  }
  return x_bar;
}

void vorticity_adjoint(const sim::ParticleState& state, const sim::VorticityRecord& rec,
                       const sim::SimConfig& cfg, std::span<const Vec3> force_bar,
                       std::span<Vec3> x_bar, std::span<Vec3> v_bar) {
  const std::size_t n = state.size();
  if (cfg.vorticity_strength == 0.0 || n == 0) return;
  const Kernel kernel(cfg.kernel_radius, cfg.dim);
  const double m = cfg.mass();
  const double eps_v = cfg.vorticity_strength;
  const auto& x = state.x;
  const auto& v = state.v;
  const auto& nbrs = rec.neighbors;
  const auto& rho = rec.density;
  const auto& omega = rec.omega;
  const auto& mu = rec.omega_mag;
  const auto& eta = rec.eta;

  std::vector<Vec3> omega_bar(n), eta_bar(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double len = eta[i].norm();
    const double scale = len + cfg.vorticity_eps;
    const Vec3 normal = eta[i] / scale;
    const Vec3 normal_bar = eps_v * omega[i].cross(force_bar[i]);
    omega_bar[i] = eps_v * force_bar[i].cross(normal);
    eta_bar[i] = normal_bar / scale;
    if (len > 0.0) eta_bar[i] -= (eta[i].dot(normal_bar) / (len * scale * scale)) * eta[i];
  }

  std::vector<double> mu_bar(n, 0.0), vol_bar(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto j : nbrs.of(i)) {
      const Vec3 d = x[i] - x[j];
      const Vec3 g = kernel.grad_spiky(d);
      const double vol = m / rho[j];
      const double ge = g.dot(eta_bar[i]);
      mu_bar[j] += vol * ge;
      mu_bar[i] -= vol * ge;
      vol_bar[j] += (mu[j] - mu[i]) * ge;
      const Vec3 d_bar = (vol * (mu[j] - mu[i])) * (kernel.hess_spiky(d) * eta_bar[i]);
      x_bar[i] += d_bar;
      x_bar[j] -= d_bar;
    }
  }
  for (std::size_t i = 0; i < n; ++i) omega_bar[i] += (mu_bar[i] / mu[i]) * omega[i];

  for (std::size_t i = 0; i < n; ++i) {
    for (const auto j : nbrs.of(i)) {
      const Vec3 d = x[i] - x[j];
      const Vec3 g = kernel.grad_spiky(d);
      const Vec3 u = v[j] - v[i];
      const double vol = m / rho[j];
      const Vec3 u_bar = vol * omega_bar[i].cross(g);
      v_bar[j] += u_bar;
      v_bar[i] -= u_bar;
      vol_bar[j] += omega_bar[i].dot(g.cross(u));
      const Vec3 d_bar = vol * (kernel.hess_spiky(d) * u.cross(omega_bar[i]));
      x_bar[i] += d_bar;
      x_bar[j] -= d_bar;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const double rho_bar = -vol_bar[i] * m / (rho[i] * rho[i]);
    for (const auto j : nbrs.of(i)) {
      const Vec3 d_bar = (rho_bar * m) * kernel.grad_w(x[i] - x[j]);
      x_bar[i] += d_bar;
      x_bar[j] -= d_bar;
    }
  }
}

StepGradient step_adjoint(const sim::ParticleState& start, const sim::StepRecord& rec,
                          const sim::SimConfig& cfg, std::span<const Vec3> x_next_bar,
                          std::span<const Vec3> v_next_bar) {
  const std::size_t n = start.size();
  StepGradient out;
  out.x.assign(n, Vec3::Zero());
  out.v.assign(n, Vec3::Zero());
  out.control.assign(n, Vec3::Zero());
  if (n == 0) return out;
  if (x_next_bar.size() != n || v_next_bar.size() != n) {
    throw ShapeError("step_adjoint: adjoint size does not match the particle count");
  }
  const double inv_dt = 1.0 / cfg.dt;

  // Velocity update and wall velocity mask.
  std::vector<Vec3> x_bar(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 vb = masked(v_next_bar[i], rec.velocity_mask[i]) * inv_dt;
    x_bar[i] = x_next_bar[i] + vb;
    out.x[i] -= vb;
  }

  for (auto it = rec.iterations.rbegin(); it != rec.iterations.rend(); ++it) {
    x_bar = solver_iteration_adjoint(*it, rec.neighbors, cfg, x_bar);
  }

  // Prediction: x* = clamp(x + dt v + dt^2 (g + f / m)).
  const double dt = cfg.dt;
  const double force_scale = dt * dt / cfg.mass();
  std::vector<Vec3> force_bar(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 pb = masked(x_bar[i], rec.predict_clamp[i]);
    out.x[i] += pb;
    out.v[i] += dt * pb;
    force_bar[i] = force_scale * pb;
  }
  out.control = force_bar;
  if (cfg.vorticity_strength != 0.0) vorticity_adjoint(start, rec.vorticity, cfg, force_bar, out.x, out.v);
  return out;
}

}  // namespace fluidctl::diff
