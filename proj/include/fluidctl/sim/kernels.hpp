#pragma once

#include "fluidctl/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fluidctl::sim {

// Poly6 density kernel and spiky gradient kernel, in 2D or 3D.

inline double poly6_coefficient(double h, int dim) {
  if (dim == 2) return 4.0 / (std::numbers::pi * std::pow(h, 8));
  return 315.0 / (64.0 * std::numbers::pi * std::pow(h, 9));
}

inline double spiky_coefficient(double h, int dim) {
  // Coefficient of the gradient magnitude: |grad W| = c (h - r)^2.
  if (dim == 2) return 30.0 / (std::numbers::pi * std::pow(h, 5));
  return 45.0 / (std::numbers::pi * std::pow(h, 6));
}

/// Precomputed kernel constants for one (h, dim) pair.
struct Kernel {
  double h = 1.0;
  double h2 = 1.0;
  double c_poly6 = 0.0;
  double c_spiky = 0.0;

  Kernel() = default;
  Kernel(double radius, int dim)
      : h(radius), h2(radius * radius), c_poly6(poly6_coefficient(radius, dim)),
        c_spiky(spiky_coefficient(radius, dim)) {}

  double w(double r2) const {
    if (r2 >= h2) return 0.0;
    const double q = h2 - r2;
    return c_poly6 * q * q * q;
  }

  /// Gradient of the poly6 kernel with respect to d.
  Vec3 grad_w(const Vec3& d) const {
    const double r2 = d.squaredNorm();
    if (r2 >= h2) return Vec3::Zero();
    const double q = h2 - r2;
    return (-6.0 * c_poly6 * q * q) * d;
  }

  /// Spiky kernel gradient with respect to d. Zero at d = 0 and outside h.
  Vec3 grad_spiky(const Vec3& d) const {
    const double r2 = d.squaredNorm();
    if (r2 >= h2 || r2 == 0.0) return Vec3::Zero();
    const double r = std::sqrt(r2);
    const double q = h - r;
    return (-c_spiky * q * q / r) * d;
  }

  /// Jacobian of grad_spiky with respect to d (symmetric).
  Eigen::Matrix3d hess_spiky(const Vec3& d) const {
    const double r2 = d.squaredNorm();
    if (r2 >= h2 || r2 == 0.0) return Eigen::Matrix3d::Zero();
    const double r = std::sqrt(r2);
    const double q = h - r;
    const double phi = -c_spiky * q * q / r;
    // d(phi)/dr divided by r
    const double dphi_over_r = -c_spiky * (-2.0 * q / r - q * q / r2) / r;
    return phi * Eigen::Matrix3d::Identity() + dphi_over_r * d * d.transpose();
  }
};

/// Poly6 kernel value W(d, h).
inline double kernel_w(double d, double h, int dim) {
  return Kernel(h, dim).w(d * d);
}

/// Spiky kernel gradient.
inline Vec3 kernel_grad(const Vec3& d, double h, int dim) {
  return Kernel(h, dim).grad_spiky(d);
}

/// Fraction of the poly6 kernel mass lying beyond a planar wall at distance
/// `delta` from the particle (0.5 at contact, 0 beyond h), together with its
/// first and second derivatives in delta. Used to fill the density deficit of
/// particles next to the static domain walls.
struct WallKernel {
  double h = 1.0;
  int dim = 2;
  double c_poly6 = 0.0;

  WallKernel() = default;
  WallKernel(double radius, int dimension)
      : h(radius), dim(dimension), c_poly6(poly6_coefficient(radius, dimension)) {}

  double fraction(double delta) const {
    if (delta >= h) return 0.0;
    if (dim == 2) {
      // integral of cos^8 from asin(delta/h) to pi/2, scaled by (4/pi)(32/35)
      auto g = [](double t) {
        return 35.0 * t / 128.0 + 7.0 * std::sin(2 * t) / 32.0 + 7.0 * std::sin(4 * t) / 128.0 +
               std::sin(6 * t) / 96.0 + std::sin(8 * t) / 1024.0;
      };
      const double theta = std::asin(std::clamp(delta / h, -1.0, 1.0));
      return (4.0 / std::numbers::pi) * (32.0 / 35.0) * (g(std::numbers::pi / 2) - g(theta));
    }
    auto p = [this](double y) {
      const double h2 = h * h, y2 = y * y;
      return y * (h2 * h2 * h2 * h2 - (4.0 / 3.0) * h2 * h2 * h2 * y2 + (6.0 / 5.0) * h2 * h2 * y2 * y2 -
                  (4.0 / 7.0) * h2 * y2 * y2 * y2 + y2 * y2 * y2 * y2 / 9.0);
    };
    return c_poly6 * (std::numbers::pi / 4.0) * (p(h) - p(delta));
  }

  double d_fraction(double delta) const {
    if (delta >= h) return 0.0;
    const double q = h * h - delta * delta;
    if (dim == 2) return -c_poly6 * (32.0 / 35.0) * q * q * q * std::sqrt(q);
    return -c_poly6 * (std::numbers::pi / 4.0) * q * q * q * q;
  }

  double d2_fraction(double delta) const {
    if (delta >= h) return 0.0;
    const double q = h * h - delta * delta;
    if (dim == 2) return 7.0 * delta * c_poly6 * (32.0 / 35.0) * q * q * std::sqrt(q);
    return 8.0 * delta * c_poly6 * (std::numbers::pi / 4.0) * q * q * q;
  }
};

}  // namespace fluidctl::sim
