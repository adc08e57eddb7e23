#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidctl {

// All geometry is carried in 3-vectors; 2D scenes keep z == 0.
using Vec3 = Eigen::Vector3d;

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p, int dim) const {
    for (int a = 0; a < dim; ++a) {
      if (p[a] < lo[a] || p[a] > hi[a]) return false;
    }
    return true;
  }

  Aabb dilated(double amount, int dim) const {
    Aabb out = *this;
    for (int a = 0; a < dim; ++a) {
      out.lo[a] -= amount;
      out.hi[a] += amount;
    }
    return out;
  }
};

/// Input rejected by validation. Carries one message per offending field,
/// each prefixed with the field path (e.g. "sim.dt: must be > 0").
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues);
  explicit ValidationError(std::string issue)
      : ValidationError(std::vector<std::string>{std::move(issue)}) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// The simulation produced non-finite values.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(int step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Array shapes that should agree do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace fluidctl
