#include "fluidctl/sim/config.hpp"

#include "fluidctl/sim/kernels.hpp"

#include <cmath>

namespace fluidctl::sim {

void SimConfig::validate() const {
  std::vector<std::string> issues;
  auto require = [&](bool ok, const char* field, const char* msg) {
    if (!ok) issues.push_back(std::string(field) + ": " + msg);
  };
  require(dim == 2 || dim == 3, "dim", "must be 2 or 3");
  require(std::isfinite(dt) && dt > 0.0, "dt", "must be > 0");
  require(std::isfinite(particle_radius) && particle_radius > 0.0, "particle_radius", "must be > 0");
  require(std::isfinite(kernel_radius) && kernel_radius > 0.0, "kernel_radius", "must be > 0");
  require(particle_radius < kernel_radius, "particle_radius", "must be smaller than kernel_radius");
  require(std::isfinite(rest_density) && rest_density > 0.0, "rest_density", "must be > 0");
  require(solver_iters >= 1, "solver_iters", "must be >= 1");
  require(std::isfinite(relaxation) && relaxation >= 0.0, "relaxation", "must be >= 0");
  require(scorr_dq > 0.0 && scorr_dq < 1.0, "scorr_dq", "must lie in (0, 1)");
  require(scorr_n >= 1, "scorr_n", "must be >= 1");
  require(std::isfinite(scorr_k) && scorr_k >= 0.0, "scorr_k", "must be >= 0");
  require(std::isfinite(vorticity_strength) && vorticity_strength >= 0.0, "vorticity_strength",
          "must be >= 0");
  require(std::isfinite(vorticity_eps) && vorticity_eps > 0.0, "vorticity_eps", "must be > 0");
  require(gravity.allFinite(), "gravity", "must be finite");
  if (dim == 2 || dim == 3) {
    for (int a = 0; a < dim; ++a) {
      if (!(domain.hi[a] > domain.lo[a])) {
        issues.push_back("domain: hi must exceed lo on every axis");
        break;
      }
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

double SimConfig::mass() const {
  const Kernel kernel(kernel_radius, dim);
  const double s = rest_spacing();
  const int reach = static_cast<int>(std::ceil(kernel_radius / s));
  double sum = 0.0;
  const int zreach = dim == 3 ? reach : 0;
  for (int k = -zreach; k <= zreach; ++k) {
    for (int j = -reach; j <= reach; ++j) {
      for (int i = -reach; i <= reach; ++i) {
        const double r2 = s * s * static_cast<double>(i * i + j * j + k * k);
        sum += kernel.w(r2);
      }
    }
  }
  return rest_density / sum;
}

}  // namespace fluidctl::sim
