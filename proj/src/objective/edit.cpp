#include "fluidctl/objective/edit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fluidctl::objective {

const char* to_string(EditMode mode) {
  switch (mode) {
    case EditMode::particle_keyframe: return "particle_keyframe";
    case EditMode::pathline: return "pathline";
    case EditMode::grid_density: return "grid_density";
  }
  return "?";
}

EditMode edit_mode_from_string(const std::string& name) {
  if (name == "particle_keyframe") return EditMode::particle_keyframe;
  if (name == "pathline") return EditMode::pathline;
  if (name == "grid_density") return EditMode::grid_density;
  throw ValidationError("edit.mode: unknown mode '" + name + "'");
}

std::vector<int> EditSpec::keyframes() const {
  std::set<int> frames;
  for (const auto& t : targets) frames.insert(t.frame);
  for (const auto& g : grid) frames.insert(g.frame);
  return {frames.begin(), frames.end()};
}

int EditSpec::latest_keyframe() const {
  const auto frames = keyframes();
  if (frames.empty()) throw ValidationError("edit: no targets");
  return frames.back();
}

std::size_t EditSpec::controlled_count() const {
  std::set<ParticleId> ids;
  for (const auto& t : targets) ids.insert(t.particle);
  return ids.size();
}

Vec3 sample_arc_length(const std::vector<Vec3>& points, double s) {
  if (points.empty()) throw ValidationError("pathline.points: empty");
  if (points.size() == 1) return points.front();
  std::vector<double> cumulative(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + (points[i] - points[i - 1]).norm();
  }
  const double total = cumulative.back();
  if (total == 0.0) return points.front();
  const double target = std::clamp(s, 0.0, 1.0) * total;
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.end()) return points.back();
  const std::size_t i = static_cast<std::size_t>(it - cumulative.begin());
  const double seg = cumulative[i] - cumulative[i - 1];
  const double u = seg > 0.0 ? (target - cumulative[i - 1]) / seg : 0.0;
  return points[i - 1] + u * (points[i] - points[i - 1]);
}

std::vector<ParticleTarget> compile_pathline(const Pathline& path, const sim::ParticleState& start) {
  std::vector<std::string> issues;
  if (path.particles.empty()) issues.push_back("edit.pathline.particles: empty");
  if (path.points.size() < 2) issues.push_back("edit.pathline.points: need at least 2 vertices");
  if (path.t_end <= path.t_begin) issues.push_back("edit.pathline.t_end: must exceed t_begin");
  if (!(path.weight >= 0.0)) issues.push_back("edit.pathline.weight: must be >= 0");
  for (const ParticleId p : path.particles) {
    if (p >= start.size()) {
      issues.push_back("edit.pathline.particles: id " + std::to_string(p) + " out of range");
      break;
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));

  Vec3 centroid = Vec3::Zero();
  for (const ParticleId p : path.particles) centroid += start.x[p];
  centroid /= static_cast<double>(path.particles.size());

  const int steps = path.t_end - path.t_begin;
  std::vector<ParticleTarget> out;
  out.reserve(static_cast<std::size_t>(steps) * path.particles.size());
  for (int k = 1; k <= steps; ++k) {
    const Vec3 c = sample_arc_length(path.points, static_cast<double>(k) / steps);
    for (const ParticleId p : path.particles) {
      out.push_back({path.t_begin + k, p, start.x[p] - centroid + c, path.weight});
    }
  }
  return out;
}

void compile(EditSpec& spec, const sim::Trajectory& baseline) {
  if (spec.mode != EditMode::pathline) return;
  if (!spec.pathline) throw ValidationError("edit.pathline: missing");
  const int t0 = spec.pathline->t_begin;
  if (t0 < 0 || t0 >= static_cast<int>(baseline.size())) {
    throw ValidationError("edit.pathline.t_begin: outside the simulated range");
  }
  spec.targets = compile_pathline(*spec.pathline, baseline[t0]);
}

void validate(const EditSpec& spec, const control::SpacetimeWindow& window,
              std::size_t particle_count) {
  std::vector<std::string> issues;
  auto in_window = [&](int f) { return f > window.t_start && f <= window.t_end; };
  if (spec.mode == EditMode::grid_density) {
    if (spec.grid.empty()) issues.push_back("edit.grid: at least one keyframe required");
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
      const auto& g = spec.grid[i];
      const std::string path = "edit.grid[" + std::to_string(i) + "]";
      if (!in_window(g.frame)) issues.push_back(path + ".frame: outside the window interval");
      if (g.density.size() != window.node_count()) {
        issues.push_back(path + ".density: expected " + std::to_string(window.node_count()) +
                         " nodes");
      }
    }
  } else {
    if (spec.targets.empty()) issues.push_back("edit.targets: at least one target required");
    for (std::size_t i = 0; i < spec.targets.size(); ++i) {
      const auto& t = spec.targets[i];
      const std::string path = "edit.targets[" + std::to_string(i) + "]";
      if (!in_window(t.frame)) issues.push_back(path + ".frame: outside the window interval");
      if (t.particle >= particle_count) issues.push_back(path + ".particle: id out of range");
      if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
        issues.push_back(path + ".weight: must be finite and >= 0");
      }
      if (!t.position.allFinite()) issues.push_back(path + ".position: must be finite");
      if (issues.size() > 20) break;
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

}  // namespace fluidctl::objective
