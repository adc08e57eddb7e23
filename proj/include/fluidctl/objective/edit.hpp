#pragma once

#include "fluidctl/control/classify.hpp"
#include "fluidctl/sim/pbf.hpp"

#include <optional>
#include <vector>

namespace fluidctl::objective {

using control::ParticleId;

enum class EditMode { particle_keyframe, pathline, grid_density };

const char* to_string(EditMode mode);
EditMode edit_mode_from_string(const std::string& name);  // throws ValidationError

/// Target position of one particle at one frame.
struct ParticleTarget {
  int frame = 0;
  ParticleId particle = 0;
  Vec3 position = Vec3::Zero();
  double weight = 1.0;

  bool operator==(const ParticleTarget&) const = default;
};

/// Target projected density for every window node at one frame.
struct GridKeyframe {
  int frame = 0;
  std::vector<double> density;

  bool operator==(const GridKeyframe&) const = default;
};

/// A polyline the centroid of `particles` should follow from frame `t_begin`
/// (where the group sits) to `t_end`.
struct Pathline {
  std::vector<ParticleId> particles;
  std::vector<Vec3> points;
  int t_begin = 0;
  int t_end = 0;
  double weight = 1.0;

  bool operator==(const Pathline&) const = default;
};

struct EditSpec {
  EditMode mode = EditMode::particle_keyframe;
  std::vector<ParticleTarget> targets;  // particle modes (compiled for pathlines)
  std::vector<GridKeyframe> grid;       // grid_density
  std::optional<Pathline> pathline;     // pathline, before compilation

  /// Sorted distinct keyframe frames.
  std::vector<int> keyframes() const;
  int latest_keyframe() const;
  /// Number of distinct target particles.
  std::size_t controlled_count() const;

  bool operator==(const EditSpec&) const = default;
};

/// Point at normalized arc length s in [0, 1] along the polyline.
Vec3 sample_arc_length(const std::vector<Vec3>& points, double s);

/// Per-frame targets for frames t_begin + 1 .. t_end: each particle keeps its
/// offset from the group centroid at t_begin while the centroid moves along
/// the curve at uniform arc-length speed.
std::vector<ParticleTarget> compile_pathline(const Pathline& path, const sim::ParticleState& start);

/// Fills spec.targets from spec.pathline when the mode is pathline; `baseline`
/// is indexed by global frame.
void compile(EditSpec& spec, const sim::Trajectory& baseline);

/// Checks frame ranges and particle ids against a window and particle count.
void validate(const EditSpec& spec, const control::SpacetimeWindow& window,
              std::size_t particle_count);

}  // namespace fluidctl::objective
