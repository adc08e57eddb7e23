#pragma once

#include "fluidctl/objective/edit.hpp"
#include "fluidctl/objective/objective.hpp"
#include "fluidctl/optimize/optimize.hpp"
#include "fluidctl/sim/config.hpp"
#include "fluidctl/sim/pbf.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fluidctl::io {

/// One initial-layout primitive. Blocks fill [lo, hi] on a lattice; balls
/// fill a disc/sphere.
struct LayoutPrimitive {
  enum class Kind { block, ball } kind = Kind::block;
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  std::optional<double> spacing;  // default: rest spacing 2r
  Vec3 velocity = Vec3::Zero();

  bool operator==(const LayoutPrimitive&) const = default;
};

struct SceneConfig {
  sim::SimConfig sim;
  std::vector<LayoutPrimitive> layout;
  int steps = 100;
  std::uint64_t seed = 0;
  double jitter = 0.0;  // random offset per particle, in units of its spacing

  void validate() const;
  sim::ParticleState initial_state() const;
};

/// Spatial window plus how its time interval is chosen.
struct WindowSpec {
  Vec3 origin = Vec3::Zero();
  std::array<int, 3> nodes{2, 2, 1};
  std::optional<double> spacing;    // length
  std::optional<double> spacing_r;  // in particle radii
  std::optional<double> buffer;     // default 2h
  std::optional<int> t_start;
  std::optional<int> t_end;            // default: latest keyframe
  std::optional<int> temporal_window;  // T, window ends at the latest keyframe
  std::optional<int> trace_cap;        // backward trace from the latest keyframe

  bool operator==(const WindowSpec&) const = default;
};

/// Grid keyframe given inline or as a raster file.
struct GridKeyframeSpec {
  int frame = 0;
  std::vector<double> density;
  std::string image;

  bool operator==(const GridKeyframeSpec&) const = default;
};

struct JobConfig {
  int dim = 2;           // taken from the window origin
  std::string baseline;  // optional reference (scene id or frame directory)
  WindowSpec window;
  objective::EditMode mode = objective::EditMode::particle_keyframe;
  std::vector<objective::ParticleTarget> targets;
  std::optional<objective::Pathline> pathline;
  std::vector<GridKeyframeSpec> grid;
  objective::ObjectiveWeights weights;
  optimize::OptimizeConfig optimize;

  /// Latest frame any edit refers to.
  int latest_edit_frame() const;
};

// Parsing collects every problem before throwing ValidationError; messages
// carry the JSON path of the offending field.
SceneConfig parse_scene(const std::string& text);
std::string serialize_scene(const SceneConfig& scene);
JobConfig parse_job(const std::string& text);
std::string serialize_job(const JobConfig& job);

std::string serialize_solution(const optimize::ControlSolution& solution);
optimize::ControlSolution parse_solution(const std::string& text);

/// Resolves the window geometry and time interval of a job.
control::SpacetimeWindow resolve_window(const JobConfig& job, const sim::SimConfig& cfg,
                                        const sim::Trajectory& baseline);

/// Builds the compiled edit for a resolved window. Raster keyframes are read
/// relative to `base_dir`.
objective::EditSpec build_edit(const JobConfig& job, const control::SpacetimeWindow& window,
                               const sim::SimConfig& cfg, const sim::Trajectory& baseline,
                               const std::string& base_dir = ".");

/// Checks window placement and edit frames against the scene.
void validate_job(const JobConfig& job, const sim::SimConfig& cfg, int simulated_steps,
                  std::size_t particle_count);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace fluidctl::io
