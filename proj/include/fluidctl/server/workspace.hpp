#pragma once

#include "fluidctl/io/scene_io.hpp"
#include "fluidctl/objective/objective.hpp"
#include "fluidctl/sim/pbf.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidctl::server {

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The request clashes with the current state (a job already running, an
/// artifact not produced yet).
class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class JobKind { simulate, optimize, search, resim };
enum class JobState { queued, running, done, failed };

std::string to_string(JobKind kind);
std::string to_string(JobState state);
JobKind job_kind_from_string(const std::string& s);
JobState job_state_from_string(const std::string& s);

struct ProgressEvent {
  int iteration = 0;
  objective::TermBreakdown terms;
};

struct JobRecord {
  std::string id;
  JobKind kind = JobKind::simulate;
  std::string scene;
  JobState state = JobState::queued;
  double fraction = 0.0;
  std::string error;
  std::string config;                  // job document for optimize / search
  std::vector<std::string> solutions;  // input jobs of a resim
  std::optional<int> best_t;
  std::map<int, double> evaluated;

  bool finished() const { return state == JobState::done || state == JobState::failed; }
};

// Layout under the root:
//   scenes/<id>/scene.json
//   scenes/<id>/baseline/frame_000000.bin ...  plus COMPLETE once all are written
//   jobs/<id>/job.json
//   jobs/<id>/events.jsonl      one progress event per line
//   jobs/<id>/solution.json     optimize and search jobs
//   jobs/<id>/frames/frame_000000.bin ...  resim jobs
class Workspace {
 public:
  /// Creates the directories if needed and reloads what a previous server
  /// left behind. Jobs that were queued or running are marked failed.
  explicit Workspace(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  std::string add_scene(const io::SceneConfig& scene);
  bool has_scene(const std::string& id) const;
  io::SceneConfig scene(const std::string& id) const;
  std::vector<std::string> scene_ids() const;
  std::filesystem::path scene_dir(const std::string& id) const;

  std::string baseline_prefix(const std::string& scene) const;
  bool has_baseline(const std::string& scene) const;
  void mark_baseline_complete(const std::string& scene);
  /// Throws Conflict if the baseline has not been simulated.
  std::shared_ptr<const sim::Trajectory> baseline(const std::string& scene);

  std::string new_job_id();
  void save_job(const JobRecord& job) const;
  /// Jobs recovered at construction, ordered by id.
  const std::vector<JobRecord>& recovered_jobs() const { return recovered_; }

  void append_event(const std::string& job, const ProgressEvent& event) const;
  std::vector<ProgressEvent> load_events(const std::string& job) const;

  std::string solution_path(const std::string& job) const;
  std::string frames_prefix(const std::string& job) const;
  /// Frames written by a finished resim job.
  std::shared_ptr<const sim::Trajectory> resim_frames(const std::string& job);

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, io::SceneConfig> scenes_;
  std::map<std::string, std::shared_ptr<const sim::Trajectory>> cache_;
  std::vector<JobRecord> recovered_;
  int next_scene_ = 1;
  int next_job_ = 1;
};

}  // namespace fluidctl::server
