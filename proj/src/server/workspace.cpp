#include "fluidctl/server/workspace.hpp"

#include "fluidctl/io/frames.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace fluidctl::server {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kSceneIdPrefix = "s";
constexpr const char* kJobIdPrefix = "j";

std::string make_id(const char* prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06d", prefix, n);
  return buf;
}

// Numeric part of an id produced by make_id, or -1.
int id_number(const std::string& id, const char* prefix) {
  const std::string p(prefix);
  if (id.size() != p.size() + 6 || id.compare(0, p.size(), p) != 0) return -1;
  int n = 0;
  for (std::size_t i = p.size(); i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return -1;
    n = n * 10 + (id[i] - '0');
  }
  return n;
}

json breakdown_json(const objective::TermBreakdown& t) {
  return json{{"editing", t.editing}, {"magnitude", t.magnitude}, {"temporal", t.temporal},
              {"spatial", t.spatial}, {"buffer", t.buffer},       {"total", t.total()}};
}

objective::TermBreakdown breakdown_from(const json& j) {
  objective::TermBreakdown t;
  t.editing = j.at("editing").get<double>();
  t.magnitude = j.at("magnitude").get<double>();
  t.temporal = j.at("temporal").get<double>();
  t.spatial = j.at("spatial").get<double>();
  t.buffer = j.at("buffer").get<double>();
  return t;
}

json job_json(const JobRecord& job) {
  json j{{"id", job.id},
         {"kind", to_string(job.kind)},
         {"scene", job.scene},
         {"state", to_string(job.state)},
         {"fraction", job.fraction},
         {"error", job.error},
         {"solutions", job.solutions}};
  if (!job.config.empty()) j["config"] = json::parse(job.config);
  if (job.best_t) j["best_t"] = *job.best_t;
  if (!job.evaluated.empty()) {
    json ev = json::object();
    for (const auto& [t, v] : job.evaluated) ev[std::to_string(t)] = v;
    j["evaluated"] = ev;
  }
  return j;
}

JobRecord job_from(const json& j) {
  JobRecord job;
  job.id = j.at("id").get<std::string>();
  job.kind = job_kind_from_string(j.at("kind").get<std::string>());
  job.scene = j.at("scene").get<std::string>();
  job.state = job_state_from_string(j.at("state").get<std::string>());
  job.fraction = j.value("fraction", 0.0);
  job.error = j.value("error", std::string());
  job.solutions = j.value("solutions", std::vector<std::string>());
  if (j.contains("config")) job.config = j["config"].dump();
  if (j.contains("best_t")) job.best_t = j["best_t"].get<int>();
  if (j.contains("evaluated")) {
    for (const auto& [k, v] : j["evaluated"].items()) {
      job.evaluated[std::stoi(k)] = v.is_number() ? v.get<double>() : INFINITY;
    }
  }
  return job;
}

}  // namespace

std::string to_string(JobKind kind) {
  switch (kind) {
    case JobKind::simulate: return "simulate";
    case JobKind::optimize: return "optimize";
    case JobKind::search: return "search";
    case JobKind::resim: return "resim";
  }
  return "?";
}

std::string to_string(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "?";
}

JobKind job_kind_from_string(const std::string& s) {
  if (s == "simulate") return JobKind::simulate;
  if (s == "optimize") return JobKind::optimize;
  if (s == "search") return JobKind::search;
  if (s == "resim") return JobKind::resim;
  throw ValidationError("kind: unknown job kind '" + s + "'");
}

JobState job_state_from_string(const std::string& s) {
  if (s == "queued") return JobState::queued;
  if (s == "running") return JobState::running;
  if (s == "done") return JobState::done;
  if (s == "failed") return JobState::failed;
  throw ValidationError("state: unknown job state '" + s + "'");
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_ / "scenes");
  fs::create_directories(root_ / "jobs");

  for (const auto& entry : fs::directory_iterator(root_ / "scenes")) {
    const std::string id = entry.path().filename().string();
    const int n = id_number(id, kSceneIdPrefix);
    if (n < 0 || !fs::exists(entry.path() / "scene.json")) continue;
    try {
      scenes_.emplace(id, io::parse_scene(io::read_text((entry.path() / "scene.json").string())));
      next_scene_ = std::max(next_scene_, n + 1);
    } catch (const std::exception& e) {
      spdlog::warn("skipping scene {}: {}", id, e.what());
    }
  }

  for (const auto& entry : fs::directory_iterator(root_ / "jobs")) {
    const std::string id = entry.path().filename().string();
    const int n = id_number(id, kJobIdPrefix);
    if (n < 0) continue;
    next_job_ = std::max(next_job_, n + 1);
    if (!fs::exists(entry.path() / "job.json")) continue;
    try {
      JobRecord job = job_from(json::parse(io::read_text((entry.path() / "job.json").string())));
      if (!job.finished()) {
        job.state = JobState::failed;
        job.error = "interrupted by server restart";
        save_job(job);
      }
      recovered_.push_back(std::move(job));
    } catch (const std::exception& e) {
      spdlog::warn("skipping job {}: {}", id, e.what());
    }
  }
  std::sort(recovered_.begin(), recovered_.end(),
            [](const JobRecord& a, const JobRecord& b) { return a.id < b.id; });
  spdlog::info("workspace {}: {} scenes, {} jobs recovered", root_.string(), scenes_.size(),
               recovered_.size());
}

std::string Workspace::add_scene(const io::SceneConfig& scene) {
  std::lock_guard lock(mutex_);
  const std::string id = make_id(kSceneIdPrefix, next_scene_++);
  fs::create_directories(root_ / "scenes" / id / "baseline");
  io::write_text((root_ / "scenes" / id / "scene.json").string(), io::serialize_scene(scene));
  scenes_.emplace(id, scene);
  return id;
}

bool Workspace::has_scene(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return scenes_.count(id) != 0;
}

io::SceneConfig Workspace::scene(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = scenes_.find(id);
  if (it == scenes_.end()) throw NotFound("unknown scene '" + id + "'");
  return it->second;
}

std::vector<std::string> Workspace::scene_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : scenes_) out.push_back(id);
  return out;
}

fs::path Workspace::scene_dir(const std::string& id) const { return root_ / "scenes" / id; }

std::string Workspace::baseline_prefix(const std::string& scene) const {
  return (scene_dir(scene) / "baseline" / "frame").string();
}

bool Workspace::has_baseline(const std::string& scene) const {
  return fs::exists(scene_dir(scene) / "baseline" / "COMPLETE");
}

void Workspace::mark_baseline_complete(const std::string& scene) {
  io::write_text((scene_dir(scene) / "baseline" / "COMPLETE").string(), "");
  std::lock_guard lock(mutex_);
  cache_.erase("baseline/" + scene);
}

std::shared_ptr<const sim::Trajectory> Workspace::baseline(const std::string& scene) {
  if (!has_scene(scene)) throw NotFound("unknown scene '" + scene + "'");
  if (!has_baseline(scene)) throw Conflict("scene '" + scene + "' has no baseline yet");
  const std::string key = "baseline/" + scene;
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto traj = std::make_shared<const sim::Trajectory>(io::load_frames(baseline_prefix(scene)));
  std::lock_guard lock(mutex_);
  return cache_.emplace(key, std::move(traj)).first->second;
}

std::string Workspace::new_job_id() {
  std::lock_guard lock(mutex_);
  const std::string id = make_id(kJobIdPrefix, next_job_++);
  fs::create_directories(root_ / "jobs" / id);
  return id;
}

void Workspace::save_job(const JobRecord& job) const {
  io::write_text((root_ / "jobs" / job.id / "job.json").string(), job_json(job).dump(2) + "\n");
}

void Workspace::append_event(const std::string& job, const ProgressEvent& event) const {
  std::ofstream out(root_ / "jobs" / job / "events.jsonl", std::ios::app);
  out << json{{"iteration", event.iteration}, {"terms", breakdown_json(event.terms)}}.dump() << "\n";
}

std::vector<ProgressEvent> Workspace::load_events(const std::string& job) const {
  std::vector<ProgressEvent> out;
  std::ifstream in(root_ / "jobs" / job / "events.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("iteration").get<int>(), breakdown_from(j.at("terms"))});
    } catch (const std::exception&) {
      break;  // torn last line of an interrupted job
    }
  }
  return out;
}

std::string Workspace::solution_path(const std::string& job) const {
  return (root_ / "jobs" / job / "solution.json").string();
}

std::string Workspace::frames_prefix(const std::string& job) const {
  return (root_ / "jobs" / job / "frames" / "frame").string();
}

std::shared_ptr<const sim::Trajectory> Workspace::resim_frames(const std::string& job) {
  const std::string key = "resim/" + job;
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto traj = std::make_shared<const sim::Trajectory>(io::load_frames(frames_prefix(job)));
  std::lock_guard lock(mutex_);
  return cache_.emplace(key, std::move(traj)).first->second;
}

}  // namespace fluidctl::server
