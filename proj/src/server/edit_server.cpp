#include "fluidctl/server/edit_server.hpp"

#include "fluidctl/io/frames.hpp"
#include "fluidctl/optimize/resim.hpp"

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace fluidctl::server {

using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

class Cancelled : public std::runtime_error {
 public:
  Cancelled() : std::runtime_error("cancelled") {}
};

json terms_json(const objective::TermBreakdown& t) {
  return json{{"editing", t.editing}, {"magnitude", t.magnitude}, {"temporal", t.temporal},
              {"spatial", t.spatial}, {"buffer", t.buffer}};
}

json event_json(const ProgressEvent& e) {
  return json{{"iteration", e.iteration}, {"total", e.terms.total()}, {"terms", terms_json(e.terms)}};
}

json handle_json(const JobHandle& h) {
  json j{{"id", h.id},
         {"kind", to_string(h.kind)},
         {"scene", h.scene},
         {"state", to_string(h.state)},
         {"fraction", h.fraction}};
  if (h.latest) j["latest"] = event_json(*h.latest);
  if (!h.error.empty()) j["error"] = h.error;
  return j;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFound& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (const Conflict& e) {
    send_json(res, 409, {{"error", e.what()}});
  } catch (const ValidationError& e) {
    send_json(res, 422, {{"error", "validation failed"}, {"issues", e.issues()}});
  } catch (const json::exception& e) {
    send_json(res, 422, {{"error", "validation failed"}, {"issues", {std::string("<body>: ") + e.what()}}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

int int_param(const httplib::Request& req, const std::string& key, int fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw ValidationError(key + ": must be an integer");
}

}  // namespace

EditServer::EditServer(ServerOptions options)
    : options_(std::move(options)), workspace_(options_.workspace) {
  if (options_.workers < 1) throw ValidationError("workers: must be >= 1");
  for (const auto& rec : workspace_.recovered_jobs()) {
    auto job = std::make_unique<Job>();
    job->record = rec;
    job->events = workspace_.load_events(rec.id);
    jobs_.emplace(rec.id, std::move(job));
  }
  http_ = std::make_unique<httplib::Server>();
  setup_routes();
  for (int i = 0; i < options_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

EditServer::~EditServer() {
  stop();
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
    for (auto& [id, job] : jobs_) job->cancel = true;
  }
  changed_.notify_all();
  for (auto& t : workers_) t.join();
}

std::string EditServer::create_scene(const std::string& text) {
  const io::SceneConfig scene = io::parse_scene(text);
  const std::string id = workspace_.add_scene(scene);
  spdlog::info("scene {} created", id);
  return id;
}

JobHandle EditServer::run_baseline(const std::string& scene) {
  workspace_.scene(scene);
  if (workspace_.has_baseline(scene)) throw Conflict("scene '" + scene + "' already has a baseline");
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, job] : jobs_) {
      const auto& r = job->record;
      if (r.scene == scene && r.kind == JobKind::simulate && !r.finished()) {
        throw Conflict("baseline job " + id + " is already pending on scene '" + scene + "'");
      }
    }
  }
  JobRecord rec;
  rec.kind = JobKind::simulate;
  rec.scene = scene;
  return enqueue(std::move(rec));
}

JobHandle EditServer::submit_edit(const std::string& scene, const std::string& job_text, bool search) {
  const io::SceneConfig cfg = workspace_.scene(scene);
  const io::JobConfig job = io::parse_job(job_text);
  const auto baseline = workspace_.baseline(scene);
  io::validate_job(job, cfg.sim, static_cast<int>(baseline->size()) - 1, baseline->front().size());
  const auto window = io::resolve_window(job, cfg.sim, *baseline);
  io::build_edit(job, window, cfg.sim, *baseline, workspace_.scene_dir(scene).string());
  JobRecord rec;
  rec.kind = search ? JobKind::search : JobKind::optimize;
  rec.scene = scene;
  rec.config = io::serialize_job(job);
  return enqueue(std::move(rec), true);
}

JobHandle EditServer::submit_resim(const std::string& scene, const std::vector<std::string>& solution_jobs) {
  workspace_.scene(scene);
  workspace_.baseline(scene);
  std::vector<optimize::ControlSolution> solutions;
  std::vector<std::string> issues;
  for (std::size_t k = 0; k < solution_jobs.size(); ++k) {
    const std::string path = "solutions[" + std::to_string(k) + "]";
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(solution_jobs[k]);
    if (it == jobs_.end()) {
      issues.push_back(path + ": unknown job '" + solution_jobs[k] + "'");
      continue;
    }
    const auto& r = it->second->record;
    if (r.kind != JobKind::optimize && r.kind != JobKind::search) {
      issues.push_back(path + ": job '" + r.id + "' does not produce a solution");
    } else if (r.scene != scene) {
      issues.push_back(path + ": job '" + r.id + "' belongs to scene '" + r.scene + "'");
    } else if (r.state != JobState::done) {
      issues.push_back(path + ": job '" + r.id + "' has not finished");
    } else {
      solutions.push_back(io::parse_solution(io::read_text(workspace_.solution_path(r.id))));
    }
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  optimize::check_non_overlapping(solutions);
  JobRecord rec;
  rec.kind = JobKind::resim;
  rec.scene = scene;
  rec.solutions = solution_jobs;
  return enqueue(std::move(rec));
}

void EditServer::cancel(const std::string& id) {
  std::lock_guard lock(mutex_);
  find(id).cancel = true;
}

EditServer::Job& EditServer::find(const std::string& id) const {
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFound("unknown job '" + id + "'");
  return *it->second;
}

JobHandle EditServer::handle(const Job& job) const {
  JobHandle h;
  h.id = job.record.id;
  h.kind = job.record.kind;
  h.scene = job.record.scene;
  h.state = job.record.state;
  h.fraction = job.record.fraction;
  h.error = job.record.error;
  if (!job.events.empty()) h.latest = job.events.back();
  return h;
}

JobHandle EditServer::job(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return handle(find(id));
}

std::vector<JobHandle> EditServer::jobs() const {
  std::lock_guard lock(mutex_);
  std::vector<JobHandle> out;
  for (const auto& [id, job] : jobs_) out.push_back(handle(*job));
  return out;
}

std::vector<ProgressEvent> EditServer::events(const std::string& id, int after) const {
  std::lock_guard lock(mutex_);
  const Job& job = find(id);
  std::vector<ProgressEvent> out;
  for (const auto& e : job.events) {
    if (e.iteration > after) out.push_back(e);
  }
  return out;
}

bool EditServer::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const Job& job = find(id);
  return changed_.wait_for(lock, timeout, [&] { return job.record.finished(); });
}

void EditServer::wait_for_events(const std::string& id, int after,
                                 std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const Job& job = find(id);
  changed_.wait_for(lock, timeout, [&] {
    return stopping_ || job.record.finished() ||
           (!job.events.empty() && job.events.back().iteration > after);
  });
}

std::string EditServer::solution(const std::string& id) const {
  {
    std::lock_guard lock(mutex_);
    const auto& r = find(id).record;
    if (r.kind != JobKind::optimize && r.kind != JobKind::search) {
      throw NotFound("job '" + id + "' does not produce a solution");
    }
    if (r.state != JobState::done) throw Conflict("job '" + id + "' is " + to_string(r.state));
  }
  return io::read_text(workspace_.solution_path(id));
}

std::vector<std::uint8_t> EditServer::frames(const std::string& owner, int begin, int end, int decimate) {
  std::shared_ptr<const sim::Trajectory> traj;
  int dim = 2;
  if (workspace_.has_scene(owner)) {
    dim = workspace_.scene(owner).sim.dim;
    traj = workspace_.baseline(owner);
  } else {
    std::string scene;
    {
      std::lock_guard lock(mutex_);
      const auto& r = find(owner).record;
      if (r.kind != JobKind::resim) throw NotFound("job '" + owner + "' has no frames");
      if (r.state != JobState::done) throw Conflict("job '" + owner + "' is " + to_string(r.state));
      scene = r.scene;
    }
    dim = workspace_.scene(scene).sim.dim;
    traj = workspace_.resim_frames(owner);
  }
  const int count = static_cast<int>(traj->size());
  if (end < 0) end = count;
  std::vector<std::string> issues;
  if (decimate < 1) issues.push_back("decimate: must be >= 1");
  if (begin < 0 || begin > count) issues.push_back("begin: outside [0, " + std::to_string(count) + "]");
  if (end < begin || end > count) issues.push_back("end: outside [begin, " + std::to_string(count) + "]");
  if (!issues.empty()) throw ValidationError(std::move(issues));

  std::vector<std::uint8_t> out;
  for (int k = begin; k < end; ++k) {
    const auto& full = (*traj)[k];
    sim::ParticleState kept;
    for (std::size_t i = 0; i < full.size(); i += decimate) {
      kept.x.push_back(full.x[i]);
      kept.v.push_back(full.v[i]);
    }
    const auto bytes = io::encode_frame(kept, dim, k);
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

bool EditServer::scene_busy(const std::string& scene) const {
  for (const auto& [id, job] : jobs_) {
    const auto& r = job->record;
    if (r.scene == scene && (r.kind == JobKind::optimize || r.kind == JobKind::search) && !r.finished()) {
      return true;
    }
  }
  return false;
}

JobHandle EditServer::enqueue(JobRecord record, bool exclusive) {
  JobHandle out;
  {
    std::lock_guard lock(mutex_);
    if (exclusive && scene_busy(record.scene)) {
      throw Conflict("an optimization is already queued or running on scene '" + record.scene + "'");
    }
    record.id = workspace_.new_job_id();
    record.state = JobState::queued;
    workspace_.save_job(record);
    auto job = std::make_unique<Job>();
    job->record = std::move(record);
    out = handle(*job);
    queue_.push_back(out.id);
    jobs_.emplace(out.id, std::move(job));
  }
  spdlog::info("job {} ({}) queued on scene {}", out.id, to_string(out.kind), out.scene);
  changed_.notify_all();
  return out;
}

void EditServer::worker_loop() {
  for (;;) {
    std::unique_lock lock(mutex_);
    std::string id;
    changed_.wait(lock, [&] {
      if (stopping_) return true;
      // Jobs on one scene run one at a time, in submission order.
      for (auto it = queue_.begin(); it != queue_.end(); ++it) {
        const std::string& scene = jobs_.at(*it)->record.scene;
        const bool busy = std::any_of(running_.begin(), running_.end(), [&](const std::string& r) {
          return jobs_.at(r)->record.scene == scene;
        });
        if (!busy) {
          id = *it;
          queue_.erase(it);
          return true;
        }
      }
      return false;
    });
    if (stopping_) return;
    running_.push_back(id);
    Job& job = *jobs_.at(id);
    lock.unlock();
    run(job);
    lock.lock();
    std::erase(running_, id);
    lock.unlock();
    changed_.notify_all();
  }
}

void EditServer::set_state(Job& job, JobState state, const std::string& error) {
  JobRecord snapshot;
  {
    std::lock_guard lock(mutex_);
    job.record.state = state;
    job.record.error = error;
    if (state == JobState::done) job.record.fraction = 1.0;
    snapshot = job.record;
  }
  workspace_.save_job(snapshot);
  changed_.notify_all();
}

void EditServer::push_event(Job& job, const ProgressEvent& event, double fraction) {
  {
    std::lock_guard lock(mutex_);
    if (!job.events.empty() && event.iteration <= job.events.back().iteration) return;
    job.events.push_back(event);
    job.record.fraction = std::clamp(fraction, 0.0, 1.0);
  }
  workspace_.append_event(job.record.id, event);
  changed_.notify_all();
}

void EditServer::run(Job& job) {
  set_state(job, JobState::running);
  spdlog::info("job {} running", job.record.id);
  try {
    switch (job.record.kind) {
      case JobKind::simulate: run_simulate(job); break;
      case JobKind::optimize:
      case JobKind::search: run_edit(job); break;
      case JobKind::resim: run_resim(job); break;
    }
    if (job.cancel) throw Cancelled();
    set_state(job, JobState::done);
    spdlog::info("job {} done", job.record.id);
  } catch (const std::exception& e) {
    spdlog::warn("job {} failed: {}", job.record.id, e.what());
    set_state(job, JobState::failed, e.what());
  }
}

void EditServer::run_simulate(Job& job) {
  const std::string scene_id = job.record.scene;
  const io::SceneConfig scene = workspace_.scene(scene_id);
  const std::string prefix = workspace_.baseline_prefix(scene_id);
  optimize::simulate(scene.initial_state(), scene.sim, scene.steps, [&](int k, const sim::ParticleState& s) {
    if (job.cancel) throw Cancelled();
    io::write_frame(io::frame_path(prefix, k), s, scene.sim.dim, k);
    std::lock_guard lock(mutex_);
    job.record.fraction = static_cast<double>(k) / std::max(scene.steps, 1);
  });
  workspace_.mark_baseline_complete(scene_id);
}

void EditServer::run_edit(Job& job) {
  const std::string scene_id = job.record.scene;
  const io::SceneConfig scene = workspace_.scene(scene_id);
  const auto baseline = workspace_.baseline(scene_id);
  const io::JobConfig cfg = io::parse_job(job.record.config);
  const auto window = io::resolve_window(cfg, scene.sim, *baseline);
  const auto spec = io::build_edit(cfg, window, scene.sim, *baseline, workspace_.scene_dir(scene_id).string());
  const double iters = cfg.optimize.max_lbfgs_iters;
  auto progress = [&](const optimize::IterationReport& r) {
    push_event(job, {r.iteration, r.terms}, r.iteration / iters);
  };

  optimize::ControlSolution solution;
  if (job.record.kind == JobKind::search) {
    auto result = optimize::search_temporal_window(*baseline, scene.sim, window, spec, cfg.weights,
                                                   cfg.optimize, progress);
    {
      std::lock_guard lock(mutex_);
      job.record.best_t = result.best_t;
      job.record.evaluated = result.evaluated;
    }
    solution = std::move(result.solution);
  } else {
    solution = optimize::optimize_window(*baseline, scene.sim, window, spec, cfg.weights, cfg.optimize,
                                         progress, &job.cancel);
  }
  if (job.cancel) throw Cancelled();
  io::write_text(workspace_.solution_path(job.record.id), io::serialize_solution(solution));
}

void EditServer::run_resim(Job& job) {
  const std::string scene_id = job.record.scene;
  const io::SceneConfig scene = workspace_.scene(scene_id);
  const auto baseline = workspace_.baseline(scene_id);
  std::vector<optimize::ControlSolution> solutions;
  for (const auto& id : job.record.solutions) {
    solutions.push_back(io::parse_solution(io::read_text(workspace_.solution_path(id))));
  }
  const std::string prefix = workspace_.frames_prefix(job.record.id);
  std::filesystem::create_directories(std::filesystem::path(prefix).parent_path());
  const int steps = static_cast<int>(baseline->size()) - 1;
  optimize::resim_blend(baseline->front(), scene.sim, steps, solutions,
                        [&](int k, const sim::ParticleState& s) {
                          if (job.cancel) throw Cancelled();
                          io::write_frame(io::frame_path(prefix, k), s, scene.sim.dim, k);
                          std::lock_guard lock(mutex_);
                          job.record.fraction = static_cast<double>(k) / std::max(steps, 1);
                        });
}

int EditServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = http_->bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!http_->bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

bool EditServer::listen() { return http_->listen_after_bind(); }

void EditServer::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

void EditServer::setup_routes() {
  auto& s = *http_;

  s.Get("/scenes", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& id : workspace_.scene_ids()) {
        list.push_back({{"id", id}, {"baseline", workspace_.has_baseline(id)}});
      }
      send_json(res, 200, {{"scenes", list}});
    });
  });

  s.Post("/scenes", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 201, {{"id", create_scene(req.body)}}); });
  });

  s.Get("/scenes/:id", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      const auto scene = workspace_.scene(id);
      json out{{"id", id}, {"scene", json::parse(io::serialize_scene(scene))},
               {"baseline", workspace_.has_baseline(id)}};
      if (workspace_.has_baseline(id)) {
        const auto traj = workspace_.baseline(id);
        out["frames"] = traj->size();
        out["particles"] = traj->front().size();
      }
      send_json(res, 200, out);
    });
  });

  s.Post("/scenes/:id/baseline", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 202, handle_json(run_baseline(req.path_params.at("id")))); });
  });

  s.Get("/scenes/:id/frames", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto bytes = frames(req.path_params.at("id"), int_param(req, "begin", 0),
                                int_param(req, "end", -1), int_param(req, "decimate", 1));
      res.status = 200;
      res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "application/octet-stream");
    });
  });

  s.Post("/scenes/:id/edits", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const bool search = req.has_param("search") && req.get_param_value("search") != "0";
      send_json(res, 202, handle_json(submit_edit(req.path_params.at("id"), req.body, search)));
    });
  });

  s.Post("/scenes/:id/resim", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = json::parse(req.body);
      if (!body.is_object() || !body.contains("solutions") || !body["solutions"].is_array()) {
        throw ValidationError("solutions: missing required array of job ids");
      }
      std::vector<std::string> ids;
      for (std::size_t k = 0; k < body["solutions"].size(); ++k) {
        const auto& v = body["solutions"][k];
        if (!v.is_string()) throw ValidationError("solutions[" + std::to_string(k) + "]: must be a job id");
        ids.push_back(v.get<std::string>());
      }
      for (const auto& [key, v] : body.items()) {
        if (key != "solutions") throw ValidationError(key + ": unknown key");
      }
      send_json(res, 202, handle_json(submit_resim(req.path_params.at("id"), ids)));
    });
  });

  s.Get("/jobs", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      json list = json::array();
      for (const auto& h : jobs()) list.push_back(handle_json(h));
      send_json(res, 200, {{"jobs", list}});
    });
  });

  s.Get("/jobs/:id", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      json out = handle_json(job(id));
      {
        std::lock_guard lock(mutex_);
        const auto& r = find(id).record;
        if (r.best_t) out["best_t"] = *r.best_t;
        if (!r.solutions.empty()) out["solutions"] = r.solutions;
      }
      send_json(res, 200, out);
    });
  });

  s.Post("/jobs/:id/cancel", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      cancel(req.path_params.at("id"));
      send_json(res, 202, handle_json(job(req.path_params.at("id"))));
    });
  });

  s.Get("/jobs/:id/events", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.path_params.at("id");
      const int after = int_param(req, "after", -1);
      job(id);
      if (!req.has_param("follow") || req.get_param_value("follow") == "0") {
        json list = json::array();
        for (const auto& e : events(id, after)) list.push_back(event_json(e));
        send_json(res, 200, {{"state", to_string(job(id).state)}, {"events", list}});
        return;
      }
      // Newline-delimited events as they arrive; the last line carries the
      // final job state.
      res.set_chunked_content_provider(
          "application/x-ndjson", [this, id, last = after](std::size_t, httplib::DataSink& sink) mutable {
            wait_for_events(id, last, 250ms);
            const JobHandle h = job(id);
            for (const auto& e : events(id, last)) {
              const std::string line = event_json(e).dump() + "\n";
              if (!sink.write(line.data(), line.size())) return false;
              last = e.iteration;
            }
            bool stopping;
            {
              std::lock_guard lock(mutex_);
              stopping = stopping_;
            }
            if (h.state == JobState::done || h.state == JobState::failed || stopping) {
              const std::string line = json{{"state", to_string(h.state)}, {"error", h.error}}.dump() + "\n";
              sink.write(line.data(), line.size());
              sink.done();
            }
            return true;
          });
    });
  });

  s.Get("/jobs/:id/solution", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.status = 200;
      res.set_content(solution(req.path_params.at("id")), "application/json");
    });
  });

  s.Get("/jobs/:id/frames", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto bytes = frames(req.path_params.at("id"), int_param(req, "begin", 0),
                                int_param(req, "end", -1), int_param(req, "decimate", 1));
      res.status = 200;
      res.set_content(reinterpret_cast<const char*>(bytes.data()), bytes.size(), "application/octet-stream");
    });
  });
}

}  // namespace fluidctl::server
