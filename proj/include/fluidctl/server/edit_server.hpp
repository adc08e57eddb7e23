#pragma once

#include "fluidctl/server/workspace.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace fluidctl::server {

struct ServerOptions {
  std::filesystem::path workspace = "workspace";
  int workers = 1;
};

/// Snapshot of a job as reported to clients.
struct JobHandle {
  std::string id;
  JobKind kind = JobKind::simulate;
  std::string scene;
  JobState state = JobState::queued;
  double fraction = 0.0;
  std::optional<ProgressEvent> latest;
  std::string error;
};

/// Runs simulate / optimize / search / resim jobs against a workspace and
/// serves them over HTTP. All engine calls are thread safe; failures are
/// reported as NotFound, Conflict or ValidationError.
class EditServer {
 public:
  explicit EditServer(ServerOptions options);
  ~EditServer();
  EditServer(const EditServer&) = delete;
  EditServer& operator=(const EditServer&) = delete;

  std::string create_scene(const std::string& text);
  JobHandle run_baseline(const std::string& scene);
  /// `search` runs the temporal window search before the final solve.
  JobHandle submit_edit(const std::string& scene, const std::string& job_text, bool search = false);
  JobHandle submit_resim(const std::string& scene, const std::vector<std::string>& solution_jobs);
  void cancel(const std::string& job);

  JobHandle job(const std::string& id) const;
  std::vector<JobHandle> jobs() const;
  /// Progress events with iteration > `after`, in iteration order.
  std::vector<ProgressEvent> events(const std::string& job, int after = -1) const;
  /// Blocks until the job finishes or the timeout passes; true if finished.
  bool wait(const std::string& job, std::chrono::milliseconds timeout) const;
  /// Blocks until the job has an event past `after` or has finished.
  void wait_for_events(const std::string& job, int after, std::chrono::milliseconds timeout) const;
  std::string solution(const std::string& job) const;

  /// Frames [begin, end) of a scene baseline or resim job, concatenated in
  /// the frame file format. Every `decimate`-th particle is kept. end < 0
  /// selects the last frame.
  std::vector<std::uint8_t> frames(const std::string& owner, int begin, int end, int decimate);

  Workspace& workspace() { return workspace_; }

  /// Binds the HTTP listener; port 0 picks a free port. Returns the port.
  int bind(const std::string& host, int port);
  /// Serves requests until stop(). Requires bind().
  bool listen();
  void stop();

 private:
  struct Job {
    JobRecord record;
    std::vector<ProgressEvent> events;
    std::atomic<bool> cancel{false};
  };

  void worker_loop();
  void run(Job& job);
  void run_simulate(Job& job);
  void run_edit(Job& job);
  void run_resim(Job& job);
  void set_state(Job& job, JobState state, const std::string& error = {});
  void push_event(Job& job, const ProgressEvent& event, double fraction);
  Job& find(const std::string& id) const;
  JobHandle handle(const Job& job) const;
  bool scene_busy(const std::string& scene) const;  // caller holds mutex_
  JobHandle enqueue(JobRecord record, bool exclusive = false);
  void setup_routes();

  ServerOptions options_;
  Workspace workspace_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, std::unique_ptr<Job>> jobs_;
  std::deque<std::string> queue_;
  std::vector<std::string> running_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace fluidctl::server
