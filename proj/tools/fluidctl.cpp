#include "fluidctl/io/frames.hpp"
#include "fluidctl/io/scene_io.hpp"
#include "fluidctl/optimize/optimize.hpp"
#include "fluidctl/optimize/resim.hpp"
#include "fluidctl/server/edit_server.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace fluidctl;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct Options {
  std::string scene;
  std::string job;
  std::string out;
  std::string frames;
  std::vector<std::string> solutions;
  std::string log_level = "info";
  std::string workspace;
  std::string host = "127.0.0.1";
  int port = 8080;
  int threads = 1;
  bool ply = false;
};

std::string frame_prefix(const std::string& dir) { return (fs::path(dir) / "frame").string(); }

sim::Trajectory baseline_for(const io::SceneConfig& scene, const Options& opt) {
  if (!opt.frames.empty()) {
    auto traj = io::load_frames(frame_prefix(opt.frames));
    if (traj.empty()) throw ValidationError("--frames: no frames under '" + opt.frames + "'");
    spdlog::info("loaded {} baseline frames from {}", traj.size(), opt.frames);
    return traj;
  }
  spdlog::info("simulating baseline: {} steps", scene.steps);
  return optimize::simulate(scene.initial_state(), scene.sim, scene.steps);
}

void write_history(const std::string& path, const optimize::ControlSolution& sol) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "iteration,total,editing,magnitude,temporal,spatial,buffer\n";
  out.precision(17);
  for (const auto& h : sol.history) {
    const auto& t = h.terms;
    out << h.iteration << ',' << t.total() << ',' << t.editing << ',' << t.magnitude << ',' << t.temporal
        << ',' << t.spatial << ',' << t.buffer << '\n';
  }
}

void log_iteration(const optimize::IterationReport& r) {
  spdlog::info("iter {:4d}  total {:.6e}  editing {:.6e}  buffer {:.3e}", r.iteration, r.terms.total(),
               r.terms.editing, r.terms.buffer);
}

int cmd_simulate(const Options& opt) {
  const auto scene = io::parse_scene(io::read_text(opt.scene));
  const auto initial = scene.initial_state();
  spdlog::info("{} particles, {} steps", initial.size(), scene.steps);
  const auto traj = optimize::simulate(initial, scene.sim, scene.steps, [&](int k, const sim::ParticleState&) {
    if (k % 50 == 0) spdlog::debug("step {}", k);
  });
  const auto paths = io::export_frames(traj, frame_prefix(opt.out), scene.sim.dim, 0, opt.ply);
  spdlog::info("wrote {} frames to {}", paths.size(), opt.out);
  return 0;
}

int cmd_optimize(const Options& opt, bool search) {
  const auto scene = io::parse_scene(io::read_text(opt.scene));
  const auto job = io::parse_job(io::read_text(opt.job));
  const auto baseline = baseline_for(scene, opt);
  io::validate_job(job, scene.sim, static_cast<int>(baseline.size()) - 1, baseline.front().size());
  const auto window = io::resolve_window(job, scene.sim, baseline);
  const std::string base_dir = fs::path(opt.job).parent_path().string();
  const auto spec = io::build_edit(job, window, scene.sim, baseline, base_dir.empty() ? "." : base_dir);

  optimize::ControlSolution sol;
  if (search) {
    auto result = optimize::search_temporal_window(baseline, scene.sim, window, spec, job.weights,
                                                   job.optimize, log_iteration, opt.threads);
    for (const auto& [t, v] : result.evaluated) spdlog::info("T = {:2d}  objective {:.6e}", t, v);
    spdlog::info("best T = {}", result.best_t);
    sol = std::move(result.solution);
  } else {
    spdlog::info("window steps [{}, {}), {} nodes", window.t_start, window.t_end, window.node_count());
    sol = optimize::optimize_window(baseline, scene.sim, window, spec, job.weights, job.optimize, log_iteration);
  }
  io::write_text(opt.out, io::serialize_solution(sol));
  write_history(fs::path(opt.out).replace_extension(".history.csv").string(), sol);
  const double reduction = sol.initial.editing > 0.0 ? 1.0 - sol.final_terms.editing / sol.initial.editing : 0.0;
  spdlog::info("editing loss {:.6e} -> {:.6e} ({:.1f}% reduction): {}", sol.initial.editing,
               sol.final_terms.editing, 100.0 * reduction, sol.message);
  return 0;
}

int cmd_resim(const Options& opt) {
  const auto scene = io::parse_scene(io::read_text(opt.scene));
  std::vector<optimize::ControlSolution> solutions;
  for (const auto& path : opt.solutions) solutions.push_back(io::parse_solution(io::read_text(path)));
  optimize::check_non_overlapping(solutions);
  const sim::ParticleState initial =
      opt.frames.empty() ? scene.initial_state() : io::read_frame(io::frame_path(frame_prefix(opt.frames), 0)).state;
  const auto traj = optimize::resim_blend(initial, scene.sim, scene.steps, solutions);
  const auto paths = io::export_frames(traj, frame_prefix(opt.out), scene.sim.dim, 0, opt.ply);
  spdlog::info("wrote {} frames to {}", paths.size(), opt.out);
  return 0;
}

server::EditServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& opt) {
  std::string workspace = opt.workspace;
  if (workspace.empty()) {
    const char* env = std::getenv("FLUIDCTL_WORKSPACE");
    workspace = env ? env : "workspace";
  }
  int port = opt.port;
  if (const char* env = std::getenv("FLUIDCTL_PORT"); env && opt.port == 8080) port = std::atoi(env);
  server::EditServer srv({workspace, opt.threads});
  const int bound = srv.bind(opt.host, port);
  g_server = &srv;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("serving {} on http://{}:{}", workspace, opt.host, bound);
  srv.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized space-time control of particle fluids"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--log-level", opt.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
  app.add_option("--threads", opt.threads, "worker threads (serve jobs, search candidates)")
      ->check(CLI::PositiveNumber);

  auto* simulate = app.add_subcommand("simulate", "run the baseline and write frames");
  simulate->add_option("--scene", opt.scene, "scene file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", opt.out, "frame directory")->required();
  simulate->add_flag("--ply", opt.ply, "also write ASCII PLY frames");

  auto add_edit_options = [&](CLI::App* cmd) {
    cmd->add_option("--scene", opt.scene, "scene file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--job", opt.job, "job file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", opt.out, "solution file")->required();
    cmd->add_option("--frames", opt.frames, "baseline frame directory (default: simulate)")
        ->check(CLI::ExistingDirectory);
  };
  auto* optimize_cmd = app.add_subcommand("optimize", "optimize the control forces of one window");
  add_edit_options(optimize_cmd);
  auto* search_cmd = app.add_subcommand("search-window", "search the window length, then optimize");
  add_edit_options(search_cmd);

  auto* resim = app.add_subcommand("resim", "re-simulate with optimized windows blended in");
  resim->add_option("--scene", opt.scene, "scene file")->required()->check(CLI::ExistingFile);
  resim->add_option("--solution", opt.solutions, "solution file (repeatable)")->check(CLI::ExistingFile);
  resim->add_option("--frames", opt.frames, "baseline frame directory (initial state)")
      ->check(CLI::ExistingDirectory);
  resim->add_option("--out", opt.out, "frame directory")->required();
  resim->add_flag("--ply", opt.ply, "also write ASCII PLY frames");

  auto* serve = app.add_subcommand("serve", "run the edit server");
  serve->add_option("--workspace", opt.workspace, "workspace directory (env FLUIDCTL_WORKSPACE)");
  serve->add_option("--host", opt.host, "listen address");
  serve->add_option("--port", opt.port, "listen port, 0 for any (env FLUIDCTL_PORT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    std::cerr << "\n" << app.help();
    return code;
  }
  spdlog::set_level(spdlog::level::from_str(opt.log_level));

  try {
    if (*simulate) return cmd_simulate(opt);
    if (*optimize_cmd) return cmd_optimize(opt, false);
    if (*search_cmd) return cmd_optimize(opt, true);
    if (*resim) return cmd_resim(opt);
    if (*serve) return cmd_serve(opt);
  } catch (const ValidationError& e) {
    for (const auto& issue : e.issues()) spdlog::error("{}", issue);
    return kExitValidation;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure at step {}: {}", e.step(), e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  }
  return 0;
}
