#include "fluidctl/io/scene_io.hpp"

#include "fluidctl/control/classify.hpp"
#include "fluidctl/control/transfer.hpp"
#include "fluidctl/io/raster.hpp"
#include "fluidctl/sim/layout.hpp"
#include "json_reader.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

namespace fluidctl::io {

using detail::json;
using detail::Reader;
using detail::vec_json;
using control::ParticleId;

namespace {

json parse_document(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("<root>: malformed JSON: ") + e.what());
  }
}

void throw_if(std::vector<std::string>& issues) {
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

// Runs a validate() that reports bare field names and prefixes them.
template <class Fn>
void collect(std::vector<std::string>& issues, const std::string& prefix, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    for (const auto& i : e.issues()) issues.push_back(prefix + i);
  }
}

template <class Fn>
void for_each_element(Reader& r, const std::string& key, bool required, Fn&& fn) {
  const json* arr = r.raw(key, required);
  if (!arr) return;
  if (!arr->is_array()) {
    r.issue(key, "must be an array");
    return;
  }
  for (std::size_t i = 0; i < arr->size(); ++i) {
    fn((*arr)[i], r.child(key) + "[" + std::to_string(i) + "]");
  }
}

bool read_vec_value(const json& v, const std::string& path, int dim, Vec3& out,
                    std::vector<std::string>& issues) {
  const bool size_ok = v.is_array() && (dim > 0 ? static_cast<int>(v.size()) == dim
                                                : v.size() == 2 || v.size() == 3);
  if (!size_ok || !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
    issues.push_back(path + ": must be an array of " +
                     (dim > 0 ? std::to_string(dim) : std::string("2 or 3")) + " numbers");
    return false;
  }
  out = Vec3::Zero();
  for (std::size_t a = 0; a < v.size(); ++a) out[a] = v[a].get<double>();
  return true;
}

// ----- sim -----

void read_sim(Reader& r, sim::SimConfig& s) {
  r.get("dim", s.dim, true);
  const int dim = (s.dim == 2 || s.dim == 3) ? s.dim : 2;
  r.get("dt", s.dt);
  r.get_vec("gravity", s.gravity, dim);
  r.get("particle_radius", s.particle_radius, true);
  if (!r.get("kernel_radius", s.kernel_radius)) s.kernel_radius = 4.0 * s.particle_radius;
  r.get("rest_density", s.rest_density);
  r.get("solver_iters", s.solver_iters);
  r.get("relaxation", s.relaxation);
  r.get("scorr_k", s.scorr_k);
  r.get("scorr_n", s.scorr_n);
  r.get("scorr_dq", s.scorr_dq);
  r.get("vorticity_strength", s.vorticity_strength);
  r.get("vorticity_eps", s.vorticity_eps);
  if (const json* d = r.raw("domain", true)) {
    Reader dr(*d, r.child("domain"), r.issues());
    dr.get_vec("lo", s.domain.lo, dim, true);
    dr.get_vec("hi", s.domain.hi, dim, true);
  }
}

json write_sim(const sim::SimConfig& s) {
  json domain = {{"lo", vec_json(s.domain.lo, s.dim)}, {"hi", vec_json(s.domain.hi, s.dim)}};
  return json{{"dim", s.dim},
              {"dt", s.dt},
              {"gravity", vec_json(s.gravity, s.dim)},
              {"particle_radius", s.particle_radius},
              {"kernel_radius", s.kernel_radius},
              {"rest_density", s.rest_density},
              {"solver_iters", s.solver_iters},
              {"relaxation", s.relaxation},
              {"scorr_k", s.scorr_k},
              {"scorr_n", s.scorr_n},
              {"scorr_dq", s.scorr_dq},
              {"vorticity_strength", s.vorticity_strength},
              {"vorticity_eps", s.vorticity_eps},
              {"domain", domain}};
}

// ----- job pieces -----

json write_window(const WindowSpec& w, int dim) {
  json out;
  out["origin"] = vec_json(w.origin, dim);
  json nodes = json::array();
  for (int a = 0; a < dim; ++a) nodes.push_back(w.nodes[a]);
  out["nodes"] = nodes;
  if (w.spacing) out["spacing"] = *w.spacing;
  if (w.spacing_r) out["spacing_r"] = *w.spacing_r;
  if (w.buffer) out["buffer"] = *w.buffer;
  if (w.t_start) out["t_start"] = *w.t_start;
  if (w.t_end) out["t_end"] = *w.t_end;
  if (w.temporal_window) out["temporal_window"] = *w.temporal_window;
  if (w.trace_cap) out["trace_cap"] = *w.trace_cap;
  return out;
}

json write_weights(const objective::ObjectiveWeights& w) {
  return json{{"k_e", w.k_e}, {"k_f", w.k_f}, {"k_t", w.k_t}, {"k_s", w.k_s}, {"k_b", w.k_b}};
}

void read_weights(Reader& r, objective::ObjectiveWeights& w) {
  r.get("k_e", w.k_e);
  r.get("k_f", w.k_f);
  r.get("k_t", w.k_t);
  r.get("k_s", w.k_s);
  r.get("k_b", w.k_b);
}

json write_optimize(const optimize::OptimizeConfig& o) {
  return json{{"max_lbfgs_iters", o.max_lbfgs_iters},
              {"lbfgs_memory", o.lbfgs_memory},
              {"grad_tol", o.grad_tol},
              {"function_tol", o.function_tol},
              {"t_min", o.t_min},
              {"t_max", o.t_max},
              {"t_0", o.t_0},
              {"cma_popsize", o.cma_popsize},
              {"cma_sigma0", o.cma_sigma0},
              {"cma_max_gens", o.cma_max_gens},
              {"inner_budget_for_search", o.inner_budget_for_search},
              {"seed", o.seed}};
}

void read_optimize(Reader& r, optimize::OptimizeConfig& o) {
  r.get("max_lbfgs_iters", o.max_lbfgs_iters);
  r.get("lbfgs_memory", o.lbfgs_memory);
  r.get("grad_tol", o.grad_tol);
  r.get("function_tol", o.function_tol);
  r.get("t_min", o.t_min);
  r.get("t_max", o.t_max);
  r.get("t_0", o.t_0);
  r.get("cma_popsize", o.cma_popsize);
  r.get("cma_sigma0", o.cma_sigma0);
  r.get("cma_max_gens", o.cma_max_gens);
  r.get("inner_budget_for_search", o.inner_budget_for_search);
  r.get("seed", o.seed);
}

json write_breakdown(const objective::TermBreakdown& t) {
  return json{{"editing", t.editing}, {"magnitude", t.magnitude}, {"temporal", t.temporal},
              {"spatial", t.spatial},  {"buffer", t.buffer},       {"total", t.total()}};
}

objective::TermBreakdown read_breakdown(const json& j) {
  objective::TermBreakdown t;
  t.editing = j.at("editing").get<double>();
  t.magnitude = j.at("magnitude").get<double>();
  t.temporal = j.at("temporal").get<double>();
  t.spatial = j.at("spatial").get<double>();
  t.buffer = j.at("buffer").get<double>();
  return t;
}

json write_resolved_window(const control::SpacetimeWindow& w) {
  json nodes = json::array();
  for (int a = 0; a < w.dim; ++a) nodes.push_back(w.node_counts[a]);
  return json{{"dim", w.dim},         {"origin", vec_json(w.origin, w.dim)},
              {"nodes", nodes},       {"spacing", w.spacing},
              {"buffer", w.buffer},   {"t_start", w.t_start},
              {"t_end", w.t_end}};
}

control::SpacetimeWindow read_resolved_window(const json& j) {
  control::SpacetimeWindow w;
  w.dim = j.at("dim").get<int>();
  const auto& o = j.at("origin");
  for (int a = 0; a < w.dim; ++a) w.origin[a] = o.at(a).get<double>();
  const auto& n = j.at("nodes");
  w.node_counts = {1, 1, 1};
  for (int a = 0; a < w.dim; ++a) w.node_counts[a] = n.at(a).get<int>();
  w.spacing = j.at("spacing").get<double>();
  w.buffer = j.at("buffer").get<double>();
  w.t_start = j.at("t_start").get<int>();
  w.t_end = j.at("t_end").get<int>();
  return w;
}

}  // namespace

// ----- scene -----

void SceneConfig::validate() const {
  std::vector<std::string> issues;
  collect(issues, "sim.", [&] { sim.validate(); });
  if (steps < 0) issues.push_back("steps: must be >= 0");
  if (!(jitter >= 0.0 && jitter < 0.5)) issues.push_back("jitter: must lie in [0, 0.5)");
  if (layout.empty()) issues.push_back("layout: at least one primitive required");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& p = layout[i];
    const std::string path = "layout[" + std::to_string(i) + "]";
    if (p.spacing && !(*p.spacing > 0.0)) issues.push_back(path + ".spacing: must be > 0");
    if (p.kind == LayoutPrimitive::Kind::ball && !(p.radius > 0.0)) {
      issues.push_back(path + ".radius: must be > 0");
    }
    const Aabb bounds = p.kind == LayoutPrimitive::Kind::block
                            ? Aabb{p.lo, p.hi}
                            : Aabb{p.center, p.center}.dilated(p.radius, sim.dim);
    if (p.kind == LayoutPrimitive::Kind::block) {
      for (int a = 0; a < sim.dim; ++a) {
        if (!(p.hi[a] > p.lo[a])) {
          issues.push_back(path + ".hi: must exceed lo on every axis");
          break;
        }
      }
    }
    if (!sim.domain.contains(bounds.lo, sim.dim) || !sim.domain.contains(bounds.hi, sim.dim)) {
      issues.push_back(path + ": must lie inside the domain");
    }
  }
  throw_if(issues);
}

sim::ParticleState SceneConfig::initial_state() const {
  sim::ParticleState out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (const auto& p : layout) {
    const double spacing = p.spacing.value_or(sim.rest_spacing());
    auto part = p.kind == LayoutPrimitive::Kind::block
                    ? sim::make_block(Aabb{p.lo, p.hi}, spacing, sim.dim, p.velocity)
                    : sim::make_ball(p.center, p.radius, spacing, sim.dim, p.velocity);
    if (jitter > 0.0) {
      for (auto& x : part.x) {
        for (int a = 0; a < sim.dim; ++a) x[a] += jitter * spacing * uni(rng);
      }
    }
    sim::append(out, part);
  }
  return out;
}

SceneConfig parse_scene(const std::string& text) {
  const json doc = parse_document(text);
  std::vector<std::string> issues;
  SceneConfig scene;
  {
    Reader r(doc, "", issues);
    if (const json* s = r.raw("sim", true)) {
      Reader sr(*s, "sim", issues);
      read_sim(sr, scene.sim);
    }
    const int dim = (scene.sim.dim == 2 || scene.sim.dim == 3) ? scene.sim.dim : 2;
    for_each_element(r, "layout", true, [&](const json& e, const std::string& path) {
      Reader lr(e, path, issues);
      if (!lr.ok()) return;
      LayoutPrimitive p;
      std::string type;
      lr.get("type", type, true);
      if (type == "block") {
        p.kind = LayoutPrimitive::Kind::block;
        lr.get_vec("lo", p.lo, dim, true);
        lr.get_vec("hi", p.hi, dim, true);
      } else if (type == "ball") {
        p.kind = LayoutPrimitive::Kind::ball;
        lr.get_vec("center", p.center, dim, true);
        lr.get("radius", p.radius, true);
      } else if (!type.empty()) {
        lr.issue("type", "must be \"block\" or \"ball\"");
      }
      lr.get("spacing", p.spacing);
      lr.get_vec("velocity", p.velocity, dim);
      scene.layout.push_back(p);
    });
    r.get("steps", scene.steps, true);
    r.get("seed", scene.seed);
    r.get("jitter", scene.jitter);
  }
  throw_if(issues);
  scene.validate();
  return scene;
}

std::string serialize_scene(const SceneConfig& scene) {
  const int dim = scene.sim.dim;
  json layout = json::array();
  for (const auto& p : scene.layout) {
    json e;
    if (p.kind == LayoutPrimitive::Kind::block) {
      e["type"] = "block";
      e["lo"] = vec_json(p.lo, dim);
      e["hi"] = vec_json(p.hi, dim);
    } else {
      e["type"] = "ball";
      e["center"] = vec_json(p.center, dim);
      e["radius"] = p.radius;
    }
    if (p.spacing) e["spacing"] = *p.spacing;
    e["velocity"] = vec_json(p.velocity, dim);
    layout.push_back(e);
  }
  json doc{{"sim", write_sim(scene.sim)},
           {"layout", layout},
           {"steps", scene.steps},
           {"seed", scene.seed},
           {"jitter", scene.jitter}};
  return doc.dump(2) + "\n";
}

// ----- job -----

int JobConfig::latest_edit_frame() const {
  int latest = -1;
  for (const auto& t : targets) latest = std::max(latest, t.frame);
  for (const auto& g : grid) latest = std::max(latest, g.frame);
  if (pathline) latest = std::max(latest, pathline->t_end);
  if (latest < 0) throw ValidationError("edit: no targets");
  return latest;
}

JobConfig parse_job(const std::string& text) {
  const json doc = parse_document(text);
  std::vector<std::string> issues;
  JobConfig job;
  {
    Reader r(doc, "", issues);
    r.get("baseline", job.baseline);
    int dim = 2;
    if (const json* w = r.raw("window", true)) {
      Reader wr(*w, "window", issues);
      if (wr.get_vec("origin", job.window.origin, 0, true)) {
        dim = static_cast<int>(w->at("origin").size());
      }
      job.dim = dim;
      if (const json* nodes = wr.raw("nodes", true)) {
        const bool shape_ok = nodes->is_array() && static_cast<int>(nodes->size()) == dim &&
                              std::all_of(nodes->begin(), nodes->end(),
                                          [](const json& e) { return e.is_number_integer(); });
        if (!shape_ok) {
          wr.issue("nodes", "must hold one integer count per axis of origin");
        } else {
          for (int a = 0; a < dim; ++a) job.window.nodes[a] = (*nodes)[a].get<int>();
        }
      }
      if (dim == 2) job.window.nodes[2] = 1;
      wr.get("spacing", job.window.spacing);
      wr.get("spacing_r", job.window.spacing_r);
      if (job.window.spacing.has_value() == job.window.spacing_r.has_value()) {
        wr.issue("spacing", "give exactly one of spacing and spacing_r");
      }
      wr.get("buffer", job.window.buffer);
      wr.get("t_start", job.window.t_start);
      wr.get("t_end", job.window.t_end);
      wr.get("temporal_window", job.window.temporal_window);
      wr.get("trace_cap", job.window.trace_cap);
      const int modes = job.window.t_start.has_value() + job.window.temporal_window.has_value() +
                        job.window.trace_cap.has_value();
      if (modes > 1) wr.issue("t_start", "give at most one of t_start, temporal_window and trace_cap");
    }
    if (const json* e = r.raw("edit", true)) {
      Reader er(*e, "edit", issues);
      std::string mode;
      if (er.get("mode", mode, true)) {
        try {
          job.mode = objective::edit_mode_from_string(mode);
        } catch (const ValidationError& err) {
          issues.insert(issues.end(), err.issues().begin(), err.issues().end());
        }
      }
      for_each_element(er, "targets", job.mode == objective::EditMode::particle_keyframe,
                       [&](const json& t, const std::string& path) {
                         Reader tr(t, path, issues);
                         if (!tr.ok()) return;
                         objective::ParticleTarget target;
                         tr.get("frame", target.frame, true);
                         tr.get("particle", target.particle, true);
                         tr.get_vec("position", target.position, dim, true);
                         tr.get("weight", target.weight);
                         job.targets.push_back(target);
                       });
      if (const json* p = er.raw("pathline", job.mode == objective::EditMode::pathline)) {
        Reader pr(*p, er.child("pathline"), issues);
        objective::Pathline path;
        for_each_element(pr, "particles", true, [&](const json& v, const std::string& at) {
          if (!v.is_number_unsigned()) {
            issues.push_back(at + ": must be a particle index");
          } else {
            path.particles.push_back(v.get<ParticleId>());
          }
        });
        for_each_element(pr, "points", true, [&](const json& v, const std::string& at) {
          Vec3 q;
          if (read_vec_value(v, at, dim, q, issues)) path.points.push_back(q);
        });
        pr.get("t_begin", path.t_begin, true);
        pr.get("t_end", path.t_end, true);
        pr.get("weight", path.weight);
        job.pathline = path;
      }
      for_each_element(er, "grid", job.mode == objective::EditMode::grid_density,
                       [&](const json& g, const std::string& path) {
                         Reader gr(g, path, issues);
                         if (!gr.ok()) return;
                         GridKeyframeSpec key;
                         gr.get("frame", key.frame, true);
                         gr.get("image", key.image);
                         for_each_element(gr, "density", false, [&](const json& v, const std::string& at) {
                           if (!v.is_number()) {
                             issues.push_back(at + ": must be a number");
                           } else {
                             key.density.push_back(v.get<double>());
                           }
                         });
                         if (key.image.empty() == key.density.empty()) {
                           gr.issue("density", "give exactly one of density and image");
                         }
                         job.grid.push_back(key);
                       });
    }
    if (const json* w = r.raw("weights", false)) {
      Reader wr(*w, "weights", issues);
      read_weights(wr, job.weights);
    }
    if (const json* o = r.raw("optimize", false)) {
      Reader orr(*o, "optimize", issues);
      read_optimize(orr, job.optimize);
    }
  }
  throw_if(issues);
  collect(issues, "", [&] { job.weights.validate(); });
  collect(issues, "", [&] { job.optimize.validate(); });
  throw_if(issues);
  return job;
}

std::string serialize_job(const JobConfig& job) {
  const int dim = job.dim;
  json doc;
  if (!job.baseline.empty()) doc["baseline"] = job.baseline;
  doc["window"] = write_window(job.window, dim);
  json edit;
  edit["mode"] = objective::to_string(job.mode);
  if (!job.targets.empty()) {
    json targets = json::array();
    for (const auto& t : job.targets) {
      targets.push_back({{"frame", t.frame},
                         {"particle", t.particle},
                         {"position", vec_json(t.position, dim)},
                         {"weight", t.weight}});
    }
    edit["targets"] = targets;
  }
  if (job.pathline) {
    json points = json::array();
    for (const auto& p : job.pathline->points) points.push_back(vec_json(p, dim));
    edit["pathline"] = {{"particles", job.pathline->particles},
                        {"points", points},
                        {"t_begin", job.pathline->t_begin},
                        {"t_end", job.pathline->t_end},
                        {"weight", job.pathline->weight}};
  }
  if (!job.grid.empty()) {
    json grid = json::array();
    for (const auto& g : job.grid) {
      json e{{"frame", g.frame}};
      if (!g.image.empty()) e["image"] = g.image;
      if (!g.density.empty()) e["density"] = g.density;
      grid.push_back(e);
    }
    edit["grid"] = grid;
  }
  doc["edit"] = edit;
  doc["weights"] = write_weights(job.weights);
  doc["optimize"] = write_optimize(job.optimize);
  return doc.dump(2) + "\n";
}

void validate_job(const JobConfig& job, const sim::SimConfig& cfg, int simulated_steps,
                  std::size_t particle_count) {
  std::vector<std::string> issues;
  const auto& w = job.window;
  const double spacing = w.spacing ? *w.spacing : w.spacing_r.value_or(0.0) * cfg.particle_radius;
  for (int a = 0; a < cfg.dim; ++a) {
    const double hi = w.origin[a] + (w.nodes[a] - 1) * spacing;
    if (w.origin[a] < cfg.domain.lo[a] || hi > cfg.domain.hi[a]) {
      issues.push_back("window.origin: window box must lie inside the domain");
      break;
    }
  }
  auto check_frame = [&](int frame, const std::string& path) {
    if (frame < 1 || frame > simulated_steps) {
      issues.push_back(path + ": frame " + std::to_string(frame) + " outside the simulated range [1, " +
                       std::to_string(simulated_steps) + "]");
    }
  };
  for (std::size_t i = 0; i < job.targets.size(); ++i) {
    const std::string path = "edit.targets[" + std::to_string(i) + "]";
    check_frame(job.targets[i].frame, path + ".frame");
    if (job.targets[i].particle >= particle_count) issues.push_back(path + ".particle: id out of range");
  }
  if (job.pathline) {
    check_frame(job.pathline->t_end, "edit.pathline.t_end");
    if (job.pathline->t_begin < 0 || job.pathline->t_begin >= job.pathline->t_end) {
      issues.push_back("edit.pathline.t_begin: must lie in [0, t_end)");
    }
    for (const auto p : job.pathline->particles) {
      if (p >= particle_count) {
        issues.push_back("edit.pathline.particles: id " + std::to_string(p) + " out of range");
        break;
      }
    }
  }
  for (std::size_t i = 0; i < job.grid.size(); ++i) {
    check_frame(job.grid[i].frame, "edit.grid[" + std::to_string(i) + "].frame");
  }
  if (w.t_end) check_frame(*w.t_end, "window.t_end");
  throw_if(issues);
}

control::SpacetimeWindow resolve_window(const JobConfig& job, const sim::SimConfig& cfg,
                                        const sim::Trajectory& baseline) {
  const auto& spec = job.window;
  control::SpacetimeWindow w;
  w.dim = cfg.dim;
  w.origin = spec.origin;
  w.node_counts = spec.nodes;
  if (cfg.dim == 2) w.node_counts[2] = 1;
  w.spacing = spec.spacing ? *spec.spacing : spec.spacing_r.value_or(0.0) * cfg.particle_radius;
  w.buffer = spec.buffer.value_or(2.0 * cfg.kernel_radius);
  w.t_end = spec.t_end.value_or(job.latest_edit_frame());
  if (spec.t_start) {
    w.t_start = *spec.t_start;
  } else if (spec.temporal_window) {
    w.t_start = w.t_end - *spec.temporal_window;
  } else {
    std::vector<ParticleId> edited;
    for (const auto& t : job.targets) edited.push_back(t.particle);
    if (job.pathline) edited.insert(edited.end(), job.pathline->particles.begin(), job.pathline->particles.end());
    if (edited.empty()) throw ValidationError("window.trace_cap: backward trace needs particle edits");
    std::sort(edited.begin(), edited.end());
    edited.erase(std::unique(edited.begin(), edited.end()), edited.end());
    const int cap = spec.trace_cap.value_or(30);
    w.t_start = control::backward_trace_window(baseline, w, edited, w.t_end, cap);
    if (w.t_start == w.t_end) {
      throw ValidationError("window: edited particles enter the window only at the edit frame");
    }
  }
  if (w.t_start < 0) throw ValidationError("window.t_start: window starts before frame 0");
  w.validate(cfg.kernel_radius);
  return w;
}

objective::EditSpec build_edit(const JobConfig& job, const control::SpacetimeWindow& window,
                               const sim::SimConfig& cfg, const sim::Trajectory& baseline,
                               const std::string& base_dir) {
  objective::EditSpec spec;
  spec.mode = job.mode;
  spec.targets = job.targets;
  spec.pathline = job.pathline;
  objective::compile(spec, baseline);
  if (job.mode == objective::EditMode::pathline) spec = optimize::restrict_to_window(spec, window);
  for (const auto& g : job.grid) {
    objective::GridKeyframe key{g.frame, g.density};
    if (!g.image.empty()) {
      if (g.frame < 0 || g.frame >= static_cast<int>(baseline.size())) {
        throw ValidationError("edit.grid.frame: outside the simulated range");
      }
      const auto path = std::filesystem::path(base_dir) / g.image;
      const auto rho = control::project_density(baseline[g.frame].x, cfg.mass(), window);
      double total = 0.0;
      for (const double v : rho) total += v;
      key.density = ingest_image_keyframe(read_pgm(path.string()), window, total);
    }
    spec.grid.push_back(std::move(key));
  }
  return spec;
}

// ----- solution -----

std::string serialize_solution(const optimize::ControlSolution& s) {
  json history = json::array();
  for (const auto& h : s.history) {
    history.push_back({{"iteration", h.iteration}, {"terms", write_breakdown(h.terms)}});
  }
  std::vector<double> forces(s.field.data().begin(), s.field.data().end());
  json doc{{"window", write_resolved_window(s.window)},
           {"forces", forces},
           {"initial", write_breakdown(s.initial)},
           {"final", write_breakdown(s.final_terms)},
           {"history", history},
           {"converged", s.converged},
           {"empty_buffer", s.empty_buffer},
           {"message", s.message},
           {"template_period", s.template_period},
           {"template_repeats", s.template_repeats}};
  return doc.dump(1) + "\n";
}

optimize::ControlSolution parse_solution(const std::string& text) {
  const json doc = parse_document(text);
  try {
    optimize::ControlSolution s;
    s.window = read_resolved_window(doc.at("window"));
    s.field = control::ForceField(s.window);
    const auto& forces = doc.at("forces");
    if (forces.size() != s.field.size()) throw ValidationError("forces: size does not match the window");
    for (std::size_t i = 0; i < forces.size(); ++i) s.field.data()[i] = forces[i].get<double>();
    s.initial = read_breakdown(doc.at("initial"));
    s.final_terms = read_breakdown(doc.at("final"));
    for (const auto& h : doc.at("history")) {
      s.history.push_back({h.at("iteration").get<int>(), read_breakdown(h.at("terms")), true});
    }
    s.converged = doc.at("converged").get<bool>();
    s.empty_buffer = doc.value("empty_buffer", false);
    s.message = doc.value("message", std::string());
    s.template_period = doc.value("template_period", 0);
    s.template_repeats = doc.value("template_repeats", 0);
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("solution: ") + e.what());
  }
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path + ": cannot read file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace fluidctl::io
