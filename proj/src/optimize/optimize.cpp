#include "fluidctl/optimize/optimize.hpp"

#include "fluidctl/diff/tape.hpp"
#include "fluidctl/optimize/cmaes.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <mutex>

namespace fluidctl::optimize {

using control::ForceField;
using control::SpacetimeWindow;
using objective::TermBreakdown;

void OptimizeConfig::validate() const {
  std::vector<std::string> issues;
  if (max_lbfgs_iters < 1) issues.push_back("optimize.max_lbfgs_iters: must be >= 1");
  if (lbfgs_memory < 1) issues.push_back("optimize.lbfgs_memory: must be >= 1");
  if (!(grad_tol >= 0.0)) issues.push_back("optimize.grad_tol: must be >= 0");
  if (!(function_tol >= 0.0)) issues.push_back("optimize.function_tol: must be >= 0");
  if (t_min < 1) issues.push_back("optimize.t_min: must be >= 1");
  if (t_0 < t_min || t_0 > t_max) issues.push_back("optimize.t_0: must lie in [t_min, t_max]");
  if (t_max < t_min) issues.push_back("optimize.t_max: must be >= t_min");
  if (cma_popsize < 2) issues.push_back("optimize.cma_popsize: must be >= 2");
  if (!(cma_sigma0 >= 0.0)) issues.push_back("optimize.cma_sigma0: must be >= 0");
  if (cma_max_gens < 1) issues.push_back("optimize.cma_max_gens: must be >= 1");
  if (inner_budget_for_search < 1) issues.push_back("optimize.inner_budget_for_search: must be >= 1");
  if (!issues.empty()) throw ValidationError(std::move(issues));
}

double force_scale(const sim::SimConfig& cfg) {
  const double g = cfg.gravity.norm();
  return cfg.mass() * (g > 0.0 ? g : 1.0);
}

ControlSolution optimize_window(const sim::Trajectory& baseline, const sim::SimConfig& cfg,
                                const SpacetimeWindow& window, const objective::EditSpec& spec,
                                const objective::ObjectiveWeights& weights,
                                const OptimizeConfig& ocfg, const ProgressFn& progress,
                                const std::atomic<bool>* cancel) {
  ocfg.validate();
  window.validate(cfg.kernel_radius);
  const objective::Objective obj(baseline, window, spec, weights, cfg.mass());
  const auto& start = obj.start_state();
  if (obj.empty_buffer()) {
    spdlog::warn("window buffer holds no particles; the buffer term is inactive");
  }

  ControlSolution sol;
  sol.window = window;
  sol.empty_buffer = obj.empty_buffer();
  ForceField field(window);
  {
    const auto traj = diff::forward(start, field, window, cfg);
    sol.initial = obj.evaluate(traj, field);
  }
  const double norm = sol.initial.total() > 0.0 ? sol.initial.total() : 1.0;
  const double fscale = force_scale(cfg);

  struct Evaluated {
    double value;
    TermBreakdown terms;
  };
  std::vector<Evaluated> evaluated;
  bool first = true;

  GradientFunction fn = [&](std::span<const double> u, std::span<double> grad) -> double {
    for (std::size_t i = 0; i < u.size(); ++i) field.data()[i] = u[i] * fscale;
    try {
      const auto tape = diff::forward_record(start, field, window, cfg);
      auto dx = objective::zero_adjoint(tape.trajectory);
      ForceField df(window);
      const TermBreakdown terms = obj.evaluate(tape.trajectory, field, &dx, &df);
      const ForceField g = diff::backward(tape, dx);
      for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = (g.data()[i] + df.data()[i]) * fscale / norm;
      }
      const double value = terms.total() / norm;
      evaluated.push_back({value, terms});
      first = false;
      return value;
    } catch (const NumericalError& e) {
      if (first) throw;
      spdlog::debug("line search trial diverged: {}", e.what());
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  auto on_iterate = [&](const LbfgsIterate& it) {
    if (it.iteration > 0 && !it.accepted) return;
    IterationReport report{it.iteration, {}, it.accepted};
    for (auto e = evaluated.rbegin(); e != evaluated.rend(); ++e) {
      if (e->value == it.value) {
        report.terms = e->terms;
        break;
      }
    }
    sol.history.push_back(report);
    if (progress) progress(report);
  };

  LbfgsOptions lopts;
  lopts.max_iters = ocfg.max_lbfgs_iters;
  lopts.memory = ocfg.lbfgs_memory;
  lopts.grad_tol = ocfg.grad_tol;
  lopts.function_tol = ocfg.function_tol;
  lopts.cancel = cancel;
  const auto result = minimize_lbfgs(fn, std::vector<double>(field.size(), 0.0), lopts, on_iterate);

  for (std::size_t i = 0; i < field.size(); ++i) field.data()[i] = result.x[i] * fscale;
  sol.field = field;
  sol.final_terms = obj.evaluate(diff::forward(start, field, window, cfg), field);
  sol.converged = result.converged;
  sol.message = result.message;
  return sol;
}

objective::EditSpec restrict_to_window(const objective::EditSpec& spec, const SpacetimeWindow& window) {
  objective::EditSpec out = spec;
  auto outside = [&](int f) { return f <= window.t_start || f > window.t_end; };
  std::erase_if(out.targets, [&](const auto& t) { return outside(t.frame); });
  std::erase_if(out.grid, [&](const auto& g) { return outside(g.frame); });
  return out;
}

TemporalSearchResult search_temporal_window(const sim::Trajectory& baseline,
                                            const sim::SimConfig& cfg,
                                            const SpacetimeWindow& spatial_window,
                                            const objective::EditSpec& spec,
                                            const objective::ObjectiveWeights& weights,
                                            const OptimizeConfig& ocfg,
                                            const ProgressFn& progress, int threads) {
  ocfg.validate();
  const int t_end = spec.latest_keyframe();
  auto window_for = [&](int T) {
    SpacetimeWindow w = spatial_window;
    w.t_end = t_end;
    w.t_start = t_end - T;
    return w;
  };

  OptimizeConfig budgeted = ocfg;
  budgeted.max_lbfgs_iters = ocfg.inner_budget_for_search;
  std::vector<std::string> failures;
  std::mutex failures_mutex;
  auto fail = [&](std::string message) {
    std::lock_guard lock(failures_mutex);
    failures.push_back(std::move(message));
    return std::numeric_limits<double>::infinity();
  };
  auto phi = [&](int T) {
    const auto w = window_for(T);
    if (w.t_start < 0) return fail("T=" + std::to_string(T) + ": window starts before frame 0");
    try {
      const auto sol = optimize_window(baseline, cfg, w, restrict_to_window(spec, w), weights, budgeted);
      spdlog::info("temporal search T={} objective={:.6e}", T, sol.final_terms.total());
      return sol.final_terms.total();
    } catch (const ValidationError& e) {
      return fail("T=" + std::to_string(T) + ": " + e.what());
    }
  };

  CmaOptions copts;
  copts.popsize = ocfg.cma_popsize;
  copts.sigma0 = ocfg.cma_sigma0;
  copts.max_gens = ocfg.cma_max_gens;
  copts.seed = ocfg.seed;
  copts.threads = threads;
  const auto cma = cma_search_integer(phi, ocfg.t_min, ocfg.t_max, ocfg.t_0, copts);
  if (!std::isfinite(cma.value)) {
    failures.insert(failures.begin(), "search: no feasible temporal window");
    throw ValidationError(std::move(failures));
  }

  TemporalSearchResult out;
  out.best_t = cma.best;
  out.evaluated = cma.evaluated;
  const auto w = window_for(cma.best);
  out.solution = optimize_window(baseline, cfg, w, restrict_to_window(spec, w), weights, ocfg, progress);
  return out;
}

}  // namespace fluidctl::optimize
