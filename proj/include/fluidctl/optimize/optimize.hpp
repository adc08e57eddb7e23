#pragma once

#include "fluidctl/control/window.hpp"
#include "fluidctl/objective/objective.hpp"
#include "fluidctl/optimize/lbfgs.hpp"
#include "fluidctl/sim/pbf.hpp"

#include <atomic>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace fluidctl::optimize {

struct OptimizeConfig {
  int max_lbfgs_iters = 200;
  int lbfgs_memory = 10;
  double grad_tol = 1e-10;      // on the normalized objective and forces
  double function_tol = 1e-12;
  int t_min = 5;
  int t_max = 30;
  int t_0 = 10;
  int cma_popsize = 4;
  double cma_sigma0 = 0.0;      // 0 selects (t_max - t_min) / 4
  int cma_max_gens = 10;
  int inner_budget_for_search = 30;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const OptimizeConfig&) const = default;
};

struct IterationReport {
  int iteration = 0;
  objective::TermBreakdown terms;
  bool accepted = true;
};

struct ControlSolution {
  control::SpacetimeWindow window;
  control::ForceField field;
  std::vector<IterationReport> history;  // accepted iterates
  objective::TermBreakdown initial;      // at zero force
  objective::TermBreakdown final_terms;
  bool converged = false;
  bool empty_buffer = false;
  std::string message;
  // Optional periodic re-application of the field: the window's steps are
  // replayed every `template_period` steps, `template_repeats` extra times.
  int template_period = 0;
  int template_repeats = 0;
};

/// Characteristic control force: the weight of one particle.
double force_scale(const sim::SimConfig& cfg);

using ProgressFn = std::function<void(const IterationReport&)>;

/// Minimizes the window objective over the force field, starting from zero,
/// with L-BFGS. `baseline` is indexed by global frame and must cover the
/// window; `spec` must be compiled.
ControlSolution optimize_window(const sim::Trajectory& baseline, const sim::SimConfig& cfg,
                                const control::SpacetimeWindow& window,
                                const objective::EditSpec& spec,
                                const objective::ObjectiveWeights& weights,
                                const OptimizeConfig& ocfg, const ProgressFn& progress = {},
                                const std::atomic<bool>* cancel = nullptr);

/// Keeps only the targets that fall inside the window interval.
objective::EditSpec restrict_to_window(const objective::EditSpec& spec,
                                       const control::SpacetimeWindow& window);

struct TemporalSearchResult {
  int best_t = 0;
  std::map<int, double> evaluated;  // T -> budgeted objective
  ControlSolution solution;         // full-budget solve at best_t
};

/// Searches the window length T in [t_min, t_max] with the window ending at
/// the latest keyframe, then re-optimizes at the winner. Candidates of one
/// CMA-ES generation run on up to `threads` threads.
TemporalSearchResult search_temporal_window(const sim::Trajectory& baseline,
                                            const sim::SimConfig& cfg,
                                            const control::SpacetimeWindow& spatial_window,
                                            const objective::EditSpec& spec,
                                            const objective::ObjectiveWeights& weights,
                                            const OptimizeConfig& ocfg,
                                            const ProgressFn& progress = {}, int threads = 1);

}  // namespace fluidctl::optimize
