#include "fluidctl/optimize/lbfgs.hpp"

#include <ceres/ceres.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fluidctl::optimize {

namespace {

class Function final : public ceres::FirstOrderFunction {
 public:
  Function(const GradientFunction& f, int n) : f_(f), n_(n) {}

  bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
    std::span<const double> x(parameters, n_);
    std::vector<double> scratch;
    std::span<double> g;
    if (gradient) {
      g = {gradient, static_cast<std::size_t>(n_)};
    } else {
      scratch.assign(n_, 0.0);
      g = scratch;
    }
    std::fill(g.begin(), g.end(), 0.0);
    *cost = f_(x, g);
    if (!std::isfinite(*cost)) return false;
    if (gradient && *cost < best_value) {
      best_value = *cost;
      best_x.assign(parameters, parameters + n_);
    }
    return true;
  }

  int NumParameters() const override { return n_; }

  mutable double best_value = std::numeric_limits<double>::infinity();
  mutable std::vector<double> best_x;

 private:
  const GradientFunction& f_;
  int n_;
};

class Callback final : public ceres::IterationCallback {
 public:
  Callback(const std::function<void(const LbfgsIterate&)>& fn, const std::atomic<bool>* cancel)
      : fn_(fn), cancel_(cancel) {}

  ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
    if (fn_) fn_({s.iteration, s.cost, s.gradient_max_norm, s.step_is_successful});
    if (cancel_ && cancel_->load()) return ceres::SOLVER_ABORT;
    return ceres::SOLVER_CONTINUE;
  }

 private:
  const std::function<void(const LbfgsIterate&)>& fn_;
  const std::atomic<bool>* cancel_;
};

}  // namespace

LbfgsResult minimize_lbfgs(const GradientFunction& f, std::vector<double> x0,
                           const LbfgsOptions& options,
                           const std::function<void(const LbfgsIterate&)>& on_iterate) {
  const int n = static_cast<int>(x0.size());
  auto* function = new Function(f, n);
  ceres::GradientProblem problem(function);

  ceres::GradientProblemSolver::Options opts;
  opts.line_search_direction_type = ceres::LBFGS;
  opts.line_search_type = ceres::WOLFE;
  opts.line_search_interpolation_type = ceres::CUBIC;
  opts.max_lbfgs_rank = options.memory;
  opts.max_num_iterations = options.max_iters;
  opts.gradient_tolerance = options.grad_tol;
  opts.function_tolerance = options.function_tol;
  opts.parameter_tolerance = 0.0;
  opts.line_search_sufficient_function_decrease = options.wolfe_c1;
  opts.line_search_sufficient_curvature_decrease = options.wolfe_c2;
  opts.logging_type = ceres::SILENT;
  Callback callback(on_iterate, options.cancel);
  opts.callbacks.push_back(&callback);

  ceres::GradientProblemSolver::Summary summary;
  std::vector<double> x = x0;
  ceres::Solve(opts, problem, x.data(), &summary);

  LbfgsResult out;
  out.iterations = summary.iterations.empty() ? 0 : summary.iterations.back().iteration;
  out.converged = summary.termination_type == ceres::CONVERGENCE;
  out.message = summary.message;
  if (!function->best_x.empty() && function->best_value <= summary.final_cost) {
    out.x = function->best_x;
    out.value = function->best_value;
  } else {
    out.x = std::move(x);
    out.value = summary.final_cost;
  }
  return out;
}

}  // namespace fluidctl::optimize
