#pragma once

#include <atomic>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fluidctl::optimize {

struct LbfgsOptions {
  int max_iters = 200;
  int memory = 10;
  double grad_tol = 1e-10;      // on max |gradient|
  double function_tol = 1e-12;  // relative decrease
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  const std::atomic<bool>* cancel = nullptr;
};

struct LbfgsIterate {
  int iteration = 0;
  double value = 0.0;
  double grad_max = 0.0;
  bool accepted = true;
};

struct LbfgsResult {
  std::vector<double> x;  // best point seen
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

/// f(x, grad) returns the value and writes the gradient.
using GradientFunction = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Limited-memory BFGS with a strong-Wolfe line search. `on_iterate` is called
/// once per solver iteration, starting with the initial point.
LbfgsResult minimize_lbfgs(const GradientFunction& f, std::vector<double> x0,
                           const LbfgsOptions& options,
                           const std::function<void(const LbfgsIterate&)>& on_iterate = {});

}  // namespace fluidctl::optimize
