#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace fluidctl::optimize {

struct CmaOptions {
  int popsize = 4;
  double sigma0 = 0.0;  // 0 selects (hi - lo) / 4
  int max_gens = 10;
  std::uint64_t seed = 1;
  int threads = 1;  // new candidates of a generation are evaluated concurrently
};

struct CmaResult {
  int best = 0;
  double value = 0.0;
  int evaluations = 0;              // distinct integers evaluated
  std::map<int, double> evaluated;  // memo table
  int generations = 0;
};

/// One-dimensional CMA-ES over the integers in [lo, hi]. Samples are clipped
/// to the bounds and rounded before evaluation; each integer is evaluated at
/// most once. With threads > 1, `phi` must be safe to call concurrently.
CmaResult cma_search_integer(const std::function<double(int)>& phi, int lo, int hi, double x0,
                             const CmaOptions& options = {});

}  // namespace fluidctl::optimize
