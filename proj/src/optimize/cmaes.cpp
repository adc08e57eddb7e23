#include "fluidctl/optimize/cmaes.hpp"

#include "fluidctl/common.hpp"

#include <algorithm>
#include <future>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace fluidctl::optimize {

CmaResult cma_search_integer(const std::function<double(int)>& phi, int lo, int hi, double x0,
                             const CmaOptions& options) {
  if (hi < lo) throw ValidationError("search: upper bound below lower bound");
  if (options.popsize < 2) throw ValidationError("search.cma_popsize: must be >= 2");
  if (options.max_gens < 1) throw ValidationError("search.cma_max_gens: must be >= 1");

  const int lambda = options.popsize;
  const int mu = lambda / 2;
  std::vector<double> weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  for (double& w : weights) w /= wsum;
  double w2 = 0.0;
  for (const double w : weights) w2 += w * w;
  const double mu_eff = 1.0 / w2;

  const double n = 1.0;
  const double c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
  const double d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (n + 1.0)) - 1.0) + c_sigma;
  const double c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
  const double c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
  const double c_mu = std::min(1.0 - c_1, 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
  const double chi = std::sqrt(2.0 / std::numbers::pi);  // E|N(0,1)|

  double mean = std::clamp(x0, static_cast<double>(lo), static_cast<double>(hi));
  double sigma = options.sigma0 > 0.0 ? options.sigma0 : std::max(1.0, (hi - lo) / 4.0);
  double C = 1.0, p_sigma = 0.0, p_c = 0.0;

  CmaResult result;
  auto evaluate = [&](int t) {
    auto it = result.evaluated.find(t);
    if (it != result.evaluated.end()) return it->second;
    const double v = phi(t);
    result.evaluated.emplace(t, v);
    return v;
  };

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int range = hi - lo + 1;

  for (int gen = 0; gen < options.max_gens; ++gen) {
    result.generations = gen + 1;
    struct Sample {
      double x;
      double value;
    };
    std::vector<Sample> pop(lambda);
    for (auto& s : pop) {
      s.x = std::clamp(mean + sigma * std::sqrt(C) * normal(rng), static_cast<double>(lo),
                       static_cast<double>(hi));
    }
    if (options.threads > 1) {
      std::vector<int> fresh;
      for (const auto& s : pop) {
        const int t = static_cast<int>(std::lround(s.x));
        if (!result.evaluated.count(t) && std::find(fresh.begin(), fresh.end(), t) == fresh.end()) {
          fresh.push_back(t);
        }
      }
      for (std::size_t first = 0; first < fresh.size(); first += options.threads) {
        const std::size_t last = std::min(fresh.size(), first + options.threads);
        std::vector<std::future<double>> running;
        for (std::size_t k = first; k < last; ++k) {
          running.push_back(std::async(std::launch::async, phi, fresh[k]));
        }
        for (std::size_t k = first; k < last; ++k) result.evaluated.emplace(fresh[k], running[k - first].get());
      }
    }
    for (auto& s : pop) s.value = evaluate(static_cast<int>(std::lround(s.x)));
    std::stable_sort(pop.begin(), pop.end(),
                     [](const Sample& a, const Sample& b) { return a.value < b.value; });

    const double old_mean = mean;
    mean = 0.0;
    for (int i = 0; i < mu; ++i) mean += weights[i] * pop[i].x;
    const double y_w = (mean - old_mean) / sigma;

    p_sigma = (1.0 - c_sigma) * p_sigma + std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * y_w / std::sqrt(C);
    const double norm_ps = std::abs(p_sigma);
    const double h_sigma =
        norm_ps / std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * (gen + 1))) < (1.4 + 2.0 / (n + 1.0)) * chi
            ? 1.0
            : 0.0;
    p_c = (1.0 - c_c) * p_c + h_sigma * std::sqrt(c_c * (2.0 - c_c) * mu_eff) * y_w;
    double rank_mu = 0.0;
    for (int i = 0; i < mu; ++i) {
      const double y = (pop[i].x - old_mean) / sigma;
      rank_mu += weights[i] * y * y;
    }
    C = (1.0 - c_1 - c_mu) * C + c_1 * (p_c * p_c + (1.0 - h_sigma) * c_c * (2.0 - c_c) * C) + c_mu * rank_mu;
    sigma *= std::exp((c_sigma / d_sigma) * (norm_ps / chi - 1.0));

    if (static_cast<int>(result.evaluated.size()) >= range) break;
    // Below integer resolution every further sample rounds to the same value.
    if (sigma * std::sqrt(C) < 0.1) break;
  }

  // Make sure the final mean itself has been looked at.
  evaluate(static_cast<int>(std::lround(mean)));

  result.evaluations = static_cast<int>(result.evaluated.size());
  auto best = std::min_element(result.evaluated.begin(), result.evaluated.end(),
                               [](const auto& a, const auto& b) { return a.second < b.second; });
  result.best = best->first;
  result.value = best->second;
  return result;
}

}  // namespace fluidctl::optimize
