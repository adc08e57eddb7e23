#include "fluidctl/diff/tape.hpp"
#include "fluidctl/optimize/optimize.hpp"
#include "fluidctl/optimize/resim.hpp"
#include "fluidctl/sim/layout.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fluidctl;
using control::ForceField;
using control::SpacetimeWindow;
using objective::ObjectiveWeights;

namespace {

struct Scene {
  sim::SimConfig cfg;
  sim::Trajectory baseline;
  SpacetimeWindow window;
  objective::EditSpec spec;
};

// 50 particles sloshing in a box, window over the right half of the block.
Scene small_scene(int steps = 5) {
  Scene s;
  s.cfg.dt = 0.005;
  s.cfg.vorticity_strength = 0.02;
  s.cfg.domain = {Vec3::Zero(), Vec3(1.0, 1.0, 0)};
  auto start = sim::make_block({Vec3::Zero(), Vec3(0.5, 0.25, 0)}, s.cfg.rest_spacing(), 2, Vec3(0.4, 0, 0));
  REQUIRE(start.size() == 50);
  s.baseline = optimize::simulate(start, s.cfg, 20 + steps);
  s.window.dim = 2;
  s.window.origin = Vec3(0.2, 0.0, 0);
  s.window.node_counts = {5, 4, 1};
  s.window.spacing = 3 * s.cfg.particle_radius;
  s.window.buffer = 2 * s.cfg.kernel_radius;
  s.window.t_start = 20;
  s.window.t_end = 20 + steps;
  const int t_end = s.window.t_end;
  for (objective::ParticleId p : {14u, 25u, 37u}) {
    for (int f : {t_end - 2, t_end}) {
      s.spec.targets.push_back({f, p, s.baseline[f].x[p] + Vec3(0.02, 0.015, 0), 1.0});
    }
  }
  return s;
}

ForceField random_field(const SpacetimeWindow& w, const sim::SimConfig& cfg, std::uint64_t seed, double amp) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, amp * optimize::force_scale(cfg));
  ForceField f(w);
  for (auto& v : f.data()) v = n(rng);
  return f;
}

ForceField total_gradient(const objective::Objective& obj, const ForceField& f, const sim::SimConfig& cfg) {
  const auto tape = diff::forward_record(obj.start_state(), f, obj.window(), cfg);
  auto dx = objective::zero_adjoint(tape.trajectory);
  ForceField df(obj.window());
  obj.evaluate(tape.trajectory, f, &dx, &df);
  auto g = diff::backward(tape, dx);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += df.data()[i];
  return g;
}

double total_value(const objective::Objective& obj, const ForceField& f, const sim::SimConfig& cfg) {
  return obj.evaluate(diff::forward(obj.start_state(), f, obj.window(), cfg), f).total();
}

}  // namespace

TEST_CASE("forward pass") {
  const Scene s = small_scene();
  const ForceField zero(s.window);

  SUBCASE("zero field reproduces plain stepping") {
    const auto tape = diff::forward_record(s.baseline[20], zero, s.window, s.cfg);
    REQUIRE(tape.trajectory.size() == 6);
    REQUIRE(tape.steps.size() == 5);
    for (int k = 0; k <= 5; ++k) CHECK(tape.trajectory[k] == s.baseline[20 + k]);
  }

  SUBCASE("deterministic") {
    const ForceField f = random_field(s.window, s.cfg, 3, 0.5);
    const auto a = diff::forward_record(s.baseline[20], f, s.window, s.cfg);
    const auto b = diff::forward_record(s.baseline[20], f, s.window, s.cfg);
    CHECK(a.trajectory == b.trajectory);
    CHECK(diff::forward(s.baseline[20], f, s.window, s.cfg) == a.trajectory);
  }

  SUBCASE("tape replay reproduces the multipliers") {
    const ForceField f = random_field(s.window, s.cfg, 4, 0.5);
    const auto tape = diff::forward_record(s.baseline[20], f, s.window, s.cfg);
    int active = 0;
    for (int k = 0; k < 5; ++k) {
      const auto lambdas = diff::replay_lambdas(tape, k);
      REQUIRE(lambdas.size() == tape.steps[k].iterations.size());
      for (std::size_t i = 0; i < lambdas.size(); ++i) {
        CHECK(lambdas[i] == tape.steps[k].iterations[i].lambda);
        for (double l : lambdas[i]) active += l != 0.0;
      }
    }
    CHECK(active > 0);
  }

  SUBCASE("divergence reports the step") {
    ForceField f(s.window);
    f.data()[0] = std::nan("");
    CHECK_THROWS_AS(diff::forward(s.baseline[20], f, s.window, s.cfg), NumericalError);
  }
}

TEST_CASE("single free particle") {
  sim::SimConfig cfg;
  cfg.dt = 0.01;
  sim::ParticleState start;
  start.x = {Vec3(0.5, 0.5, 0)};
  start.v = {Vec3(0.1, 0.0, 0)};
  SpacetimeWindow w;
  w.origin = Vec3(0.4, 0.4, 0);
  w.node_counts = {3, 3, 1};
  w.spacing = 0.1;
  w.buffer = 0.2;
  w.t_start = 0;
  w.t_end = 1;
  ForceField f(w);
  f.at(0, 4, 0) = 3.0;
  const auto tape = diff::forward_record(start, f, w, cfg);
  const Vec3 target(0.52, 0.47, 0);
  objective::EditSpec spec;
  spec.targets = {{1, 0, target, 1.0}};
  auto dx = objective::zero_adjoint(tape.trajectory);
  objective::particle_edit_loss(tape.trajectory, 0, spec, ObjectiveWeights{}, &dx);
  const auto g = diff::backward(tape, dx);
  const Vec3 expected = 2.0 * (tape.trajectory[1].x[0] - target) * cfg.dt * cfg.dt / cfg.mass();
  CHECK(g.at(0, 4, 0) == doctest::Approx(expected.x()).epsilon(1e-12));
  CHECK(g.at(0, 4, 1) == doctest::Approx(expected.y()).epsilon(1e-12));
  // Off-node entries scale with the transfer weight.
  const double w1 = std::exp(-2.0);
  CHECK(g.at(0, 1, 1) == doctest::Approx(w1 * expected.y()).epsilon(1e-12));
  CHECK(g.at(0, 0, 0) == doctest::Approx(std::exp(-4.0) * expected.x()).epsilon(1e-12));
}

TEST_CASE("backward properties") {
  const Scene s = small_scene();
  const ForceField f = random_field(s.window, s.cfg, 5, 0.5);
  const auto tape = diff::forward_record(s.baseline[20], f, s.window, s.cfg);

  SUBCASE("trajectory-independent objective") {
    const auto g = diff::backward(tape, objective::zero_adjoint(tape.trajectory));
    CHECK(g.max_abs() == 0.0);
  }

  SUBCASE("linear in the seed") {
    std::mt19937 rng(6);
    std::normal_distribution<double> n(0.0, 1.0);
    auto dx = objective::zero_adjoint(tape.trajectory);
    for (auto& frame : dx) {
      for (auto& v : frame) v = Vec3(n(rng), n(rng), 0.0);
    }
    auto scaled = dx;
    for (auto& frame : scaled) {
      for (auto& v : frame) v *= -2.5;
    }
    const auto a = diff::backward(tape, dx);
    const auto b = diff::backward(tape, scaled);
    const double scale = a.max_abs();
    REQUIRE(scale > 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(b.data()[i] + 2.5 * a.data()[i]) <= 1e-13 * scale);
  }

  SUBCASE("zero-edit fixed point") {
    objective::EditSpec exact;
    for (objective::ParticleId p : {14u, 25u}) exact.targets.push_back({s.window.t_end, p, s.baseline[s.window.t_end].x[p], 1.0});
    const objective::Objective obj(s.baseline, s.window, exact, ObjectiveWeights{}, s.cfg.mass());
    const auto g = total_gradient(obj, ForceField(s.window), s.cfg);
    CHECK(std::sqrt(g.squared_norm()) <= 1e-8);
  }
}

TEST_CASE("gradient matches finite differences per term") {
  const Scene s = small_scene();
  const double fs = optimize::force_scale(s.cfg);
  const ForceField f = random_field(s.window, s.cfg, 7, 0.3);

  struct Term {
    const char* name;
    ObjectiveWeights k;
  };
  const Term terms[] = {
      {"editing", {1.0, 0.0, 0.0, 0.0, 0.0}},  {"magnitude", {0.0, 1e-3, 0.0, 0.0, 0.0}},
      {"temporal", {0.0, 0.0, 1e-2, 0.0, 0.0}}, {"spatial", {0.0, 0.0, 0.0, 1e-2, 0.0}},
      {"buffer", {0.0, 0.0, 0.0, 0.0, 10.0}},
  };
  std::mt19937 rng(99);
  for (const auto& term : terms) {
    CAPTURE(term.name);
    const objective::Objective obj(s.baseline, s.window, s.spec, term.k, s.cfg.mass());
    const auto g = total_gradient(obj, f, s.cfg);
    const double gmax = g.max_abs();
    REQUIRE(gmax > 0.0);
    const double e = 1e-4 * fs;
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t i = rng() % f.size();
      auto plus = f, minus = f;
      plus.data()[i] += e;
      minus.data()[i] -= e;
      const double fd = (total_value(obj, plus, s.cfg) - total_value(obj, minus, s.cfg)) / (2 * e);
      const double ad = g.data()[i];
      const double rel = std::abs(ad - fd) / std::max({std::abs(fd), std::abs(ad), 1e-10 * gmax});
      CAPTURE(i);
      CAPTURE(ad);
      CAPTURE(fd);
      CHECK(rel <= 1e-4);
    }
  }
}
