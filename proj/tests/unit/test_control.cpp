#include "fluidctl/control/classify.hpp"
#include "fluidctl/control/transfer.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fluidctl;
using namespace fluidctl::control;

namespace {

SpacetimeWindow grid3(const Vec3& origin = Vec3::Zero()) {
  SpacetimeWindow w;
  w.dim = 2;
  w.origin = origin;
  w.node_counts = {3, 3, 1};
  w.spacing = 0.1;
  w.buffer = 0.05;
  w.t_start = 0;
  w.t_end = 4;
  return w;
}

std::vector<double> random_slab(const SpacetimeWindow& w, std::mt19937& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> slab(w.node_count() * w.dim);
  for (auto& v : slab) v = n(rng);
  return slab;
}

sim::Trajectory stationary(const std::vector<Vec3>& x, int frames) {
  sim::ParticleState s;
  s.x = x;
  s.v.assign(x.size(), Vec3::Zero());
  return sim::Trajectory(frames, s);
}

}  // namespace

TEST_CASE("transfer weights") {
  const SpacetimeWindow w = grid3();
  const std::size_t node = w.flat_index(1, 1, 0);
  std::vector<double> slab(w.node_count() * 2, 0.0);
  slab[node * 2] = 2.0;
  slab[node * 2 + 1] = -3.0;

  const Vec3 at = w.node_position(node);
  const auto f = transfer_forces(slab, std::vector<Vec3>{at}, w);
  CHECK(f[0] == Vec3(2.0, -3.0, 0.0));

  const auto g = transfer_forces(slab, std::vector<Vec3>{at + Vec3(w.alpha(), 0, 0)}, w);
  CHECK(g[0].x() == doctest::Approx(2.0 * 0.60653065971263342).epsilon(1e-12));
  CHECK(g[0].x() / 2.0 == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));

  SUBCASE("uniform field sums the weights") {
    const Vec3 F(0.7, -1.3, 0.0);
    std::vector<double> uniform(w.node_count() * 2);
    for (std::size_t i = 0; i < w.node_count(); ++i) {
      uniform[2 * i] = F.x();
      uniform[2 * i + 1] = F.y();
    }
    const Vec3 p(0.13, 0.04, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.node_count(); ++i) {
      const double d = (p - w.node_position(i)).norm();
      if (d <= w.cutoff()) sum += std::exp(-d * d / (2 * w.alpha() * w.alpha()));
    }
    const auto out = transfer_forces(uniform, std::vector<Vec3>{p}, w);
    CHECK((out[0] - sum * F).norm() < 1e-14);
  }
}

TEST_CASE("transfer properties") {
  std::mt19937 rng(17);
  const SpacetimeWindow w = grid3();
  std::uniform_real_distribution<double> u(-0.1, 0.3);
  std::vector<Vec3> x(40);
  for (auto& p : x) p = Vec3(u(rng), u(rng), 0.0);

  SUBCASE("linearity") {
    const auto A = random_slab(w, rng);
    const auto B = random_slab(w, rng);
    const double a = 1.7, b = -0.4;
    std::vector<double> C(A.size());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = a * A[i] + b * B[i];
    const auto fa = transfer_forces(A, x, w);
    const auto fb = transfer_forces(B, x, w);
    const auto fc = transfer_forces(C, x, w);
    for (std::size_t p = 0; p < x.size(); ++p) CHECK((fc[p] - (a * fa[p] + b * fb[p])).norm() < 1e-13);
  }

  SUBCASE("compact influence") {
    const auto A = random_slab(w, rng);
    const std::vector<Vec3> far{Vec3(0.2 + w.cutoff() + 1e-9, 0.1, 0), Vec3(-w.cutoff() - 1e-3, -w.cutoff(), 0)};
    for (const auto& f : transfer_forces(A, far, w)) CHECK(f == Vec3::Zero());
  }

  SUBCASE("translation equivariance") {
    const Vec3 shift(0.37, -0.21, 0.0);
    const SpacetimeWindow moved = grid3(shift);
    std::vector<Vec3> y = x;
    for (auto& p : y) p += shift;
    const auto A = random_slab(w, rng);
    const auto f = transfer_forces(A, x, w);
    const auto g = transfer_forces(A, y, moved);
    for (std::size_t p = 0; p < x.size(); ++p) CHECK((f[p] - g[p]).norm() < 1e-12);
  }

  SUBCASE("adjoint is the transpose") {
    const auto A = random_slab(w, rng);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec3> bar(x.size());
    for (auto& b : bar) b = Vec3(n(rng), n(rng), 0.0);
    const auto f = transfer_forces(A, x, w);
    double lhs = 0.0;
    for (std::size_t p = 0; p < x.size(); ++p) lhs += f[p].dot(bar[p]);
    std::vector<double> slab_bar(A.size(), 0.0);
    transfer_forces_adjoint(A, x, w, bar, slab_bar);
    double rhs = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) rhs += A[i] * slab_bar[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }

  SUBCASE("shape mismatch") {
    std::vector<double> bad(5, 0.0);
    CHECK_THROWS_AS(transfer_forces(bad, x, w), ShapeError);
  }
}

TEST_CASE("density projection of a single particle") {
  const SpacetimeWindow w = grid3();
  const Vec3 p(0.1, 0.12, 0.0);
  const double m = 0.25;
  const auto rho = project_density(std::vector<Vec3>{p}, m, w);
  for (std::size_t g = 0; g < w.node_count(); ++g) {
    const double d = (p - w.node_position(g)).norm();
    const double expected = d <= w.cutoff() ? m * std::exp(-d * d / (2 * w.alpha() * w.alpha())) : 0.0;
    CHECK(rho[g] == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("classification") {
  const SpacetimeWindow w = grid3();
  const Aabb box = w.box();
  CHECK(box.hi.x() == doctest::Approx(0.2));

  const std::vector<Vec3> x{Vec3(0.1, 0.1, 0), Vec3(0.2 + w.buffer / 2, 0.1, 0), Vec3(0.5, 0.5, 0)};
  const auto c = classify(w, x);
  CHECK(c.interior == std::vector<ParticleId>{0});
  CHECK(c.buffer == std::vector<ParticleId>{1});
  CHECK(c.exterior == std::vector<ParticleId>{2});

  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(-0.2, 0.4);
  std::vector<Vec3> many(500);
  for (auto& p : many) p = Vec3(u(rng), u(rng), 0.0);
  const auto part = classify(w, many);
  CHECK(part.size() == many.size());
  std::vector<int> seen(many.size(), 0);
  for (auto i : part.interior) {
    ++seen[i];
    CHECK(box.contains(many[i], 2));
  }
  for (auto i : part.buffer) {
    ++seen[i];
    CHECK(!box.contains(many[i], 2));
    CHECK(w.buffer_box().contains(many[i], 2));
  }
  for (auto i : part.exterior) {
    ++seen[i];
    CHECK(!w.buffer_box().contains(many[i], 2));
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("backward trace") {
  SpacetimeWindow w = grid3();
  const std::vector<ParticleId> edited{0};

  SUBCASE("stationary particle hits the cap") {
    const auto traj = stationary({Vec3(0.1, 0.1, 0)}, 101);
    CHECK(backward_trace_window(traj, w, edited, 100, 30) == 70);
  }

  SUBCASE("particle that entered at step 92") {
    auto traj = stationary({Vec3(0.1, 0.1, 0)}, 101);
    for (int t = 0; t < 92; ++t) traj[t].x[0] = Vec3(0.5, 0.1, 0);
    CHECK(backward_trace_window(traj, w, edited, 100, 30) == 92);
  }

  SUBCASE("linear trajectory matches a step-by-step walk") {
    sim::Trajectory traj(101);
    for (int t = 0; t <= 100; ++t) {
      traj[t].x = {Vec3(-0.3 + 0.004 * t, 0.05 + 0.001 * t, 0)};
      traj[t].v = {Vec3::Zero()};
    }
    int expected = 100;
    while (expected > 70 && w.box().contains(traj[expected - 1].x[0], 2)) --expected;
    CHECK(backward_trace_window(traj, w, edited, 100, 30) == expected);
    CHECK(expected > 70);
  }

  SUBCASE("edited particle outside the window") {
    const auto traj = stationary({Vec3(0.9, 0.9, 0)}, 101);
    CHECK_THROWS_AS(backward_trace_window(traj, w, edited, 100, 30), ValidationError);
  }
}
