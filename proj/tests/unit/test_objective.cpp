#include "fluidctl/control/transfer.hpp"
#include "fluidctl/objective/objective.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace fluidctl;
using namespace fluidctl::objective;
using control::ForceField;
using control::SpacetimeWindow;

namespace {

sim::ParticleState state_of(std::vector<Vec3> x) {
  sim::ParticleState s;
  s.v.assign(x.size(), Vec3::Zero());
  s.x = std::move(x);
  return s;
}

SpacetimeWindow small_window(int t_start, int t_end) {
  SpacetimeWindow w;
  w.dim = 2;
  w.origin = Vec3(0.2, 0.2, 0);
  w.node_counts = {3, 3, 1};
  w.spacing = 0.1;
  w.buffer = 0.1;
  w.t_start = t_start;
  w.t_end = t_end;
  return w;
}

Vec3 random_vec(std::mt19937& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), 0.0);
}

// Independent evaluation of every term on plain loops.
double reference_total(const sim::Trajectory& traj, const sim::Trajectory& baseline, const ForceField& f,
                       const SpacetimeWindow& w, const EditSpec& spec, const ObjectiveWeights& k) {
  std::set<ParticleId> controlled;
  for (const auto& t : spec.targets) controlled.insert(t.particle);
  double edit = 0.0;
  for (const auto& t : spec.targets) {
    const Vec3 d = traj[t.frame - w.t_start].x[t.particle] - t.position;
    edit += t.weight * (d.x() * d.x() + d.y() * d.y());
  }
  edit *= k.k_e / controlled.size();

  const int T = w.steps();
  const int nx = w.node_counts[0], ny = w.node_counts[1];
  const double ng = nx * ny;
  double mag = 0.0, tmp = 0.0, spa = 0.0;
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t g = w.flat_index(i, j, 0);
        for (int c = 0; c < 2; ++c) {
          const double v = f.at(t, g, c);
          mag += v * v;
          if (t + 1 < T) {
            const double d = f.at(t + 1, g, c) - v;
            tmp += d * d;
          }
          const int i2 = i + 1 < nx ? i + 1 : i - 1;
          const int j2 = j + 1 < ny ? j + 1 : j - 1;
          const double gx = (f.at(t, w.flat_index(i2, j, 0), c) - v) / w.spacing;
          const double gy = (f.at(t, w.flat_index(i, j2, 0), c) - v) / w.spacing;
          spa += gx * gx + gy * gy;
        }
      }
    }
  }
  mag *= k.k_f / ng;
  tmp *= k.k_t / (ng * (T - 1));
  spa *= k.k_s / ng;

  const Aabb inner = w.box();
  const Aabb outer = w.buffer_box();
  auto in_buffer = [&](const Vec3& p) { return outer.contains(p, 2) && !inner.contains(p, 2); };
  std::set<std::size_t> ever;
  for (int t = w.t_start; t <= w.t_end; ++t) {
    for (std::size_t p = 0; p < baseline[t].size(); ++p) {
      if (in_buffer(baseline[t].x[p])) ever.insert(p);
    }
  }
  double buf = 0.0;
  for (int t = w.t_start; t <= w.t_end; ++t) {
    for (std::size_t p = 0; p < baseline[t].size(); ++p) {
      if (!in_buffer(baseline[t].x[p])) continue;
      buf += (traj[t - w.t_start].x[p] - baseline[t].x[p]).squaredNorm();
    }
  }
  buf *= ever.empty() ? 0.0 : k.k_b / ever.size();
  return edit + mag + tmp + spa + buf;
}

}  // namespace

TEST_CASE("particle editing loss") {
  sim::Trajectory traj{state_of({Vec3(0, 0, 0)}), state_of({Vec3(1, 1, 0)})};
  EditSpec spec;
  spec.targets = {{1, 0, Vec3(4, 5, 0), 1.0}};
  ObjectiveWeights k;
  k.k_e = 1.0;
  CHECK(particle_edit_loss(traj, 0, spec, k) == 25.0);

  spec.targets[0].position = Vec3(1, 1, 0);
  CHECK(particle_edit_loss(traj, 0, spec, k) == 0.0);

  spec.targets[0].particle = 3;
  CHECK_THROWS_AS(particle_edit_loss(traj, 0, spec, k), ValidationError);

  SUBCASE("random targets match a reference loop") {
    std::mt19937 rng(4);
    sim::Trajectory t4;
    for (int f = 0; f < 4; ++f) {
      std::vector<Vec3> x(5);
      for (auto& p : x) p = random_vec(rng, 1.0);
      t4.push_back(state_of(x));
    }
    EditSpec s;
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int frame : {11, 12, 13}) {
      for (ParticleId p = 0; p < 5; ++p) s.targets.push_back({frame, p, random_vec(rng, 1.0), u(rng)});
    }
    k.k_e = 0.7;
    double ref = 0.0;
    for (const auto& t : s.targets) ref += t.weight * (t4[t.frame - 10].x[t.particle] - t.position).squaredNorm();
    ref *= 0.7 / 5.0;
    CHECK(particle_edit_loss(t4, 10, s, k) == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("count normalization") {
  std::mt19937 rng(8);
  std::vector<Vec3> x(6);
  for (auto& p : x) p = random_vec(rng, 1.0);
  std::vector<Vec3> doubled = x;
  doubled.insert(doubled.end(), x.begin(), x.end());
  sim::Trajectory a{state_of(x), state_of(x)};
  sim::Trajectory b{state_of(doubled), state_of(doubled)};
  EditSpec sa, sb;
  for (ParticleId p = 0; p < 6; ++p) {
    const ParticleTarget t{1, p, random_vec(rng, 1.0), 1.5};
    sa.targets.push_back(t);
    sb.targets.push_back(t);
    sb.targets.push_back({1, p + 6, t.position, t.weight});
  }
  ObjectiveWeights k;
  CHECK(particle_edit_loss(b, 0, sb, k) == doctest::Approx(particle_edit_loss(a, 0, sa, k)).epsilon(1e-14));
}

TEST_CASE("grid editing loss") {
  SpacetimeWindow w = small_window(0, 1);
  const double m = 0.3;
  ObjectiveWeights k;
  k.k_e = 2.0;
  EditSpec spec;
  spec.mode = EditMode::grid_density;

  SUBCASE("empty window against zero target") {
    sim::Trajectory traj{state_of({Vec3(5, 5, 0)}), state_of({Vec3(5, 5, 0)})};
    spec.grid = {{1, std::vector<double>(w.node_count(), 0.0)}};
    CHECK(grid_edit_loss(traj, w, spec, m, k) == 0.0);
  }

  SUBCASE("single particle at a node") {
    const Vec3 node = w.node_position(4);
    sim::Trajectory traj{state_of({node}), state_of({node})};
    spec.grid = {{1, std::vector<double>(w.node_count(), 0.0)}};
    double sum = 0.0;
    for (std::size_t g = 0; g < w.node_count(); ++g) {
      const double d = (node - w.node_position(g)).norm();
      const double rho = d <= w.cutoff() ? m * std::exp(-d * d / (2 * w.alpha() * w.alpha())) : 0.0;
      sum += rho * rho;
    }
    CHECK(grid_edit_loss(traj, w, spec, m, k) == doctest::Approx(2.0 / 9.0 * sum).epsilon(1e-14));
  }

  SUBCASE("target equal to the projection") {
    std::mt19937 rng(2);
    std::vector<Vec3> x(20);
    for (auto& p : x) p = Vec3(0.3, 0.3, 0) + random_vec(rng, 0.05);
    sim::Trajectory traj{state_of(x), state_of(x)};
    spec.grid = {{1, control::project_density(x, m, w)}};
    CHECK(grid_edit_loss(traj, w, spec, m, k) == 0.0);
  }

  SUBCASE("shape mismatch") {
    sim::Trajectory traj{state_of({Vec3(5, 5, 0)}), state_of({Vec3(5, 5, 0)})};
    spec.grid = {{1, std::vector<double>(3, 0.0)}};
    CHECK_THROWS_AS(grid_edit_loss(traj, w, spec, m, k), ShapeError);
  }
}

TEST_CASE("force regularizers") {
  SpacetimeWindow w = small_window(0, 3);
  w.node_counts = {2, 2, 1};
  ObjectiveWeights k;
  k.k_f = 0.5;
  k.k_t = 0.25;
  k.k_s = 0.125;

  ForceField f(w);
  auto zero = force_reg_loss(f, w, k);
  CHECK(zero.force() == 0.0);

  SUBCASE("constant in time") {
    std::mt19937 rng(1);
    for (std::size_t g = 0; g < 4; ++g) {
      const Vec3 v = random_vec(rng, 1.0);
      for (int t = 0; t < 3; ++t) {
        f.at(t, g, 0) = v.x();
        f.at(t, g, 1) = v.y();
      }
    }
    CHECK(force_reg_loss(f, w, k).temporal == 0.0);
  }

  SUBCASE("uniform in space, varying in time") {
    const double fx[3] = {1.0, 2.0, 4.0};
    const double fy[3] = {0.0, -1.0, 1.0};
    for (int t = 0; t < 3; ++t) {
      for (std::size_t g = 0; g < 4; ++g) {
        f.at(t, g, 0) = fx[t];
        f.at(t, g, 1) = fy[t];
      }
    }
    const auto terms = force_reg_loss(f, w, k);
    CHECK(terms.spatial == 0.0);
    // Per node: sum |f|^2 = 1 + 5 + 17 = 23; sum |df|^2 = (1 + 1) + (4 + 4) = 10.
    CHECK(terms.magnitude == doctest::Approx(0.5 / 4.0 * 4 * 23));
    CHECK(terms.temporal == doctest::Approx(0.25 / (4.0 * 2) * 4 * 10));
    CHECK(terms.force() == doctest::Approx(11.5 + 1.25));
  }

  SUBCASE("single slab disables the temporal term") {
    SpacetimeWindow one = w;
    one.t_end = 1;
    ForceField g(one);
    g.at(0, 0, 0) = 3.0;
    CHECK(force_reg_loss(g, one, k).temporal == 0.0);
  }
}

TEST_CASE("buffer loss") {
  SpacetimeWindow w = small_window(0, 2);
  // Window box [0.2, 0.4]^2, buffer shell 0.1 wide.
  const std::vector<Vec3> x{Vec3(0.3, 0.3, 0), Vec3(0.45, 0.3, 0), Vec3(0.3, 0.15, 0), Vec3(0.9, 0.9, 0)};
  sim::Trajectory base(3, state_of(x));
  const auto classes = control::classify_window(w, base);
  ObjectiveWeights k;
  k.k_b = 3.0;

  bool empty = true;
  CHECK(buffer_loss(base, base, w, classes, k, nullptr, &empty) == 0.0);
  CHECK_FALSE(empty);

  sim::Trajectory moved = base;
  moved[1].x[1] += Vec3(0.0, 0.02, 0.0);
  CHECK(buffer_loss(moved, base, w, classes, k) == doctest::Approx(3.0 / 2.0 * 0.02 * 0.02).epsilon(1e-14));

  moved[1].x[0] += Vec3(0.5, 0.0, 0.0);  // interior particles are not penalized
  moved[2].x[3] += Vec3(0.5, 0.0, 0.0);  // nor exterior ones
  CHECK(buffer_loss(moved, base, w, classes, k) == doctest::Approx(3.0 / 2.0 * 0.02 * 0.02).epsilon(1e-14));

  sim::Trajectory far(3, state_of({Vec3(0.9, 0.9, 0)}));
  const auto none = control::classify_window(w, far);
  CHECK(buffer_loss(far, far, w, none, k, nullptr, &empty) == 0.0);
  CHECK(empty);
}

TEST_CASE("total objective against an independent implementation") {
  std::mt19937 rng(12);
  SpacetimeWindow w = small_window(2, 5);
  std::uniform_real_distribution<double> u(0.05, 0.55);
  sim::Trajectory baseline;
  std::vector<Vec3> x(10);
  for (auto& p : x) p = Vec3(u(rng), u(rng), 0.0);
  for (int t = 0; t <= 6; ++t) {
    for (auto& p : x) p += random_vec(rng, 0.01);
    baseline.push_back(state_of(x));
  }
  sim::Trajectory traj(baseline.begin() + 2, baseline.begin() + 6);
  for (auto& s : traj) {
    for (auto& p : s.x) p += random_vec(rng, 0.005);
  }
  EditSpec spec;
  for (int frame : {4, 5}) {
    for (ParticleId p : {1u, 4u, 7u}) spec.targets.push_back({frame, p, baseline[frame].x[p] + random_vec(rng, 0.02), 1.0});
  }
  ObjectiveWeights k{1.3, 0.01, 0.02, 0.003, 5.0};
  ForceField f(w);
  for (auto& v : f.data()) v = random_vec(rng, 1.0).x();

  const Objective obj(baseline, w, spec, k, 0.1);
  const auto terms = obj.evaluate(traj, f);
  const double ref = reference_total(traj, baseline, f, w, spec, k);
  CHECK(terms.total() == doctest::Approx(ref).epsilon(1e-12));
  CHECK(terms.buffer > 0.0);
  CHECK(terms.spatial > 0.0);

  SUBCASE("additivity") {
    const auto reg = force_reg_loss(f, w, k);
    const double edit = particle_edit_loss(traj, w.t_start, spec, k);
    const double buf = buffer_loss(traj, baseline, w, obj.classes(), k);
    CHECK(terms.total() == doctest::Approx(edit + reg.force() + buf).epsilon(1e-14));
  }

  SUBCASE("nonnegativity and scale behavior") {
    for (double t : {terms.editing, terms.magnitude, terms.temporal, terms.spatial, terms.buffer}) CHECK(t >= 0.0);
    ObjectiveWeights k2 = k;
    k2.k_e *= 2.0;
    const auto doubled = Objective(baseline, w, spec, k2, 0.1).evaluate(traj, f);
    CHECK(doubled.editing == doctest::Approx(2.0 * terms.editing).epsilon(1e-14));
    CHECK(doubled.force() == terms.force());
    CHECK(doubled.buffer == terms.buffer);
  }

  SUBCASE("baseline targets at zero force") {
    EditSpec exact;
    for (ParticleId p : {1u, 4u}) exact.targets.push_back({5, p, baseline[5].x[p], 1.0});
    const Objective zero_obj(baseline, w, exact, k, 0.1);
    const sim::Trajectory same(baseline.begin() + 2, baseline.begin() + 6);
    const auto z = zero_obj.evaluate(same, ForceField(w));
    CHECK(z.total() == 0.0);
  }

  SUBCASE("position and field gradients match finite differences") {
    auto dx = zero_adjoint(traj);
    ForceField df(w);
    obj.evaluate(traj, f, &dx, &df);
    const double e = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t frame = rng() % traj.size();
      const std::size_t p = rng() % 10;
      const int c = static_cast<int>(rng() % 2);
      auto plus = traj, minus = traj;
      plus[frame].x[p][c] += e;
      minus[frame].x[p][c] -= e;
      const double fd = (obj.evaluate(plus, f).total() - obj.evaluate(minus, f).total()) / (2 * e);
      CHECK(dx[frame][p][c] == doctest::Approx(fd).epsilon(1e-6).scale(1e-6));
    }
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t i = rng() % f.size();
      auto plus = f, minus = f;
      plus.data()[i] += e;
      minus.data()[i] -= e;
      const double fd = (obj.evaluate(traj, plus).total() - obj.evaluate(traj, minus).total()) / (2 * e);
      CHECK(df.data()[i] == doctest::Approx(fd).epsilon(1e-6).scale(1e-6));
    }
  }
}

TEST_CASE("pathline compilation") {
  CHECK((sample_arc_length({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 3, 0)}, 0.5) - Vec3(1, 1, 0)).norm() < 1e-15);
  CHECK(sample_arc_length({Vec3(0, 0, 0), Vec3(2, 0, 0)}, 0.0) == Vec3(0, 0, 0));
  CHECK(sample_arc_length({Vec3(0, 0, 0), Vec3(2, 0, 0)}, 1.0) == Vec3(2, 0, 0));

  const auto start = state_of({Vec3(0.1, 0.1, 0), Vec3(0.2, 0.1, 0), Vec3(0.9, 0.9, 0)});
  Pathline path;
  path.particles = {0, 1};
  path.points = {Vec3(0.15, 0.1, 0), Vec3(0.45, 0.5, 0)};
  path.t_begin = 10;
  path.t_end = 25;
  const auto targets = compile_pathline(path, start);
  REQUIRE(targets.size() == 30);
  std::set<int> frames;
  for (const auto& t : targets) {
    frames.insert(t.frame);
    const double s = (t.frame - 10) / 15.0;
    const Vec3 centroid = path.points[0] + s * (path.points[1] - path.points[0]);
    const Vec3 offset = start.x[t.particle] - Vec3(0.15, 0.1, 0);
    CHECK((t.position - (centroid + offset)).norm() < 1e-14);
  }
  CHECK(frames.size() == 15);
  CHECK(*frames.begin() == 11);
  CHECK(*frames.rbegin() == 25);
}

TEST_CASE("edit validation") {
  const SpacetimeWindow w = small_window(10, 20);
  EditSpec spec;
  spec.targets = {{15, 2, Vec3::Zero(), 1.0}};
  CHECK_NOTHROW(validate(spec, w, 3));
  CHECK_THROWS_AS(validate(spec, w, 2), ValidationError);
  spec.targets[0].frame = 25;
  CHECK_THROWS_AS(validate(spec, w, 3), ValidationError);
  spec.targets[0].frame = 15;
  spec.targets[0].weight = -1.0;
  CHECK_THROWS_AS(validate(spec, w, 3), ValidationError);
}
