#include <cmath>
#include <limits>

#include "doctest.h"
#include "wos/potentials.hpp"

using namespace wos;

namespace {

DiscreteMeasure random_measure(SeededStream& s, int d, int atoms, double lo, double hi) {
  DiscreteMeasure mu(d);
  for (int i = 0; i < atoms; ++i) mu.add(sample_unit_direction(s, d) * s.uniform(lo, hi), s.uniform(0.01, 1.0));
  return mu;
}

DiscreteMeasure certified(const DiscreteMeasure& mu, double alpha, double floor) {
  const double c = class_M_certificate(mu, alpha, floor);
  return c > 1.0 ? mu.scaled(1.0 / c) : mu;
}

}  // namespace

TEST_CASE("measure bookkeeping") {
  DiscreteMeasure mu(2);
  mu.add(Point{1.0, 0.0}, 0.25);
  mu.add(Point{0.0, 1.5}, 0.5);
  CHECK(mu.total_mass() == doctest::Approx(0.75));
  CHECK(mu.scaled(2.0).total_mass() == doctest::Approx(1.5));
  CHECK(mu.min_spacing() == doctest::Approx(std::hypot(1.0, 1.5)));
  CHECK_THROWS_AS(mu.add(Point{0.0, 0.0}, -1.0), ConfigError);
  CHECK_THROWS_AS(mu.add(Point{0.0, 0.0, 0.0}, 1.0), ConfigError);
  SeededStream s(1, 0);
  const auto big = random_measure(s, 3, 500, 1.0, 2.0);
  double sum = 0.0;
  for (const auto& a : big.atoms()) sum += a.weight;
  CHECK(std::abs(big.total_mass() - sum) <= 1e-12 * sum);
}

TEST_CASE("Riesz potential of a single atom") {
  DiscreteMeasure mu(3);
  mu.add(Point{0.0, 0.0, 0.5}, 1.0);
  const Point o{0.0, 0.0, 0.0};
  CHECK(riesz_potential(mu, o, 1.0, 3) == doctest::Approx(1.0 / (2.0 * 0.25)));
  CHECK(riesz_potential(mu, o, 2.0, 3) == doctest::Approx(2.0));
  CHECK(riesz_potential(mu, o, 2.5, 3) == doctest::Approx(1.0 / (0.5 * std::sqrt(0.5))));
  DiscreteMeasure unit(2);
  unit.add(Point{1.0, 0.0}, 1.0);
  CHECK(riesz_potential(unit, Point{0.0, 0.0}, 2.0, 2) == 0.0);
  CHECK(riesz_potential(unit, Point{1.0, 0.0}, 1.0, 2) == std::numeric_limits<double>::infinity());
  CHECK(riesz_potential(DiscreteMeasure(2), Point{0.0, 0.0}, 1.0, 2) == 0.0);
  CHECK_THROWS_AS(riesz_potential(unit, Point{0.0, 0.0}, 0.0, 2), ConfigError);
  CHECK_THROWS_AS(riesz_potential(unit, Point{0.0, 0.0}, 2.5, 2), ConfigError);
}

TEST_CASE("kernel ordering and the alpha -> d limit") {
  SeededStream s(2, 0);
  const auto mu = random_measure(s, 3, 40, 0.2, 0.9);
  const Point o{0.0, 0.0, 0.0};
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha = 0.25; alpha < 3.0; alpha += 0.25) {
    const double scaled = (3.0 - alpha) * riesz_potential(mu, o, alpha, 3);
    CHECK(scaled < prev);
    prev = scaled;
  }
  const double delta = 1e-6;
  const double gap = 3.0 - (3.0 - delta);
  const double near = riesz_potential(mu, o, 3.0 - delta, 3);
  const double at = riesz_potential(mu, o, 3.0, 3);
  CHECK(near - mu.total_mass() / gap == doctest::Approx(at).epsilon(1e-4));
}

TEST_CASE("potential equals the integral of the mass profile") {
  SeededStream s(3, 0);
  for (int trial = 0; trial < 20; ++trial) {
    for (auto [d, alpha] : {std::pair{3, 2.0}, std::pair{2, 1.0}, std::pair{3, 0.7}, std::pair{2, 2.0}, std::pair{3, 3.0}}) {
      const auto mu = random_measure(s, d, 50, 0.05, 2.0);
      Point y(d);
      y[0] = s.uniform(-0.1, 0.1);
      const double direct = riesz_potential(mu, y, alpha, d);
      const double profile = riesz_potential_from_profile(mu, y, alpha, d);
      double scale = 0.0;
      for (const auto& a : mu.atoms()) {
        const double r = distance(a.point, y);
        scale += a.weight * (alpha == d ? std::abs(std::log(r)) : std::pow(r, alpha - d) / (d - alpha));
      }
      CHECK(std::abs(direct - profile) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("closed-ball mass") {
  DiscreteMeasure mu(2);
  mu.add(Point{1.0, 0.0}, 0.5);
  mu.add(Point{0.0, 2.0}, 0.25);
  const Point o{0.0, 0.0};
  CHECK(ball_mass(mu, o, 0.0) == 0.0);
  CHECK(ball_mass(mu, o, 1.0) == 0.5);
  CHECK(ball_mass(mu, o, 10.0) == 0.75);
  CHECK(ball_mass(mu, Point{1.0, 0.0}, 0.0) == 0.5);
  CHECK_THROWS_AS(ball_mass(mu, o, -1.0), ConfigError);
  SeededStream s(4, 0);
  const auto big = random_measure(s, 3, 200, 0.0, 2.0);
  for (int i = 0; i < 500; ++i) {
    const Point c = sample_unit_direction(s, 3) * s.uniform(0.0, 2.0);
    const double r = s.uniform(0.0, 2.0);
    double brute = 0.0;
    for (const auto& a : big.atoms())
      if (distance(a.point, c) <= r) brute += a.weight;
    CHECK(ball_mass(big, c, r) == doctest::Approx(brute));
  }
}

TEST_CASE("class M for single atoms") {
  auto ball = ball_domain(2, 1.0);
  DiscreteMeasure one(2);
  one.add(Point{1.5, 0.0}, 0.01);
  ClassMOptions strict;
  strict.resolution_floor = 0.0;
  const auto r0 = verify_class_M(one, *ball, 1.0, 100, SeededStream(0, 0), strict);
  CHECK(r0.max_violation_ratio == std::numeric_limits<double>::infinity());
  CHECK_FALSE(r0.in_class_M());
  ClassMOptions floored;
  floored.resolution_floor = 0.01;
  CHECK(verify_class_M(one, *ball, 1.0, 100, SeededStream(0, 0), floored).in_class_M());
  floored.resolution_floor = 0.009;
  CHECK_FALSE(verify_class_M(one, *ball, 1.0, 100, SeededStream(0, 0), floored).in_class_M());

  DiscreteMeasure inside(2);
  inside.add(Point{0.5, 0.0}, 1e-6);
  CHECK(verify_class_M(inside, *ball, 1.0, 10, SeededStream(0, 0)).support_in_domain_count == 1);
  DiscreteMeasure far(2);
  far.add(Point{3.0, 0.0}, 1e-6);
  CHECK(verify_class_M(far, *ball, 1.0, 10, SeededStream(0, 0)).support_outside_ball2_count == 1);
  const auto empty = verify_class_M(DiscreteMeasure(2), *ball, 1.0, 10, SeededStream(0, 0));
  CHECK(empty.vacuous);
  CHECK(empty.in_class_M());
}

TEST_CASE("certificate bounds every sampled ball") {
  SeededStream s(5, 0);
  auto ball = ball_domain(2, 1.0);
  for (int m = 0; m < 10; ++m) {
    const double alpha = s.uniform(0.5, 1.9);
    const double floor = 0.01;
    const auto mu = certified(random_measure(s, 2, 40, 1.0 + 1e-9, 2.0 - 1e-9), alpha, floor);
    CHECK(class_M_certificate(mu, alpha, floor) <= 1.0 + 1e-12);
    ClassMOptions o;
    o.resolution_floor = floor;
    CHECK(verify_class_M(mu, *ball, alpha, 2000, SeededStream(5, 100 + m), o).in_class_M());
  }
  CHECK_THROWS_AS(class_M_certificate(DiscreteMeasure(2), 1.0, 0.0), ConfigError);
}

TEST_CASE("amalgamation factors and annuli") {
  CHECK(amalgamation_annulus(8.5, 1.0) == 4);
  CHECK(amalgamation_annulus(100.0, 1.0) == 7);
  CHECK(amalgamation_annulus(1.5, 1.0) == 1);
  CHECK(amalgamation_factor(4, 1.0, 2) == 0.0);
  CHECK(amalgamation_factor(7, 1.0, 2) == doctest::Approx(0.875));
  CHECK(amalgamation_factor(2, 1.0, 2) == 0.0);
  CHECK(amalgamation_factor(3, 1.0, 2) == 0.0);

  const Point y{0.0, 0.0};
  const double dy = 0.01;
  DiscreteMeasure mu(2);
  mu.add(Point{0.015, 0.0}, 1.0);   // k = 1, replaced by mu_x
  mu.add(Point{0.05, 0.0}, 1.0);    // k = 3, dropped
  mu.add(Point{0.085, 0.0}, 1.0);   // k = 4, factor 0
  mu.add(Point{1.0, 0.0}, 1.0);     // k = 7
  DiscreteMeasure mux(2);
  mux.add(Point{0.0, 0.012}, 0.3);
  mux.add(Point{0.5, 0.0}, 0.7);    // outside B(y, 2 d_y), discarded
  const auto nu = amalgamate(mu, mux, y, dy, 1.0, 2);
  CHECK(ball_mass(nu, y, 2.0 * dy) == doctest::Approx(ball_mass(mux, y, 2.0 * dy)));
  CHECK(ball_mass(nu, y, 0.09) == doctest::Approx(0.3));
  CHECK(nu.total_mass() == doctest::Approx(0.3 + 0.875));
  CHECK_THROWS_AS(amalgamate(mu, mux, y, -1.0, 1.0, 2), ConfigError);
}

TEST_CASE("amalgamation preserves class M") {
  SeededStream s(6, 0);
  auto ball = ball_domain(2, 1.0);
  const double floor = std::ldexp(1.0, -7);
  for (int m = 0; m < 5; ++m) {
    const double alpha = s.uniform(0.5, 1.9);
    const auto mu = certified(random_measure(s, 2, 40, 1.0 + 1e-9, 2.0 - 1e-9), alpha, floor);
    const Point dir = sample_unit_direction(s, 2);
    const Point y = dir * s.uniform(0.5, 0.97);
    const auto mux = certified(build_barrier_measure(ball, dir, alpha, 6).measure, alpha, floor);
    const auto nu = amalgamate(mu, mux, y, ball->distance(y), alpha, 2);
    ClassMOptions o;
    o.resolution_floor = floor;
    const auto rep = verify_class_M(nu, *ball, alpha, 1000, SeededStream(6, 10 + m), o);
    CHECK(rep.in_class_M());
  }
}

TEST_CASE("dyadic grid puts x at (1/3, ..., 1/3)") {
  const Point x{0.3, -0.7, 0.2};
  const DyadicGrid grid(x);
  for (int k = 1; k <= 10; ++k) {
    const auto c = grid.containing(x, k);
    const Point lo = grid.lower(c);
    const double side = DyadicGrid::side(k);
    for (int i = 0; i < 3; ++i) {
      const double gap = std::min(x[i] - lo[i], lo[i] + side - x[i]);
      CHECK(gap == doctest::Approx(side / 3.0));
    }
    CHECK(grid.contains(c, x));
    if (k > 1) CHECK(grid.parent(c) == grid.containing(x, k - 1));
  }
}

TEST_CASE("barrier measures conserve mass and respect the cube bounds") {
  struct Case {
    DomainPtr domain;
    Point x;
    double alpha;
    int depth;
  };
  auto pd = build_punctured_disk({std::exp(150.0), 4.0});
  auto cyl = build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating});
  const auto anchors = static_cast<const CantorCylinderDomain&>(*cyl).anchor_points();
  const std::vector<Case> cases = {
      {ball_domain(2, 1.0), Point{1.0, 0.0}, 1.0, 7},
      {ball_domain(2, 1.0), Point{0.0, -1.0}, 2.0, 6},
      {ball_domain(3, 1.0), Point{0.0, 1.0, 0.0}, 2.5, 5},
      {pd, static_cast<const PuncturedDiskDomain&>(*pd).removed_points().back(), 2.0, 7},
      {cyl, anchors.front(), 3.0, 5},
  };
  for (const auto& c : cases) {
    const int d = c.domain->dim();
    const auto b = build_barrier_measure(c.domain, c.x, c.alpha, c.depth);
    REQUIRE_FALSE(b.cubes.empty());
    CHECK(b.cubes.front().cube.level == 1);
    CHECK(b.measure.total_mass() == doctest::Approx(b.cubes.front().mass).epsilon(1e-12));
    std::vector<double> child_mass(b.cubes.size(), 0.0);
    std::vector<bool> has_child(b.cubes.size(), false);
    for (const auto& cube : b.cubes) {
      if (cube.parent >= 0) {
        child_mass[static_cast<std::size_t>(cube.parent)] += cube.mass;
        has_child[static_cast<std::size_t>(cube.parent)] = true;
      }
    }
    const double thickness = analytic_thickness(*c.domain, c.alpha);
    for (std::size_t i = 0; i < b.cubes.size(); ++i) {
      const auto& cube = b.cubes[i];
      if (has_child[i]) CHECK(child_mass[i] == doctest::Approx(cube.mass).epsilon(1e-12));
      CHECK(cube.mass <= barrier_upper_bound(cube.cube.level, c.alpha, d) * (1.0 + 1e-12));
      if (cube.on_chain)
        CHECK(cube.mass >= barrier_lower_bound(cube.cube.level, c.alpha, d, thickness) * (1.0 - 1e-12));
    }
    for (const auto& a : b.measure.atoms()) CHECK_FALSE(c.domain->contains(a.point));
    if (c.alpha == d) CHECK(b.measure.total_mass() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(build_barrier_measure(ball_domain(2, 1.0), Point{0.0, 0.0}, 1.0, 4), ConfigError);
}

TEST_CASE("barrier class-M ratio stays below the covering constant") {
  auto cyl = build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating});
  const auto anchors = static_cast<const CantorCylinderDomain&>(*cyl).anchor_points();
  const int depth = 6;
  const auto b = build_barrier_measure(cyl, anchors.front(), 3.0, depth);
  ClassMOptions o;
  o.resolution_floor = DyadicGrid::side(depth) / 2.0;
  const auto rep = verify_class_M(b.measure, *cyl, 3.0, 1000, SeededStream(7, 0), o);
  CHECK(rep.support_in_domain_count == 0);
  CHECK(rep.max_violation_ratio <= std::pow(3.0, 3) * std::pow(3.0, 1.5));

  auto ball = ball_domain(2, 1.0);
  const auto bb = build_barrier_measure(ball, Point{0.0, 1.0}, 1.5, 8);
  o.resolution_floor = DyadicGrid::side(8) / 2.0;
  const auto rb = verify_class_M(bb.measure, *ball, 1.5, 1000, SeededStream(7, 1), o);
  CHECK(rb.max_violation_ratio <= 9.0 * 2.0);
}

TEST_CASE("greedy content dominates the mass of certified measures") {
  const std::vector<std::pair<DomainPtr, Point>> cases = {
      {ball_domain(2, 1.0), Point{1.0, 0.0}},
      {build_punctured_disk({std::exp(150.0), 4.0}), Point{0.0, 0.0}},
  };
  for (auto [dom, x] : cases) {
    if (dom->has_removed_set()) x = static_cast<const PuncturedDiskDomain&>(*dom).removed_points().front();
    for (double alpha : {1.0, 1.5}) {
      const int depth = 6;
      const double floor = DyadicGrid::side(depth) / 2.0;
      const auto exact = build_barrier_measure(dom, x, alpha, depth);
      const auto greedy = build_barrier_measure(dom, x, alpha, depth, ContentMethod::Greedy);
      CHECK_FALSE(greedy.exact_content);
      const auto mu = certified(exact.measure, alpha, floor);
      CHECK(greedy.cubes.front().content >= mu.total_mass());
    }
  }
}

TEST_CASE("finite-difference Laplacian") {
  DiscreteMeasure newton(3);
  newton.add(Point{1.5, 0.0, 0.0}, 1.0);
  newton.add(Point{0.0, -1.2, 0.4}, 0.5);
  const Point y{0.1, 0.1, 0.0};
  const auto a = laplacian_identity_check(newton, y, 2.0, 3, 0.02);
  const auto b = laplacian_identity_check(newton, y, 2.0, 3, 0.01);
  CHECK(a.rhs == 0.0);
  CHECK(std::abs(b.fd_laplacian) < std::abs(a.fd_laplacian));
  CHECK(std::abs(a.fd_laplacian) / std::abs(b.fd_laplacian) == doctest::Approx(4.0).epsilon(0.1));

  DiscreteMeasure single(3);
  single.add(Point{2.0, 0.0, 0.0}, 1.0);
  const Point o{0.0, 0.0, 0.0};
  // leading stencil error is 5 (h/r)^2 along the atom axis
  CHECK(laplacian_identity_check(single, o, 1.0, 3, 0.02).rel_err <= 1e-3);
  CHECK(laplacian_identity_check(single, o, 1.0, 3, 2.0 / 300.0).rel_err <= 1e-4);
  const auto c1 = laplacian_identity_check(single, o, 1.0, 3, 0.04);
  const auto c2 = laplacian_identity_check(single, o, 1.0, 3, 0.02);
  const double ratio = std::abs(c1.fd_laplacian - c1.rhs) / std::abs(c2.fd_laplacian - c2.rhs);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
  CHECK_THROWS_AS(laplacian_identity_check(single, Point{1.9, 0.0, 0.0}, 1.0, 3, 0.02), ConfigError);
  CHECK_THROWS_AS(laplacian_identity_check(single, o, 3.0, 3, 0.02), ConfigError);
}

TEST_CASE("energy bounds") {
  auto ball = ball_domain(2, 1.0);
  SeededStream s(8, 0);
  const Point y{0.9, 0.0};
  const double floor = 0.005;
  const auto mu = certified(random_measure(s, 2, 80, 1.0 + 1e-9, 2.0 - 1e-9), 2.0, floor);
  ClassMOptions o;
  o.resolution_floor = floor;
  const auto rep = verify_class_M(mu, *ball, 2.0, 500, SeededStream(8, 1), o);
  REQUIRE(rep.in_class_M());
  const auto e = energy_bound_check(mu, *ball, y, 2.0, rep);
  CHECK(e.ok);
  CHECK(e.value <= std::log(20.0) + e.correction);

  const auto none = verify_class_M(DiscreteMeasure(2), *ball, 2.0, 10, SeededStream(8, 2), o);
  const auto e0 = energy_bound_check(DiscreteMeasure(2), *ball, y, 2.0, none);
  CHECK(e0.value == 0.0);
  CHECK(e0.ok);

  DiscreteMeasure bad(2);
  bad.add(Point{1.2, 0.0}, 10.0);
  const auto bad_rep = verify_class_M(bad, *ball, 2.0, 10, SeededStream(8, 3), o);
  CHECK_THROWS_AS(energy_bound_check(bad, *ball, y, 2.0, bad_rep), ConfigError);

  auto cyl = build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating});
  const auto anchors = static_cast<const CantorCylinderDomain&>(*cyl).anchor_points();
  const Point x = anchors.front();
  const int depth = 8;
  const double cyl_floor = DyadicGrid::side(depth) / 2.0;
  const auto barrier = certified(build_barrier_measure(cyl, x, 3.0, depth).measure, 3.0, cyl_floor);
  ClassMOptions co;
  co.resolution_floor = cyl_floor;
  const auto crep = verify_class_M(barrier, *cyl, 3.0, 500, SeededStream(8, 4), co);
  REQUIRE(crep.in_class_M());
  double k_min = std::numeric_limits<double>::infinity();
  int tested = 0;
  for (int corner = 0; corner < 8; ++corner) {
    Point yy = x;
    for (int i = 0; i < 3; ++i) yy[i] += ((corner >> i) & 1 ? 0.5 : -0.5) * 0.04;
    if (!cyl->contains(yy) || cyl->distance(yy) < 10.0 * cyl_floor) continue;
    ++tested;
    const auto ce = energy_bound_check(barrier, *cyl, yy, 3.0, crep);
    CHECK(ce.ok);
    k_min = std::min(k_min, ce.value * cyl->distance(yy));
  }
  CHECK(tested > 0);
  CHECK(k_min > 0.0);
}

TEST_CASE("Newton potential is a martingale along walks") {
  auto ball = ball_domain(3, 1.0);
  SeededStream s(9, 0);
  auto mu = std::make_shared<const DiscreteMeasure>(random_measure(s, 3, 30, 1.2, 2.0));
  WosConfig c;
  c.epsilon = 1e-3;
  DriftOptions o;
  o.seed = 9;
  const auto r = drift_probe(*ball, [&](const Point&) { return mu; }, c, Point::zero(3), 1, 2000, 3.0, o);
  CHECK(r.newton);
  CHECK(r.samples > 10000);
  CHECK(std::abs(r.mean_increment) <= 3.0 * r.se_increment);
}

TEST_CASE("barrier selector caches per cell") {
  auto pd = build_punctured_disk({1024.0, 0.5});
  BarrierSelector sel(pd, 2.0, 5);
  const auto a = sel(Point{0.3, 0.01});
  const auto b = sel(Point{0.3 + 1e-9, 0.01});
  CHECK(a == b);
  CHECK(sel.cached() >= 1);
  auto ball = ball_domain(2, 1.0);
  BarrierSelector bs(ball, 1.0, 5);
  const auto m = bs(Point{0.0, 0.5});
  for (const auto& at : m->atoms()) CHECK_FALSE(ball->contains(at.point));
}
