#include <cmath>
#include <limits>

#include "doctest.h"
#include "wos/geometry.hpp"
#include "wos/rng.hpp"

using namespace wos;

namespace {

Point random_in_box(SeededStream& s, int d, double half) {
  Point p(d);
  for (int i = 0; i < d; ++i) p[i] = s.uniform(-half, half);
  return p;
}

void check_lipschitz(const Domain& dom, std::uint64_t seed, double tol = 1e-9) {
  SeededStream s(seed, 0);
  const double h = dom.bounding_radius();
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Point p = random_in_box(s, dom.dim(), h);
    // half the pairs are close together so local structure is exercised
    Point q = (i % 2 == 0) ? random_in_box(s, dom.dim(), h) : p + random_in_box(s, dom.dim(), 0.05);
    const double gap = std::abs(dom.distance(p) - dom.distance(q)) - distance(p, q);
    worst = std::max(worst, gap);
  }
  CHECK(worst <= tol);
}

void check_witness(const Domain& dom, std::uint64_t seed) {
  SeededStream s(seed, 1);
  for (int i = 0; i < 2000; ++i) {
    const Point p = random_in_box(s, dom.dim(), dom.bounding_radius());
    const double dp = dom.distance(p);
    const auto outer = dom.outer_projection(p);
    CHECK(dp <= distance(p, outer.point) + 1e-12);
    if (dom.has_removed_set()) {
      const auto w = dom.nearest_removed(p);
      CHECK(w.distance == doctest::Approx(distance(p, w.point)).epsilon(1e-12));
      CHECK(dp <= w.distance + 1e-12);
      if (dom.contains(p)) CHECK(dp == doctest::Approx(std::min(outer.distance, w.distance)).epsilon(1e-12));
    }
  }
}

}  // namespace

TEST_CASE("ball distance and containment") {
  auto b2 = ball_domain(2, 1.0);
  CHECK(b2->distance(Point{0.0, 0.0}) == 1.0);
  auto b3 = ball_domain(3, 1.0);
  CHECK(b3->distance(Point{0.5, 0.0, 0.0}) == doctest::Approx(0.5));
  CHECK(b3->contains(Point{0.5, 0.0, 0.0}));
  CHECK_FALSE(b3->contains(Point{1.0, 0.0, 0.0}));
  CHECK(ball_domain(2, 2.0)->distance(Point{1.0, 1.0}) == doctest::Approx(2.0 - std::sqrt(2.0)));
  CHECK_THROWS_AS(ball_domain(0, 1.0), ConfigError);
  CHECK_THROWS_AS(ball_domain(2, 0.0), ConfigError);
  CHECK_THROWS_AS(ball_domain(2, -1.0), ConfigError);
}

TEST_CASE("distance is 1-Lipschitz on every family") {
  check_lipschitz(*ball_domain(2, 1.0), 1);
  check_lipschitz(*ball_domain(3, 1.0), 2);
  check_lipschitz(*build_punctured_disk({1024.0, 0.5}), 3);
  check_lipschitz(*build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating}), 4);
  check_lipschitz(*build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Product}), 5);
  check_lipschitz(*build_cantor_cylinder({2.5, 0.04, 6, 0.0, ShellKind::Separating}), 6);
}

TEST_CASE("boundary witnesses bound the distance") {
  check_witness(*ball_domain(3, 1.0), 7);
  check_witness(*build_punctured_disk({1024.0, 0.5}), 8);
  check_witness(*build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating}), 9);
  check_witness(*build_cantor_cylinder({2.5, 0.04, 5, 0.0, ShellKind::Separating}), 10);
}

TEST_CASE("cantor_lambda") {
  CHECK(cantor_lambda(0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(1.0 - cantor_lambda(0.25) == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(cantor_lambda(1.0 - 1e-9) < 1e-8);
  CHECK(cantor_lambda(1.0 - 1e-9) > 0.0);
  for (double eta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double lambda = cantor_lambda(eta);
    const double back = std::log(2.0) / (std::log(2.0) - std::log(1.0 - lambda));
    CHECK(std::abs(back - eta) <= 1e-12 * eta);
  }
  CHECK_THROWS_AS(cantor_lambda(0.0), ConfigError);
  CHECK_THROWS_AS(cantor_lambda(1.0), ConfigError);
  CHECK_THROWS_AS(cantor_lambda(-0.2), ConfigError);
}

TEST_CASE("truncated Cantor set") {
  const CantorSet c(0.5, 4);
  const auto iv = c.intervals();
  REQUIRE(iv.size() == 16);
  CHECK(iv.front().first == 0.0);
  CHECK(iv.back().second == doctest::Approx(1.0));
  for (const auto& [l, r] : iv) CHECK(r - l == doctest::Approx(c.interval_length()));
  CHECK(c.interval_length() == doctest::Approx(std::pow(0.25, 4)));
  SeededStream s(11, 0);
  for (int i = 0; i < 2000; ++i) {
    const double t = s.uniform(-0.5, 1.5);
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& [l, r] : iv) brute = std::min(brute, t < l ? l - t : (t > r ? t - r : 0.0));
    CHECK(c.distance(t) == doctest::Approx(brute).epsilon(1e-12));
    CHECK(std::abs(t - c.nearest(t)) == doctest::Approx(brute).epsilon(1e-12));
  }
  const CantorSet degenerate(0.0, 1);
  CHECK(degenerate.interval_length() == 0.0);
  CHECK(degenerate.distance(0.3) == doctest::Approx(0.3));
  CHECK(degenerate.intervals().size() == 1);
}

TEST_CASE("punctured disk construction") {
  CHECK_THROWS_AS(build_punctured_disk({std::exp(16.0), 4.0}), ConfigError);
  CHECK_THROWS_AS(build_punctured_disk({std::exp(144.0), 4.0}), ConfigError);
  CHECK_NOTHROW(build_punctured_disk({std::exp(150.0), 4.0}));
  CHECK_THROWS_AS(build_punctured_disk({2.0, 0.5}), ConfigError);

  auto dom = build_punctured_disk({1024.0, 0.5});
  const auto& pd = static_cast<const PuncturedDiskDomain&>(*dom);
  const double g = pd.gamma();
  CHECK(g == doctest::Approx(0.5 / std::sqrt(std::log(1024.0))));
  CHECK(pd.removed_points().size() < 2.0 / (g * g));
  for (const auto& h : pd.removed_points()) {
    CHECK(h.norm2() > 1.0 / 9.0);
    CHECK(h.norm2() < 4.0 / 9.0);
    CHECK(std::abs(h[0] / g - std::round(h[0] / g)) < 1e-9);
    CHECK(std::abs(h[1] / g - std::round(h[1] / g)) < 1e-9);
    CHECK(dom->distance(h) == 0.0);
    CHECK_FALSE(dom->contains(h));
  }
  const double d0 = dom->distance(Point{0.0, 0.0});
  CHECK(d0 <= 1.0);
  CHECK(d0 >= 1.0 / 3.0 - g * std::sqrt(2.0) / 2.0);
  const auto w = nearest_removed_point(*dom, Point{0.0, 0.0});
  CHECK(w.point.norm() > 1.0 / 3.0);
  CHECK(w.point.norm() < 2.0 / 3.0);
}

TEST_CASE("nearest removed point matches exhaustive scan") {
  auto dom = build_punctured_disk({256.0, 0.5});
  const auto& holes = static_cast<const PuncturedDiskDomain&>(*dom).removed_points();
  SeededStream s(12, 0);
  for (int i = 0; i < 3000; ++i) {
    const Point p = random_in_box(s, 2, 1.0);
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& h : holes) brute = std::min(brute, distance(p, h));
    CHECK(nearest_removed_point(*dom, p).distance == doctest::Approx(brute).epsilon(1e-12));
  }

  auto cyl = build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating});
  const auto anchors = static_cast<const CantorCylinderDomain&>(*cyl).anchor_points();
  for (int i = 0; i < 300; ++i) {
    const Point p = random_in_box(s, 3, 0.8);
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& a : anchors) brute = std::min(brute, distance(p, a));
    CHECK(nearest_removed_point(*cyl, p).distance == doctest::Approx(brute).epsilon(1e-12));
  }
  CHECK_THROWS_AS(nearest_removed_point(*ball_domain(2, 1.0), Point{0.0, 0.0}), ConfigError);
}

TEST_CASE("Cantor cylinder at eta = 0") {
  CHECK_THROWS_AS(build_cantor_cylinder({2.0, 0.01, 0, 0.0, ShellKind::Separating}), ConfigError);
  CHECK_THROWS_AS(build_cantor_cylinder({3.0, 1.0 / 24.0, 0, 0.0, ShellKind::Separating}), ConfigError);

  const double g = 0.04;
  auto dom = build_cantor_cylinder({3.0, g, 0, 0.0, ShellKind::Separating});
  const auto& cyl = static_cast<const CantorCylinderDomain&>(*dom);
  CHECK(dom->dim() == 3);
  CHECK(cyl.cantor().eta() == 0.0);
  const Point origin{0.0, 0.0, 0.0};
  CHECK(dom->contains(origin));
  CHECK(dom->distance(origin) >= 1.0 / 3.0 - g * std::sqrt(3.0));
  CHECK(dom->distance(origin) <= 1.0);

  const Point cell{12 * g + g / 2, g / 2, g / 2};
  CHECK(dom->distance(cell) == doctest::Approx(g * std::sqrt(3.0) / 2.0).epsilon(1e-12));

  const double expected = cyl.shell_volume() / (g * g * g);
  const double count = static_cast<double>(cyl.anchor_count());
  CHECK(count == static_cast<double>(cyl.anchor_points().size()));
  CHECK(count > expected / 2.0);
  CHECK(count < expected * 2.0);
  for (const auto& a : cyl.anchor_points()) {
    CHECK(dom->distance(a) == 0.0);
    CHECK_FALSE(dom->contains(a));
  }

  auto product = build_cantor_cylinder({3.0, g, 0, 0.0, ShellKind::Product});
  for (const auto& a : static_cast<const CantorCylinderDomain&>(*product).anchor_points()) {
    const double z = std::hypot(a[0], a[1]);
    CHECK(z > 1.0 / 3.0);
    CHECK(z < 2.0 / 3.0);
    CHECK(std::abs(a[2]) > 1.0 / 3.0);
    CHECK(std::abs(a[2]) < 2.0 / 3.0);
  }
}

TEST_CASE("Cantor cylinder with eta > 0 under-estimates distance") {
  auto dom = build_cantor_cylinder({2.5, 0.04, 0, 1e-4, ShellKind::Separating});
  const auto& cyl = static_cast<const CantorCylinderDomain&>(*dom);
  CHECK(cyl.cantor().eta() == doctest::Approx(0.5));
  CHECK(cyl.gamma() * cyl.cantor().interval_length() <= 1e-4);
  auto coarse = build_cantor_cylinder({2.5, 0.04, 2, 0.0, ShellKind::Separating});
  SeededStream s(13, 0);
  for (int i = 0; i < 2000; ++i) {
    const Point p = random_in_box(s, 3, 0.9);
    CHECK(coarse->distance(p) <= dom->distance(p) + 1e-12);
  }
}

TEST_CASE("domains from JSON") {
  auto b = domain_from_json({{"family", "ball"}, {"params", {{"dim", 3}, {"radius", 2.0}}}});
  CHECK(b->dim() == 3);
  CHECK(b->to_json()["params"]["radius"] == 2.0);
  auto p = domain_from_json({{"family", "punctured_disk"}, {"params", {{"n", 1024}, {"pitch_constant", 0.5}}}});
  CHECK(p->family() == "punctured_disk");
  auto c = domain_from_json({{"family", "cantor_cylinder"}, {"params", {{"alpha", 3.0}, {"gamma", 0.04}}}});
  CHECK(c->dim() == 3);
  CHECK_THROWS_AS(domain_from_json({{"family", "torus"}}), ConfigError);
  CHECK_THROWS_AS(domain_from_json({{"family", "punctured_disk"}, {"params", {{"pitch_constant", 0.5}}}}), ConfigError);
}
