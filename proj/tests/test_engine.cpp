#include <cmath>
#include <algorithm>
#include <map>
#include <numeric>

#include "doctest.h"
#include "wos/engine.hpp"
#include "wos/experiments.hpp"

using namespace wos;

namespace {

WosConfig with_eps(double eps) {
  WosConfig c;
  c.epsilon = eps;
  return c;
}

bool same_walk(const WalkResult& a, const WalkResult& b) {
  return a.steps == b.steps && a.exit_point == b.exit_point && a.terminated_by == b.terminated_by &&
         a.sum_sq_jumps == b.sum_sq_jumps && a.min_distance == b.min_distance &&
         a.histogram.counts() == b.histogram.counts();
}

}  // namespace

TEST_CASE("config validation") {
  WosConfig c;
  CHECK_NOTHROW(c.validate());
  c.beta = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.beta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = WosConfig{};
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = WosConfig{};
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = WosConfig{};
  c.jump_fraction = 0.75;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.experimental_jump_fraction = true;
  CHECK_NOTHROW(c.validate());
  CHECK(estimator_mode_from_string("fuzzed") == EstimatorMode::Fuzzed);
  CHECK_THROWS_AS(estimator_mode_from_string("approximate"), ConfigError);
}

TEST_CASE("first step from the centre lands on the radius-1/2 circle") {
  WosConfig c = with_eps(1e-3);
  c.keep_trajectory = true;
  auto dom = ball_domain(2, 1.0);
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto w = run_walk(*dom, c, Point{0.0, 0.0}, derive_stream(0, i));
    REQUIRE(w.trajectory.size() == w.steps + 1);
    CHECK(w.trajectory[1].norm() == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("walks stay inside and stop within epsilon") {
  WosConfig c = with_eps(1e-6);
  c.keep_trajectory = true;
  const std::vector<std::pair<DomainPtr, Point>> cases = {
      {ball_domain(2, 1.0), Point{0.2, -0.1}},
      {ball_domain(3, 1.0), Point{0.0, 0.0, 0.0}},
      {build_punctured_disk({1024.0, 0.5}), Point{0.0, 0.0}},
      {build_cantor_cylinder({3.0, 0.04, 0, 0.0, ShellKind::Separating}), Point{0.0, 0.0, 0.0}},
  };
  for (const auto& [dom, x0] : cases) {
    for (std::uint64_t i = 0; i < 30; ++i) {
      const auto w = run_walk(*dom, c, x0, derive_stream(1, i));
      REQUIRE(w.terminated_by == Termination::Epsilon);
      CHECK(w.exit_distance <= c.epsilon);
      CHECK(dom->distance(w.exit_point) <= c.epsilon * (1.0 + 1e-6) + 1e-15);
      CHECK(static_cast<double>(w.steps) >= std::ceil(std::log2(dom->distance(x0) / c.epsilon)));
      for (const auto& x : w.trajectory) REQUIRE(dom->contains(x));
      CHECK(w.histogram.total() == w.steps);
    }
  }
}

TEST_CASE("start within epsilon and invalid starts") {
  auto dom = ball_domain(2, 1.0);
  const auto w = run_walk(*dom, with_eps(0.1), Point{0.95, 0.0}, derive_stream(0, 0));
  CHECK(w.steps == 0);
  CHECK(w.terminated_by == Termination::StartedWithinEpsilon);
  CHECK_THROWS_AS(run_walk(*dom, with_eps(0.1), Point{1.5, 0.0}, derive_stream(0, 0)), ConfigError);
  CHECK_THROWS_AS(run_walk(*dom, with_eps(0.1), Point{0.0, 0.0, 0.0}, derive_stream(0, 0)), ConfigError);
}

TEST_CASE("max_steps exhaustion is an outcome") {
  WosConfig c = with_eps(1e-12);
  c.max_steps = 3;
  const auto w = run_walk(*ball_domain(2, 1.0), c, Point{0.0, 0.0}, derive_stream(0, 0));
  CHECK(w.terminated_by == Termination::MaxSteps);
  CHECK(w.steps == 3);
}

TEST_CASE("coarser epsilon walks are prefixes of finer ones") {
  auto dom = ball_domain(2, 1.0);
  WosConfig fine = with_eps(1e-8);
  fine.keep_trajectory = true;
  WosConfig coarse = fine;
  coarse.epsilon = 1e-3;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto a = run_walk(*dom, fine, Point{0.1, 0.3}, derive_stream(3, i));
    const auto b = run_walk(*dom, coarse, Point{0.1, 0.3}, derive_stream(3, i));
    REQUIRE(b.steps <= a.steps);
    for (std::size_t t = 0; t < b.trajectory.size(); ++t) REQUIRE(b.trajectory[t] == a.trajectory[t]);
  }
}

TEST_CASE("batch results do not depend on the worker count") {
  const std::vector<std::pair<DomainPtr, Point>> cases = {
      {ball_domain(2, 1.0), Point{0.0, 0.0}},
      {build_punctured_disk({4096.0, 0.5}), Point{0.0, 0.0}},
  };
  for (const auto& [dom, x0] : cases) {
    const WosConfig c = with_eps(1.0 / 4096.0);
    const auto serial = run_batch_serial(*dom, c, x0, 100, 11);
    const auto one = run_batch(*dom, c, x0, 100, 11, 1);
    const auto eight = run_batch(*dom, c, x0, 100, 11, 8);
    REQUIRE(serial.size() == 100);
    for (std::size_t i = 0; i < serial.size(); ++i) {
      REQUIRE(same_walk(serial[i], one[i]));
      REQUIRE(same_walk(serial[i], eight[i]));
      REQUIRE(same_walk(serial[i], run_walk(*dom, c, x0, derive_stream(11, i))));
    }
  }
  CHECK_THROWS_AS(run_batch(*ball_domain(2, 1.0), with_eps(0.1), Point{0.0, 0.0}, 0, 0), ConfigError);
  CHECK_THROWS_AS(run_batch_serial(*ball_domain(2, 1.0), with_eps(0.1), Point{0.0, 0.0}, 0, 0), ConfigError);
}

TEST_CASE("batch errors carry the walk index") {
  WosConfig c = with_eps(0.1);
  c.beta = 2.0;
  try {
    run_batch_serial(*ball_domain(2, 1.0), c, Point{0.0, 0.0}, 5, 0);
    FAIL("expected BatchError");
  } catch (const BatchError& e) {
    CHECK(e.walk_index() == 0);
  }
}

TEST_CASE("mean steps in the unit disk at epsilon 2^-20") {
  const auto walks = run_batch(*ball_domain(2, 1.0), with_eps(std::ldexp(1.0, -20)), Point{0.0, 0.0}, 10000, 0);
  double total = 0.0;
  for (const auto& w : walks) total += static_cast<double>(w.steps);
  const double mean = total / static_cast<double>(walks.size());
  // near a flat boundary log d(X_t) drifts by log((1 + sqrt(3)/2) / 2) per step
  const double predicted = 20.0 * std::log(2.0) / -std::log((1.0 + std::sqrt(3.0) / 2.0) / 2.0);
  CHECK(mean >= 20.0);
  CHECK(mean <= 1.1 * predicted);
}

TEST_CASE("mean exit point is the start point") {
  const auto walks = run_batch(*ball_domain(2, 1.0), with_eps(1e-6), Point{0.3, 0.0}, 100000, 0);
  for (int k = 0; k < 2; ++k) {
    double s = 0.0, s2 = 0.0;
    for (const auto& w : walks) {
      s += w.exit_point[k];
      s2 += w.exit_point[k] * w.exit_point[k];
    }
    const double n = static_cast<double>(walks.size());
    const double mean = s / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    CHECK(std::abs(mean - (k == 0 ? 0.3 : 0.0)) <= 3.0 * se);
  }
}

TEST_CASE("fuzzed mode approaches exact mode as beta -> 1") {
  auto dom = ball_domain(2, 1.0);
  WosConfig exact = with_eps(1e-4);
  WosConfig fuzzed = exact;
  fuzzed.mode = EstimatorMode::Fuzzed;
  fuzzed.beta = 0.99;
  auto mean = [&](const WosConfig& c) {
    const auto walks = run_batch(*dom, c, Point{0.0, 0.0}, 100000, 5);
    double t = 0.0;
    for (const auto& w : walks) t += static_cast<double>(w.steps);
    return t / static_cast<double>(walks.size());
  };
  const double me = mean(exact);
  const double mf = mean(fuzzed);
  CHECK(std::abs(mf - me) <= 0.02 * me);

  fuzzed.beta = 0.5;
  fuzzed.jumps = JumpRetention::Full;
  fuzzed.keep_trajectory = true;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto w = run_walk(*dom, fuzzed, Point{0.0, 0.0}, derive_stream(6, i));
    for (std::size_t t = 0; t < w.jumps.size(); ++t) {
      const double d = dom->distance(w.trajectory[t]);
      REQUIRE(w.jumps[t] >= 0.5 * 0.5 * d * (1.0 - 1e-12));
      REQUIRE(w.jumps[t] <= 0.5 * d * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("big jump counts") {
  WalkResult w;
  w.jumps = {0.5, 0.1, 0.01};
  w.steps = 3;
  CHECK(big_jump_count(w, 0.05) == 2);
  CHECK(big_jump_count(w, 1.0) == 0);
  CHECK(big_jump_count(w, 0.01) == 3);

  WalkResult h;
  h.steps = 3;
  for (double j : {0.5, 0.1, 0.01}) h.histogram.add(j);
  CHECK(big_jump_count(h, 0.125) == 1);
  CHECK(big_jump_count(h, 0.0625) == 2);
  CHECK(big_jump_count(h, 1.0) == 0);
  CHECK_THROWS_AS(big_jump_count(h, 0.05), ConfigError);

  WosConfig c = with_eps(1e-4);
  c.jumps = JumpRetention::Full;
  const auto real = run_walk(*ball_domain(3, 1.0), c, Point{0.0, 0.0, 0.0}, derive_stream(0, 0));
  WosConfig ch = c;
  ch.jumps = JumpRetention::Histogram;
  const auto hist = run_walk(*ball_domain(3, 1.0), ch, Point{0.0, 0.0, 0.0}, derive_stream(0, 0));
  for (int j = 0; j <= 20; ++j) CHECK(big_jump_count(real, std::ldexp(1.0, -j)) == big_jump_count(hist, std::ldexp(1.0, -j)));
}

TEST_CASE("region visits partition the walk") {
  auto dom = ball_domain(2, 1.0);
  CHECK(region_index(0.6, 4.0) == 2);
  CHECK(region_index(1.0, 4.0) == 2);
  CHECK(region_index(0.25, 4.0) == 0);
  CHECK(region_index(0.26, 4.0) == 1);

  WalkResult synthetic;
  synthetic.steps = 3;
  synthetic.trajectory = {Point{0.0, 0.0}, Point{0.2, 0.0}, Point{0.0, -0.4}, Point{0.0, 0.999}};
  const auto v = region_visits(synthetic, *dom, 4.0);
  CHECK(v.size() == 1);
  CHECK(v.at(2) == 3);

  WosConfig c = with_eps(1e-5);
  c.keep_trajectory = true;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto w = run_walk(*dom, c, Point{0.0, 0.0}, derive_stream(2, i));
    const auto visits = region_visits(w, *dom, 1e5);
    std::uint64_t total = 0;
    for (const auto& [k, n] : visits) total += n;
    CHECK(total == w.steps);
  }
  WalkResult bare;
  bare.steps = 2;
  CHECK_THROWS_AS(region_visits(bare, *dom, 4.0), ConfigError);
}

TEST_CASE("region visit tails decay geometrically on the alpha=3 cylinder") {
  const double n = cylinder_schedule(3.0, 1).front();
  CantorCylinderParams p;
  p.alpha = 3.0;
  p.gamma = cylinder_gamma(3.0, n);
  const auto dom = build_cantor_cylinder(p);
  WosConfig c = with_eps(1.0 / n);
  c.keep_trajectory = true;
  const int walks = 200;
  std::map<int, std::vector<double>> per_k;
  for (int i = 0; i < walks; ++i) {
    auto w = run_walk(*dom, c, Point::zero(3), derive_stream(0, static_cast<std::uint64_t>(i)));
    REQUIRE(w.terminated_by == Termination::Epsilon);
    const auto v = region_visits(w, *dom, n);
    for (int k = 1; k <= 30; ++k) per_k[k].push_back(v.count(k) ? static_cast<double>(v.at(k)) : 0.0);
    w.trajectory.clear();
  }
  // C_2 fitted per shell from the median of v_k / 2^k
  std::vector<double> exceed(5, 0.0);
  double samples = 0.0;
  for (auto& [k, vs] : per_k) {
    std::vector<double> sorted = vs;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (median < 5.0) continue;
    samples += static_cast<double>(vs.size());
    for (int m = 1; m <= 4; ++m)
      for (double v : vs) exceed[static_cast<std::size_t>(m)] += v > median * m ? 1.0 : 0.0;
  }
  REQUIRE(samples > 0.0);
  for (int m = 1; m < 4; ++m) CHECK(exceed[static_cast<std::size_t>(m) + 1] <= 0.5 * exceed[static_cast<std::size_t>(m)]);
  CHECK(exceed[1] / samples <= 0.5);
}
