#include "wos/suites.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "wos/io.hpp"

namespace wos {

std::string walk_table_csv(const Domain& domain, const std::vector<WalkResult>& walks, double epsilon) {
  const int d = domain.dim();
  std::ostringstream os;
  os << "walk,steps,termination,exit_class,exit_distance,min_distance,sum_sq_jumps";
  for (int i = 0; i < d; ++i) os << ",x" << (i + 1);
  os << '\n';
  for (std::size_t k = 0; k < walks.size(); ++k) {
    const auto& w = walks[k];
    os << k << ',' << w.steps << ',' << to_string(w.terminated_by) << ',' << to_string(classify_exit(domain, w, epsilon))
       << ',' << format_double(w.exit_distance) << ',' << format_double(w.min_distance) << ','
       << format_double(w.sum_sq_jumps);
    for (int i = 0; i < d; ++i) os << ',' << format_double(w.exit_point[i]);
    os << '\n';
  }
  return os.str();
}

nlohmann::json RateLawReport::to_json() const { return {{"d", d}, {"fit", fit.to_json()}, {"passed", passed}}; }

RateLawReport rate_law_ball(int d, std::uint64_t walks, std::uint64_t seed, int workers) {
  SweepPlan plan;
  plan.x0 = Point::zero(d);
  plan.walks_per_point = walks;
  plan.seed = seed;
  plan.workers = workers;
  for (int k = 4; k <= 20; ++k)
    plan.schedule.push_back({{{"family", "ball"}, {"params", {{"dim", d}, {"radius", 1.0}}}}, std::ldexp(1.0, -k)});
  plan.config.epsilon = plan.schedule.front().epsilon;
  RateLawReport rep;
  rep.d = d;
  rep.table = run_sweep(plan);
  FitOptions fo;
  fo.seed = seed;
  rep.fit = fit_rate(rep.table, std::nullopt, fo);
  rep.passed = rep.fit.selected == RateModel::Log && rep.fit.margin >= 2.0;
  return rep;
}

bool SuiteReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const SuiteCheck& c) { return c.passed; });
}

nlohmann::json SuiteReport::to_json() const {
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : checks)
    cs.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"suite", suite}, {"checks", cs}, {"passed", passed()}};
}

namespace {

Point random_in_box(SeededStream& rng, int d, double half) {
  Point p(d);
  for (int i = 0; i < d; ++i) p[i] = rng.uniform(-half, half);
  return p;
}

// Uniform radius in [lo, hi] along a uniform direction.
Point random_in_shell(SeededStream& rng, int d, double lo, double hi) {
  return sample_unit_direction(rng, d) * rng.uniform(lo, hi);
}

// Absolute kernel sum, the natural scale for log-kernel cancellation.
double kernel_scale(const DiscreteMeasure& mu, const Point& y, double alpha, int d) {
  double s = 0.0;
  for (const Atom& a : mu.atoms()) {
    const double r = distance(a.point, y);
    s += a.weight * (alpha == d ? std::abs(std::log(r)) : std::pow(r, alpha - d) / (d - alpha));
  }
  return s;
}

SuiteCheck profile_identity(std::uint64_t seed, const PotentialSuiteOptions& o) {
  SeededStream rng(seed, 0x70726f66ULL);
  double worst = 0.0;
  nlohmann::json worst_case;
  for (int m = 0; m < o.profile_measures; ++m) {
    const int d = 2 + m % 2;
    double alpha = m % 5 == 0 ? d : rng.uniform(0.2, d - 0.05);
    const int atoms = 1 + static_cast<int>(rng.uniform() * 30);
    DiscreteMeasure mu(d);
    for (int a = 0; a < atoms; ++a) mu.add(random_in_box(rng, d, 2.0), rng.uniform(0.01, 1.0));
    Point y = random_in_box(rng, d, 1.0);
    const double u = riesz_potential(mu, y, alpha, d);
    const double v = riesz_potential_from_profile(mu, y, alpha, d);
    const double scale = std::max(std::abs(u), kernel_scale(mu, y, alpha, d));
    const double rel = std::abs(u - v) / scale;
    if (rel > worst) {
      worst = rel;
      worst_case = {{"measure", m}, {"d", d}, {"alpha", alpha}, {"kernel", u}, {"profile", v}};
    }
  }
  return {"profile_identity", worst, o.profile_tolerance, worst <= o.profile_tolerance,
          {{"measures", o.profile_measures}, {"worst", worst_case}}};
}

SuiteCheck laplacian_richardson(std::uint64_t seed) {
  SeededStream rng(seed, 0x6c61706cULL);
  struct Case {
    int d;
    double alpha;
  };
  const Case cases[] = {{2, 0.5}, {2, 1.0}, {2, 1.5}, {3, 1.0}, {3, 1.5}, {3, 2.5}};
  double lo = 1e300, hi = -1e300;
  nlohmann::json ratios = nlohmann::json::array();
  const double h = 0.02;
  for (const Case& c : cases) {
    DiscreteMeasure mu(c.d);
    for (int a = 0; a < 10; ++a) mu.add(random_in_shell(rng, c.d, 1.0, 2.0), rng.uniform(0.05, 0.2));
    Point y(c.d);
    y[0] = 0.2;
    y[1] = 0.1;
    const auto coarse = laplacian_identity_check(mu, y, c.alpha, c.d, h);
    const auto fine = laplacian_identity_check(mu, y, c.alpha, c.d, h / 2.0);
    const double r = std::abs(coarse.fd_laplacian - coarse.rhs) / std::abs(fine.fd_laplacian - fine.rhs);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    ratios.push_back({{"d", c.d}, {"alpha", c.alpha}, {"ratio", r}, {"rel_err_fine", fine.rel_err}});
  }
  const bool ok = lo >= 3.5 && hi <= 4.5;
  return {"laplacian_richardson", lo < 3.5 ? lo : hi, 4.0, ok, {{"range", {3.5, 4.5}}, {"cases", ratios}}};
}

// Rescales mu into class M at `floor` by its certificate.
DiscreteMeasure normalize_class_M(const DiscreteMeasure& mu, double alpha, double floor) {
  const double c = class_M_certificate(mu, alpha, floor);
  return c > 1.0 ? mu.scaled(1.0 / c) : mu;
}

SuiteCheck amalgamation_closure(std::uint64_t seed, const PotentialSuiteOptions& o) {
  SeededStream rng(seed, 0x616d616cULL);
  const int d = 2;
  const DomainPtr ball = ball_domain(d, 1.0);
  const int depth = 6;
  const double floor = std::ldexp(1.0, -depth) / 2.0;
  double worst = 0.0;
  int failures = 0;
  nlohmann::json cases = nlohmann::json::array();
  for (int m = 0; m < o.closure_measures; ++m) {
    const double alpha = rng.uniform(0.5, 1.9);
    DiscreteMeasure mu(d);
    const int atoms = 20 + static_cast<int>(rng.uniform() * 40);
    for (int a = 0; a < atoms; ++a) mu.add(random_in_shell(rng, d, 1.0 + 1e-9, 2.0 - 1e-9), rng.uniform(0.1, 1.0));
    mu = normalize_class_M(mu, alpha, floor);
    const Point dir = sample_unit_direction(rng, d);
    const double ry = rng.uniform(0.5, 0.97);
    const Point y = dir * ry;
    const Point x = dir;
    const auto barrier = build_barrier_measure(ball, x, alpha, depth);
    const DiscreteMeasure mu_x = normalize_class_M(barrier.measure, alpha, floor);
    const DiscreteMeasure nu = amalgamate(mu, mu_x, y, ball->distance(y), alpha, d);
    ClassMOptions co;
    co.resolution_floor = floor;
    const auto rep = verify_class_M(nu, *ball, alpha, o.closure_balls, SeededStream(seed, 2000u + m), co);
    worst = std::max(worst, rep.max_violation_ratio);
    if (!rep.in_class_M()) ++failures;
    cases.push_back({{"alpha", alpha},
                     {"d_y", ball->distance(y)},
                     {"atoms", nu.size()},
                     {"ratio", rep.max_violation_ratio},
                     {"support_in_domain", rep.support_in_domain_count},
                     {"support_outside_ball2", rep.support_outside_ball2_count},
                     {"in_class_M", rep.in_class_M()}});
  }
  return {"amalgamation_closure", worst, 1.0, failures == 0,
          {{"floor", floor}, {"balls_per_measure", o.closure_balls}, {"failures", failures}, {"cases", cases}}};
}

SuiteCheck barrier_bounds(const PotentialSuiteOptions& o) {
  struct Case {
    std::string name;
    DomainPtr domain;
    Point x;
    double alpha;
    int max_depth;
  };
  std::vector<Case> cases;
  cases.push_back({"ball2_alpha1", ball_domain(2, 1.0), Point{1.0, 0.0}, 1.0, o.barrier_depth_2d});
  cases.push_back({"ball2_alpha1.5", ball_domain(2, 1.0), Point{0.6, 0.8}, 1.5, o.barrier_depth_2d});
  cases.push_back({"ball3_alpha2.5", ball_domain(3, 1.0), Point{0.0, 0.0, 1.0}, 2.5, o.barrier_depth_3d});
  {
    const auto pd = build_punctured_disk({std::exp(150.0), 4.0});
    const auto& holes = static_cast<const PuncturedDiskDomain&>(*pd).removed_points();
    cases.push_back({"punctured_disk_alpha2", pd, holes.front(), 2.0, o.barrier_depth_2d});
  }
  double worst_upper = 0.0, worst_lower = 1e300;
  bool ok = true;
  nlohmann::json detail = nlohmann::json::array();
  for (const auto& c : cases) {
    const int d = c.domain->dim();
    const double thickness = analytic_thickness(*c.domain, c.alpha);
    for (int depth = 1; depth <= c.max_depth; ++depth) {
      const auto b = build_barrier_measure(c.domain, c.x, c.alpha, depth);
      double up = 0.0, low = 1e300;
      for (const auto& cube : b.cubes) {
        const int k = cube.cube.level;
        up = std::max(up, cube.mass / barrier_upper_bound(k, c.alpha, d));
        if (cube.on_chain) low = std::min(low, cube.mass / barrier_lower_bound(k, c.alpha, d, thickness));
      }
      worst_upper = std::max(worst_upper, up);
      worst_lower = std::min(worst_lower, low);
      if (up > 1.0 + 1e-12 || low < 1.0 - 1e-12) ok = false;
      detail.push_back({{"case", c.name}, {"depth", depth}, {"atoms", b.measure.size()}, {"upper_ratio", up},
                        {"lower_ratio", low}});
    }
  }
  return {"barrier_cube_bounds", worst_upper, 1.0, ok, {{"min_lower_ratio", worst_lower}, {"builds", detail}}};
}

nlohmann::json bins_json(const DriftReport& r) { return r.to_json(); }

}  // namespace

SuiteReport potential_suite(std::uint64_t seed, const PotentialSuiteOptions& options) {
  SuiteReport rep;
  rep.suite = "potentials";
  rep.checks.push_back(profile_identity(seed, options));
  rep.checks.push_back(laplacian_richardson(seed));
  rep.checks.push_back(amalgamation_closure(seed, options));
  rep.checks.push_back(barrier_bounds(options));
  return rep;
}

SuiteReport drift_suite(std::uint64_t seed, const DriftSuiteOptions& options) {
  SuiteReport rep;
  rep.suite = "drift";
  DriftOptions dopt;
  dopt.seed = seed;
  dopt.workers = options.workers;
  {
    const auto ball = ball_domain(2, 1.0);
    BarrierSelector sel(ball, 1.0, options.depth);
    WosConfig cfg;
    cfg.epsilon = 1e-4;
    const auto r = drift_probe(*ball, [&](const Point& p) { return sel(p); }, cfg, Point::zero(2), options.k,
                               options.walks, 1.0, dopt);
    double min_z = 1e300;
    bool ok = r.samples >= options.min_samples;
    for (const auto& b : r.bins) {
      if (!b.populated) continue;
      const double z = b.se_increment > 0.0 ? b.mean_increment / b.se_increment : 0.0;
      min_z = std::min(min_z, z);
      if (!(b.mean_increment > 2.0 * b.se_increment)) ok = false;
    }
    rep.checks.push_back({"mean_increment_alpha1_ball", min_z, 2.0, ok, bins_json(r)});
  }
  {
    const double n = std::ldexp(1.0, 10);
    const auto pd = build_punctured_disk({n, 0.5});
    BarrierSelector sel(pd, 2.0, options.depth);
    WosConfig cfg;
    cfg.epsilon = 1.0 / n;
    const auto r = drift_probe(*pd, [&](const Point& p) { return sel(p); }, cfg, Point::zero(2), options.k,
                               options.walks, 2.0, dopt);
    double min_z = 1e300;
    bool ok = r.samples >= options.min_samples;
    for (const auto& b : r.bins) {
      if (!b.populated) continue;
      const double z = b.se_sq_increment > 0.0 ? b.mean_sq_increment / b.se_sq_increment : 0.0;
      min_z = std::min(min_z, z);
      if (!(b.mean_sq_increment > 2.0 * b.se_sq_increment)) ok = false;
    }
    rep.checks.push_back({"squared_increment_alpha2_punctured_disk", min_z, 2.0, ok, bins_json(r)});
  }
  return rep;
}

}  // namespace wos
