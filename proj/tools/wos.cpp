#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wos/experiments.hpp"
#include "wos/io.hpp"
#include "wos/potentials.hpp"
#include "wos/suites.hpp"

namespace {

using nlohmann::json;
using namespace wos;

constexpr const char* kVersion = "0.1.0";

struct GateFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out = ".";
  std::string config;
  bool force = false;

  std::uint64_t resolved_seed() const { return seed.value_or(0); }
};

json load_json_arg(const std::string& arg) {
  const std::string text = !arg.empty() && arg.front() == '{' ? arg : read_text_file(arg);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("'" + arg + "' is not valid JSON: " + e.what());
  }
}

Point parse_point(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("malformed coordinate '" + item + "' in '" + s + "'");
    }
  }
  if (v.empty()) throw ConfigError("empty point");
  return Point(std::span<const double>(v));
}

// Collects output files of one run and writes them with a shared manifest.
class Outputs {
 public:
  Outputs(const Globals& g, std::string subcommand, json config)
      : g_(g), manifest_{kVersion, std::move(subcommand), std::move(config), g.resolved_seed(), g.workers,
                         utc_timestamp(), "", {}} {}

  std::string manifest_name() const { return manifest_.subcommand + ".manifest.json"; }
  json ref() const { return {{"manifest", manifest_name()}}; }

  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void write() {
    namespace fs = std::filesystem;
    for (const auto& [name, content] : files_) {
      write_text_file((fs::path(g_.out) / name).string(), content, g_.force);
      manifest_.outputs[name] = sha256_hex(content);
      std::cout << "wrote " << (fs::path(g_.out) / name).string() << '\n';
    }
    manifest_.finished = utc_timestamp();
    write_text_file((fs::path(g_.out) / manifest_name()).string(), manifest_.to_json().dump(2) + "\n", true);
  }

 private:
  const Globals& g_;
  RunManifest manifest_;
  std::vector<std::pair<std::string, std::string>> files_;
};

json domain_info(const DomainPtr& dom) {
  json j = dom->to_json();
  j["dim"] = dom->dim();
  j["params_hash"] = git_blob_sha1(dom->params().dump());
  if (auto cyl = std::dynamic_pointer_cast<const CantorCylinderDomain>(dom)) {
    j["anchors"] = cyl->anchor_count();
    j["shell_volume"] = cyl->shell_volume();
  }
  return j;
}

std::string csv_with_meta(json meta, const json& ref, const std::string& body) {
  for (const auto& [k, v] : ref.items()) meta[k] = v;
  return "# " + meta.dump() + "\n" + body;
}

// ---------------------------------------------------------------------------

int cmd_domains(const Globals& g, const std::string& show) {
  const std::string spec = !show.empty() ? show : g.config;
  if (spec.empty()) {
    std::cout << "ball             params: dim (1..6), radius > 0\n"
                 "punctured_disk   params: n >= 3, pitch_constant (default 4); gamma = c/sqrt(log n) < 1/3\n"
                 "cantor_cylinder  params: alpha in (2, 6], gamma in (0, 1/24), depth, cantor_tolerance,\n"
                 "                         shell = separating | product\n";
    return 0;
  }
  const DomainPtr dom = domain_from_json(load_json_arg(spec));
  std::cout << domain_info(dom).dump(2) << '\n';
  return 0;
}

struct WalkArgs {
  std::string domain;
  std::string x0;
  std::uint64_t walks = 1000;
  std::optional<double> epsilon;
  std::optional<double> beta;
  std::optional<std::uint64_t> max_steps;
  std::string mode;
};

int cmd_walk(const Globals& g, const WalkArgs& a) {
  json cfg_file = g.config.empty() ? json::object() : load_json_arg(g.config);
  json domain_spec = !a.domain.empty() ? load_json_arg(a.domain) : cfg_file.value("domain", json());
  if (domain_spec.is_null()) throw ConfigError("walk: --domain or a config with \"domain\" is required");
  const DomainPtr dom = domain_from_json(domain_spec);
  json wc = cfg_file.value("config", json::object());
  if (a.epsilon) wc["epsilon"] = *a.epsilon;
  if (a.beta) wc["beta"] = *a.beta;
  if (a.max_steps) wc["max_steps"] = *a.max_steps;
  if (!a.mode.empty()) wc["mode"] = a.mode;
  const WosConfig cfg = config_from_json(wc);
  const Point x0 = !a.x0.empty() ? parse_point(a.x0)
                   : cfg_file.contains("x0") ? Point(std::span<const double>(cfg_file["x0"].get<std::vector<double>>()))
                                             : Point::zero(dom->dim());
  const std::uint64_t n = cfg_file.value("walks", a.walks);
  const json resolved = {{"domain", dom->to_json()}, {"x0", x0.to_vector()}, {"walks", n},
                         {"config", config_to_json(cfg)}};
  Outputs out(g, "walk", resolved);
  const auto walks = run_batch(*dom, cfg, x0, n, g.resolved_seed(), g.workers);
  const SweepRow row = summarize_batch(*dom, walks, cfg.epsilon);
  json meta = {{"kind", "walks"}, {"seed", g.resolved_seed()}, {"domain_hash", git_blob_sha1(dom->params().dump())},
               {"run", resolved}};
  out.add("walks.csv", csv_with_meta(meta, out.ref(), walk_table_csv(*dom, walks, cfg.epsilon)));
  out.write();
  std::printf("walks=%llu mean_steps=%.6g se=%.3g median=%.6g outer=%.4f removed=%.4f exhausted=%llu\n",
              static_cast<unsigned long long>(row.walks), row.mean_steps, row.se_steps, row.median_steps,
              row.outer_exit_fraction, row.removed_exit_fraction, static_cast<unsigned long long>(row.exhausted));
  return 0;
}

SweepPlan preset_plan(const std::string& name) {
  SweepPlan plan;
  auto ball = [&](int d) {
    plan.x0 = Point::zero(d);
    for (int k = 4; k <= 20; ++k)
      plan.schedule.push_back({{{"family", "ball"}, {"params", {{"dim", d}, {"radius", 1.0}}}}, std::ldexp(1.0, -k)});
  };
  if (name == "ball2d") {
    ball(2);
  } else if (name == "ball3d") {
    ball(3);
  } else if (name == "punctured-disk") {
    plan.x0 = Point::zero(2);
    plan.walks_per_point = 500;
    for (int k = 8; k <= 14; k += 2) {
      const double n = std::ldexp(1.0, k);
      plan.schedule.push_back({{{"family", "punctured_disk"}, {"params", {{"n", n}, {"pitch_constant", 0.5}}}}, 1.0 / n});
    }
  } else if (name == "cylinder3") {
    plan.x0 = Point::zero(3);
    plan.walks_per_point = 300;
    for (double n : cylinder_schedule(3.0, 4))
      plan.schedule.push_back({{{"family", "cantor_cylinder"},
                                {"params", {{"alpha", 3.0}, {"gamma", cylinder_gamma(3.0, n)}}}},
                               1.0 / n});
  } else {
    throw ConfigError("unknown preset '" + name + "' (ball2d, ball3d, punctured-disk, cylinder3)");
  }
  plan.config.epsilon = plan.schedule.front().epsilon;
  return plan;
}

int cmd_sweep(const Globals& g, const std::string& preset, std::optional<std::uint64_t> walks) {
  SweepPlan plan;
  if (!g.config.empty()) {
    plan = SweepPlan::from_json(load_json_arg(g.config));
  } else if (!preset.empty()) {
    plan = preset_plan(preset);
  } else {
    throw ConfigError("sweep: --config <plan.json> or --preset is required");
  }
  if (g.seed) plan.seed = *g.seed;
  if (walks) plan.walks_per_point = *walks;
  plan.workers = g.workers;
  json resolved = plan.to_json();
  json hashes = json::array();
  for (const auto& p : plan.schedule) hashes.push_back(git_blob_sha1(domain_from_json(p.domain)->params().dump()));
  resolved["domain_hashes"] = hashes;
  resolved["plan_hash"] = sha256_hex(plan.to_json().dump());
  Outputs out(g, "sweep", resolved);
  const SweepTable table = run_sweep(plan);
  json extra = out.ref();
  extra["plan_hash"] = resolved["plan_hash"];
  extra["domain_hashes"] = hashes;
  out.add("sweep.csv", table.to_csv(extra));
  out.write();
  for (const auto& r : table.rows)
    std::printf("eps=%-12.6g mean=%-12.6g se=%-10.4g exhausted=%.4f\n", r.epsilon, r.mean_steps, r.se_steps,
                r.exhausted_fraction);
  if (table.censored) std::cerr << "warning: table is censored; fit will refuse it without --force\n";
  return 0;
}

struct FitArgs {
  std::string table;
  std::optional<double> alpha;
  std::optional<std::size_t> min_points;
  std::optional<double> min_octaves;
};

int cmd_fit(const Globals& g, const FitArgs& a) {
  const SweepTable table = SweepTable::from_csv(read_text_file(a.table));
  FitOptions fo;
  fo.force = g.force;
  fo.seed = g.resolved_seed();
  if (a.min_points) fo.min_points = *a.min_points;
  if (a.min_octaves) fo.min_octaves = *a.min_octaves;
  if (table.censored && g.force)
    std::cerr << "warning: fitting a censored table; censored points are dropped\n";
  const RateFit fit = fit_rate(table, a.alpha, fo);
  Outputs out(g, "fit", {{"table", a.table}, {"table_sha256", sha256_hex(read_text_file(a.table))}});
  json j = fit.to_json();
  j["seed"] = fo.seed;
  j["manifest"] = out.manifest_name();
  out.add("fit.json", j.dump(2) + "\n");
  out.write();
  std::printf("selected %s (margin %.3g over the next model)\n", to_string(fit.selected), fit.margin);
  for (const auto& m : fit.models)
    std::printf("  %-6s a=%-12.6g b=%-12.6g holdout=%-10.4g rss=%.4g\n", to_string(m.model), m.a, m.b,
                m.holdout_residual, m.rss);
  std::printf("power exponent theta = %.4f  95%% CI [%.4f, %.4f]", fit.theta, fit.theta_ci_lo, fit.theta_ci_hi);
  if (fit.expected_theta) std::printf("  expected 2-4/alpha = %.4f", *fit.expected_theta);
  std::printf("\n");
  return 0;
}

struct ValidateArgs {
  std::string suite;
  std::optional<std::uint64_t> walks;
  double alpha = 3.0;
  double log_n = 150.0;
};

int cmd_validate(const Globals& g, const ValidateArgs& a) {
  const std::uint64_t seed = g.resolved_seed();
  json report;
  bool passed = false;
  Outputs out(g, "validate", {{"suite", a.suite}, {"walks", a.walks ? json(*a.walks) : json(nullptr)},
                              {"alpha", a.alpha}, {"log_n", a.log_n}});
  if (a.suite == "ball-harmonic") {
    const std::uint64_t n = a.walks.value_or(100000);
    ExitTestOptions eo;
    eo.workers = g.workers;
    const auto c2 = exit_distribution_test(2, Point{0.0, 0.0}, n, seed, eo);
    const auto o2 = exit_distribution_test(2, Point{0.5, 0.0}, n, seed, eo);
    const auto c3 = exit_distribution_test(3, Point{0.0, 0.0, 0.0}, n, seed, eo);
    WosConfig cfg;
    cfg.epsilon = 1e-6;
    const auto m0 = martingale_test(*ball_domain(2, 1.0), cfg, Point{0.0, 0.0}, n, seed, g.workers);
    const auto m1 = martingale_test(*ball_domain(2, 1.0), cfg, Point{0.3, 0.0}, n, seed, g.workers);
    report = {{"exit_center_2d", c2.to_json()}, {"exit_offcenter_2d", o2.to_json()},
              {"exit_center_3d", c3.to_json()}, {"martingale_center", m0.to_json()},
              {"martingale_offcenter", m1.to_json()}};
    passed = c2.passed && o2.passed && c3.passed && m0.passed && m1.passed;
    std::printf("chi2(35)=%.3f < %.3f  tv=%.4f <= 0.02  chi2(7)=%.3f < %.3f  martingale %s/%s\n", c2.chi_square,
                c2.critical, o2.tv, c3.chi_square, c3.critical, m0.passed ? "ok" : "FAIL", m1.passed ? "ok" : "FAIL");
  } else if (a.suite == "rate-ball") {
    const std::uint64_t n = a.walks.value_or(1000);
    const auto r2 = rate_law_ball(2, n, seed, g.workers);
    const auto r3 = rate_law_ball(3, n, seed, g.workers);
    out.add("rate-ball-2d.csv", r2.table.to_csv(out.ref()));
    out.add("rate-ball-3d.csv", r3.table.to_csv(out.ref()));
    report = {{"d2", r2.to_json()}, {"d3", r3.to_json()}};
    passed = r2.passed && r3.passed;
    std::printf("d=2 selected %s margin %.3g; d=3 selected %s margin %.3g\n", to_string(r2.fit.selected),
                r2.fit.margin, to_string(r3.fit.selected), r3.fit.margin);
  } else if (a.suite == "big-jump") {
    WosConfig cfg;
    cfg.epsilon = 0.1;
    const auto r = big_jump_test(*ball_domain(2, 1.0), cfg, Point{0.0, 0.0}, 0.1, a.walks.value_or(10000), seed,
                                 g.workers);
    report = r.to_json();
    passed = r.gate.passed;
    std::printf("P[N > %.0f] = %.4f (gate %.4f)\n", r.limit, r.gate.fraction, r.gate.bound + 3 * r.gate.se);
  } else if (a.suite == "hole-termination") {
    HoleTestOptions ho;
    ho.workers = g.workers;
    const auto r = hole_termination_test(a.log_n, a.walks.value_or(2000), seed, ho);
    report = r.to_json();
    passed = r.gate.passed;
    std::printf("hole fraction %.4f [%.4f, %.4f] (gate %.4f)  circle %.4f  censored %.4f\n", r.hole_fraction,
                r.gate.ci.lo, r.gate.ci.hi, r.gate.bound + 3 * r.gate.se, r.circle_fraction, r.censored_fraction);
  } else if (a.suite == "lower-bound-2") {
    LowerBound2Options lo;
    lo.workers = g.workers;
    const auto r = lower_bound_alpha2({256, 1024, 4096, 16384}, a.walks.value_or(500), seed, lo);
    out.add("lower-bound-2.csv", r.table.to_csv(out.ref()));
    report = r.to_json();
    passed = r.passed;
    std::printf("selected %s margin %.3g  spread %.3g  median %.1f > %.1f\n", to_string(r.fit.selected),
                r.fit.margin, r.ratio_spread, r.median_smallest, r.threshold_smallest);
  } else if (a.suite == "lower-bound-gt2") {
    LowerBoundGt2Options lo;
    lo.workers = g.workers;
    const auto r = lower_bound_alpha_gt2(a.alpha, cylinder_schedule(a.alpha, 4), a.walks.value_or(300), seed, lo);
    out.add("lower-bound-gt2.csv", r.table.to_csv(out.ref()));
    report = r.to_json();
    passed = r.passed;
    std::printf("theta %.4f [%.4f, %.4f] expected %.4f; min wall fraction %.4f\n", r.theta, r.fit.theta_ci_lo,
                r.fit.theta_ci_hi, r.expected_theta,
                *std::min_element(r.wall_fraction.begin(), r.wall_fraction.end()));
  } else if (a.suite == "potentials" || a.suite == "drift") {
    SuiteReport r;
    if (a.suite == "potentials") {
      r = potential_suite(seed);
    } else {
      DriftSuiteOptions d;
      d.workers = g.workers;
      if (a.walks) d.walks = *a.walks;
      r = drift_suite(seed, d);
    }
    report = r.to_json();
    passed = r.passed();
    for (const auto& c : r.checks)
      std::printf("%-42s %-6s value=%.6g limit=%.6g\n", c.name.c_str(), c.passed ? "ok" : "FAIL", c.value, c.limit);
  } else {
    throw ConfigError("unknown suite '" + a.suite +
                      "' (ball-harmonic, rate-ball, big-jump, hole-termination, lower-bound-2, lower-bound-gt2, "
                      "potentials, drift)");
  }
  report["seed"] = seed;
  report["passed"] = passed;
  report["manifest"] = out.manifest_name();
  out.add("validate-" + a.suite + ".json", report.dump(2) + "\n");
  out.write();
  std::cout << (passed ? "PASS" : "FAIL") << ' ' << a.suite << '\n';
  if (!passed) throw GateFailure("suite '" + a.suite + "' failed");
  return 0;
}

struct PotentialArgs {
  std::string measure;
  std::string barrier;
  std::string domain;
  std::string point;
  double alpha = 1.0;
  int depth = 6;
  std::uint64_t balls = 1000;
  std::optional<double> floor;
  double h = 0.01;
  bool greedy = false;
};

MeasureFile load_measure(const std::string& path) {
  if (path.empty()) throw ConfigError("--measure is required");
  return measure_from_csv(read_text_file(path));
}

int cmd_potential(const Globals& g, const std::string& action, const PotentialArgs& a) {
  if (action == "evaluate") {
    const auto m = load_measure(a.measure);
    const Point y = parse_point(a.point);
    const double u = riesz_potential(m.measure, y, a.alpha, y.dim());
    const double p = riesz_potential_from_profile(m.measure, y, a.alpha, y.dim());
    std::printf("U_alpha = %.17g\nprofile = %.17g\n", u, p);
    return 0;
  }
  if (action == "verify-class-m") {
    const auto m = load_measure(a.measure);
    const DomainPtr dom = domain_from_json(load_json_arg(a.domain));
    ClassMOptions co;
    co.resolution_floor = a.floor ? a.floor : m.metadata.contains("resolution_floor")
                                                  ? std::optional<double>(m.metadata["resolution_floor"].get<double>())
                                                  : std::nullopt;
    const auto rep = verify_class_M(m.measure, *dom, a.alpha, a.balls, SeededStream(g.resolved_seed(), 0), co);
    std::cout << rep.to_json().dump(2) << '\n';
    if (!rep.in_class_M()) throw GateFailure("measure is not in class M");
    return 0;
  }
  if (action == "amalgamate") {
    const auto mu = load_measure(a.measure);
    if (a.barrier.empty()) throw ConfigError("--barrier is required");
    const auto mux = measure_from_csv(read_text_file(a.barrier));
    const DomainPtr dom = domain_from_json(load_json_arg(a.domain));
    const Point y = parse_point(a.point);
    const auto nu = amalgamate(mu.measure, mux.measure, y, dom->distance(y), a.alpha, dom->dim());
    Outputs out(g, "potential-amalgamate",
                {{"measure", a.measure}, {"barrier", a.barrier}, {"domain", dom->to_json()}, {"y", y.to_vector()},
                 {"alpha", a.alpha}});
    const double floor = mu.metadata.value("resolution_floor", 0.0);
    out.add("amalgamated.csv", measure_to_csv(nu, a.alpha, floor));
    out.write();
    std::printf("atoms=%zu mass=%.17g\n", nu.size(), nu.total_mass());
    return 0;
  }
  if (action == "barrier") {
    const DomainPtr dom = domain_from_json(load_json_arg(a.domain));
    const Point x = parse_point(a.point);
    const auto b = build_barrier_measure(dom, x, a.alpha, a.depth, a.greedy ? ContentMethod::Greedy
                                                                            : ContentMethod::Analytic);
    Outputs out(g, "potential-barrier", {{"domain", dom->to_json()}, {"x", x.to_vector()}, {"alpha", a.alpha},
                                         {"depth", a.depth}, {"greedy", a.greedy}});
    out.add("barrier.csv", measure_to_csv(b.measure, a.alpha, DyadicGrid::side(a.depth) / 2.0));
    out.write();
    std::printf("atoms=%zu mass=%.17g cubes=%zu exact_content=%s\n", b.measure.size(), b.measure.total_mass(),
                b.cubes.size(), b.exact_content ? "true" : "false");
    return 0;
  }
  if (action == "laplace-check") {
    const auto m = load_measure(a.measure);
    const Point y = parse_point(a.point);
    const auto c = laplacian_identity_check(m.measure, y, a.alpha, y.dim(), a.h);
    std::printf("fd_laplacian = %.17g\nrhs = %.17g\nrel_err = %.6g\n", c.fd_laplacian, c.rhs, c.rel_err);
    return 0;
  }
  throw ConfigError("unknown potential action '" + action + "'");
}

int cmd_plot(const Globals& g, const std::string& table_path) {
  const SweepTable t = SweepTable::from_csv(read_text_file(table_path));
  SvgSeries s{"mean steps", {}, {}};
  for (const auto& r : t.rows) {
    s.x.push_back(std::log(r.resolution()));
    s.y.push_back(r.mean_steps);
  }
  Outputs out(g, "plot", {{"table", table_path}});
  const std::string stem = std::filesystem::path(table_path).stem().string();
  SvgChart lin{"mean steps vs log(1/eps)", "log(1/eps)", "mean steps"};
  out.add(stem + "-linear.svg", svg_line_chart({s}, lin));
  SvgChart ll{"mean steps vs 1/eps (log-log)", "1/eps", "mean steps", true, true};
  SvgSeries s2{"mean steps", {}, s.y};
  for (const auto& r : t.rows) s2.x.push_back(r.resolution());
  out.add(stem + "-loglog.svg", svg_line_chart({s2}, ll));
  out.write();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Walk-on-Spheres lab: domains, walks, sweeps, fits, potentials and validation suites."};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (default 0, with a warning)");
  app.add_option("--workers", g.workers, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config, "JSON config path");
  app.add_flag("--force", g.force, "Overwrite outputs; fit censored tables");
  app.set_version_flag("--version", kVersion);

  std::string show;
  auto* domains = app.add_subcommand("domains", "List domain families or describe one domain spec");
  domains->add_option("--show", show, "Domain JSON (text or file)");

  WalkArgs wa;
  auto* walk = app.add_subcommand("walk", "Run a batch of walks");
  walk->add_option("--domain", wa.domain, "Domain JSON (text or file)");
  walk->add_option("--x0", wa.x0, "Start point, comma separated");
  walk->add_option("--walks", wa.walks, "Number of walks")->capture_default_str();
  walk->add_option("--epsilon", wa.epsilon, "Termination distance");
  walk->add_option("--beta", wa.beta, "Fuzzed-mode lower factor");
  walk->add_option("--max-steps", wa.max_steps, "Step cap per walk");
  walk->add_option("--mode", wa.mode, "exact | fuzzed");
  walk->footer(
      "Writes walks.csv: walk,steps,termination,exit_class,exit_distance,min_distance,sum_sq_jumps,x1..xd");

  std::string preset;
  std::optional<std::uint64_t> sweep_walks;
  auto* sweep = app.add_subcommand("sweep", "Run a sweep plan (--config plan.json) or a preset");
  sweep->add_option("--preset", preset, "ball2d | ball3d | punctured-disk | cylinder3");
  sweep->add_option("--walks", sweep_walks, "Override walks per point");
  sweep->footer(
      "Writes sweep.csv: epsilon,resolution,walks,mean_steps,sd_steps,se_steps,ci_lo,ci_hi,median_steps,\n"
      "exhausted,exhausted_fraction,outer_exit_fraction,removed_exit_fraction");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit log, log^2 and power models to a sweep table");
  fit->add_option("--table", fa.table, "Sweep CSV")->required();
  fit->add_option("--alpha", fa.alpha, "Thickness exponent; compares theta with 2-4/alpha");
  fit->add_option("--min-points", fa.min_points, "Minimum uncensored points (default 5)");
  fit->add_option("--min-octaves", fa.min_octaves, "Minimum span in octaves of 1/eps (default 3)");
  fit->footer("Writes fit.json with per-model coefficients, hold-out residuals and the theta bootstrap CI");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Run a validation suite; exit 3 when a gate fails");
  validate->add_option("--suite", va.suite,
                       "ball-harmonic | rate-ball | big-jump | hole-termination | lower-bound-2 | lower-bound-gt2 | "
                       "potentials | drift")
      ->required();
  validate->add_option("--walks", va.walks, "Override walk count");
  validate->add_option("--alpha", va.alpha, "alpha for lower-bound-gt2")->capture_default_str();
  validate->add_option("--log-n", va.log_n, "log n for hole-termination")->capture_default_str();
  validate->footer("Writes validate-<suite>.json and, for sweep-based suites, the sweep CSV");

  std::string action;
  PotentialArgs pa;
  auto* potential = app.add_subcommand("potential", "Riesz potentials, class-M checks, barrier measures");
  potential->add_option("action", action, "evaluate | verify-class-m | amalgamate | barrier | laplace-check")
      ->required();
  potential->add_option("--measure", pa.measure, "Measure CSV (x1..xd,weight)");
  potential->add_option("--barrier", pa.barrier, "Barrier measure CSV for amalgamate");
  potential->add_option("--domain", pa.domain, "Domain JSON (text or file)");
  potential->add_option("--point", pa.point, "Evaluation point / boundary point x / amalgamation point y");
  potential->add_option("--alpha", pa.alpha, "alpha")->capture_default_str();
  potential->add_option("--depth", pa.depth, "Barrier depth")->capture_default_str();
  potential->add_option("--balls", pa.balls, "Random balls for verify-class-m")->capture_default_str();
  potential->add_option("--floor", pa.floor, "Resolution floor for verify-class-m");
  potential->add_option("--spacing", pa.h, "Stencil spacing h for laplace-check")->capture_default_str();
  potential->add_flag("--greedy", pa.greedy, "Greedy content estimate (any domain)");
  potential->footer("Measure CSVs carry a '# {alpha, d, resolution_floor}' line followed by x1..xd,weight rows");

  std::string plot_table;
  auto* plot = app.add_subcommand("plot", "SVG charts of a sweep table");
  plot->add_option("--table", plot_table, "Sweep CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }
  const bool seedless = domains->parsed() || plot->parsed() ||
                      (potential->parsed() && action != "verify-class-m");
  if (!g.seed && !seedless) std::cerr << "warning: --seed not given; using the default seed 0\n";
  try {
    if (domains->parsed()) return cmd_domains(g, show);
    if (walk->parsed()) return cmd_walk(g, wa);
    if (sweep->parsed()) return cmd_sweep(g, preset, sweep_walks);
    if (fit->parsed()) return cmd_fit(g, fa);
    if (validate->parsed()) return cmd_validate(g, va);
    if (potential->parsed()) return cmd_potential(g, action, pa);
    if (plot->parsed()) return cmd_plot(g, plot_table);
  } catch (const GateFailure& e) {
    std::cerr << "gate failure: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const BatchError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
