#include "wos/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "wos/io.hpp"

namespace wos {

namespace {

constexpr double kZ95 = 1.959963984540054;

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation.
double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m), v.end());
  const double hi = v[m];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (lo + hi);
}

double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
}

struct Line {
  double a = 0.0;
  double b = 0.0;
};

Line ols(const std::vector<double>& x, const std::vector<double>& y, std::size_t n) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("fit_rate: predictor is constant");
  const double a = sxy / sxx;
  return {a, my - a * mx};
}

double predictor(RateModel m, double L) { return m == RateModel::Log2 ? L * L : L; }

ModelFit fit_model(RateModel m, const std::vector<double>& L, const std::vector<double>& y, std::size_t n) {
  std::vector<double> x(L.size()), r(y.size());
  for (std::size_t i = 0; i < L.size(); ++i) {
    x[i] = predictor(m, L[i]);
    r[i] = m == RateModel::Power ? std::log(y[i]) : y[i];
  }
  const Line line = ols(x, r, n);
  ModelFit f;
  f.model = m;
  f.a = line.a;
  f.b = line.b;
  f.theta = m == RateModel::Power ? line.a : 0.0;
  return f;
}

double power_theta(const std::vector<double>& L, const std::vector<double>& y) {
  return fit_model(RateModel::Power, L, y, L.size()).theta;
}

nlohmann::json point_json(const Point& p) { return p.to_vector(); }

Point point_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Point(std::span<const double>(v));
}

BinomialGate binomial_gate(std::uint64_t hits, std::uint64_t trials, double bound, bool upper) {
  BinomialGate g;
  g.trials = trials;
  g.hits = hits;
  g.fraction = trials ? static_cast<double>(hits) / static_cast<double>(trials) : 0.0;
  g.bound = bound;
  g.se = trials ? std::sqrt(bound * (1.0 - bound) / static_cast<double>(trials)) : 0.0;
  g.ci = wilson_interval(hits, trials);
  g.passed = upper ? g.fraction <= bound + 3.0 * g.se : g.fraction >= bound - 3.0 * g.se;
  return g;
}

nlohmann::json gate_json(const BinomialGate& g) {
  return {{"trials", g.trials}, {"hits", g.hits},   {"fraction", g.fraction}, {"bound", g.bound},
          {"se", g.se},         {"ci_lo", g.ci.lo}, {"ci_hi", g.ci.hi},       {"passed", g.passed}};
}

const char* const kSweepColumns[] = {"epsilon",     "resolution",   "walks",     "mean_steps",
                                     "sd_steps",    "se_steps",     "ci_lo",     "ci_hi",
                                     "median_steps", "exhausted",   "exhausted_fraction",
                                     "outer_exit_fraction", "removed_exit_fraction"};

}  // namespace

nlohmann::json config_to_json(const WosConfig& c) {
  return {{"beta", c.beta},
          {"epsilon", c.epsilon},
          {"jump_fraction", c.jump_fraction},
          {"max_steps", c.max_steps},
          {"mode", to_string(c.mode)},
          {"experimental_jump_fraction", c.experimental_jump_fraction}};
}

WosConfig config_from_json(const nlohmann::json& j) {
  WosConfig c;
  try {
    c.beta = j.value("beta", c.beta);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.jump_fraction = j.value("jump_fraction", c.jump_fraction);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.mode = estimator_mode_from_string(j.value("mode", std::string("exact")));
    c.experimental_jump_fraction = j.value("experimental_jump_fraction", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed walk config: ") + e.what());
  }
  c.validate();
  return c;
}

const char* to_string(ExitClass c) {
  switch (c) {
    case ExitClass::Outer:
      return "outer";
    case ExitClass::Removed:
      return "removed";
    case ExitClass::Censored:
      return "censored";
  }
  return "unknown";
}

ExitClass classify_exit(const Domain& domain, const WalkResult& walk, double epsilon) {
  if (walk.terminated_by == Termination::MaxSteps) return ExitClass::Censored;
  if (!domain.has_removed_set()) return ExitClass::Outer;
  if (walk.anchored_exit && walk.exit_offset.norm() <= epsilon) return ExitClass::Removed;
  const double removed = domain.nearest_removed(walk.exit_point).distance;
  const double outer = domain.outer_distance(walk.exit_point);
  return removed < outer ? ExitClass::Removed : ExitClass::Outer;
}

// ---------------------------------------------------------------------------

void SweepPlan::validate() const {
  if (schedule.empty()) throw ConfigError("sweep plan: schedule is empty");
  if (walks_per_point < 100) throw ConfigError("sweep plan: walks_per_point must be at least 100");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i].epsilon > 0.0)) throw ConfigError("sweep plan: epsilon must be positive");
    if (i > 0 && !(schedule[i].epsilon < schedule[i - 1].epsilon))
      throw ConfigError("sweep plan: epsilon must be strictly decreasing");
    const DomainPtr dom = domain_from_json(schedule[i].domain);
    if (dom->dim() != x0.dim()) throw ConfigError("sweep plan: x0 dimension does not match the domain");
    if (!dom->contains(x0)) throw ConfigError("sweep plan: x0 lies outside the domain");
  }
  WosConfig c = config;
  c.epsilon = schedule.front().epsilon;
  c.validate();
}

nlohmann::json SweepPlan::to_json() const {
  nlohmann::json sched = nlohmann::json::array();
  for (const auto& p : schedule) sched.push_back({{"domain", p.domain}, {"epsilon", p.epsilon}});
  nlohmann::json cfg = config_to_json(config);
  cfg.erase("epsilon");
  return {{"schedule", sched},
          {"x0", point_json(x0)},
          {"walks_per_point", walks_per_point},
          {"config", cfg},
          {"seed", seed}};
}

SweepPlan SweepPlan::from_json(const nlohmann::json& j) {
  SweepPlan plan;
  try {
    for (const auto& p : j.at("schedule")) {
      SchedulePoint sp;
      sp.domain = p.at("domain");
      if (p.contains("epsilon")) {
        sp.epsilon = p.at("epsilon").get<double>();
      } else {
        sp.epsilon = 1.0 / p.at("n").get<double>();
      }
      plan.schedule.push_back(sp);
    }
    plan.x0 = point_from_json(j.at("x0"));
    plan.walks_per_point = j.value("walks_per_point", plan.walks_per_point);
    nlohmann::json cfg = j.value("config", nlohmann::json::object());
    if (!cfg.contains("epsilon") && !plan.schedule.empty()) cfg["epsilon"] = plan.schedule.front().epsilon;
    plan.config = config_from_json(cfg);
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.workers = j.value("workers", 0);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed sweep plan: ") + e.what());
  }
  return plan;
}

SweepRow summarize_batch(const Domain& domain, const std::vector<WalkResult>& walks, double epsilon) {
  SweepRow row;
  row.epsilon = epsilon;
  row.walks = walks.size();
  std::vector<double> steps;
  steps.reserve(walks.size());
  std::uint64_t outer = 0, removed = 0;
  for (const auto& w : walks) {
    steps.push_back(static_cast<double>(w.steps));
    switch (classify_exit(domain, w, epsilon)) {
      case ExitClass::Outer:
        ++outer;
        break;
      case ExitClass::Removed:
        ++removed;
        break;
      case ExitClass::Censored:
        ++row.exhausted;
        break;
    }
  }
  const double n = static_cast<double>(walks.size());
  row.mean_steps = mean_of(steps);
  row.sd_steps = sd_of(steps, row.mean_steps);
  row.se_steps = n > 0 ? row.sd_steps / std::sqrt(n) : 0.0;
  row.ci_lo = row.mean_steps - kZ95 * row.se_steps;
  row.ci_hi = row.mean_steps + kZ95 * row.se_steps;
  row.median_steps = median_of(std::move(steps));
  row.exhausted_fraction = n > 0 ? static_cast<double>(row.exhausted) / n : 0.0;
  row.outer_exit_fraction = n > 0 ? static_cast<double>(outer) / n : 0.0;
  row.removed_exit_fraction = n > 0 ? static_cast<double>(removed) / n : 0.0;
  return row;
}

SweepTable run_sweep(const SweepPlan& plan) {
  plan.validate();
  SweepTable table;
  table.plan = plan.to_json();
  for (const auto& point : plan.schedule) {
    const DomainPtr dom = domain_from_json(point.domain);
    WosConfig cfg = plan.config;
    cfg.epsilon = point.epsilon;
    const auto walks = run_batch(*dom, cfg, plan.x0, plan.walks_per_point, plan.seed, plan.workers);
    table.rows.push_back(summarize_batch(*dom, walks, point.epsilon));
    if (table.rows.back().exhausted_fraction > kCensoringThreshold) table.censored = true;
  }
  return table;
}

std::string SweepTable::csv_body() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < std::size(kSweepColumns); ++i) os << (i ? "," : "") << kSweepColumns[i];
  os << '\n';
  for (const auto& r : rows) {
    os << format_double(r.epsilon) << ',' << format_double(r.resolution()) << ',' << r.walks << ','
       << format_double(r.mean_steps) << ',' << format_double(r.sd_steps) << ',' << format_double(r.se_steps) << ','
       << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ',' << format_double(r.median_steps) << ','
       << r.exhausted << ',' << format_double(r.exhausted_fraction) << ',' << format_double(r.outer_exit_fraction)
       << ',' << format_double(r.removed_exit_fraction) << '\n';
  }
  return os.str();
}

std::string SweepTable::to_csv(const nlohmann::json& extra) const {
  nlohmann::json meta = {{"kind", "sweep"}, {"seed", plan.value("seed", std::uint64_t{0})},
                         {"censored", censored}, {"plan", plan}};
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  return "# " + meta.dump() + "\n" + csv_body();
}

SweepTable SweepTable::from_csv(const std::string& text) {
  auto [meta, body] = split_csv_metadata(text);
  SweepTable table;
  if (meta.is_object()) {
    table.plan = meta.value("plan", nlohmann::json::object());
    table.censored = meta.value("censored", false);
  }
  const auto rows = parse_csv_rows(body);
  if (rows.empty()) throw ConfigError("sweep table: missing header row");
  const auto& header = rows.front();
  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("sweep table: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> idx;
  for (const char* c : kSweepColumns) idx.push_back(column(c));
  try {
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& f = rows[r];
      if (f.size() != header.size()) throw ConfigError("sweep table: row " + std::to_string(r) + " has wrong width");
      SweepRow row;
      row.epsilon = std::stod(f[idx[0]]);
      row.walks = std::stoull(f[idx[2]]);
      row.mean_steps = std::stod(f[idx[3]]);
      row.sd_steps = std::stod(f[idx[4]]);
      row.se_steps = std::stod(f[idx[5]]);
      row.ci_lo = std::stod(f[idx[6]]);
      row.ci_hi = std::stod(f[idx[7]]);
      row.median_steps = std::stod(f[idx[8]]);
      row.exhausted = std::stoull(f[idx[9]]);
      row.exhausted_fraction = std::stod(f[idx[10]]);
      row.outer_exit_fraction = std::stod(f[idx[11]]);
      row.removed_exit_fraction = std::stod(f[idx[12]]);
      if (row.exhausted_fraction > kCensoringThreshold) table.censored = true;
      table.rows.push_back(row);
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError(std::string("sweep table: malformed number: ") + e.what());
  }
  return table;
}

// ---------------------------------------------------------------------------

const char* to_string(RateModel m) {
  switch (m) {
    case RateModel::Log:
      return "log";
    case RateModel::Log2:
      return "log2";
    case RateModel::Power:
      return "power";
  }
  return "unknown";
}

double ModelFit::predict(double L) const {
  if (model == RateModel::Power) return std::exp(b + theta * L);
  return a * predictor(model, L) + b;
}

nlohmann::json RateFit::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : models)
    ms.push_back({{"model", to_string(m.model)},
                  {"a", m.a},
                  {"b", m.b},
                  {"theta", m.theta},
                  {"rss", m.rss},
                  {"holdout_residual", m.holdout_residual}});
  nlohmann::json j = {{"models", ms},       {"selected", to_string(selected)}, {"margin", margin},
                      {"theta", theta},     {"theta_ci", {theta_ci_lo, theta_ci_hi}},
                      {"points", points}};
  j["alpha_hint"] = alpha_hint ? nlohmann::json(*alpha_hint) : nlohmann::json(nullptr);
  j["expected_theta"] = expected_theta ? nlohmann::json(*expected_theta) : nlohmann::json(nullptr);
  return j;
}

RateFit fit_rate(const std::vector<double>& resolution, const std::vector<double>& mean,
                 const std::vector<double>& se, std::optional<double> alpha_hint, const FitOptions& options) {
  const std::size_t n = resolution.size();
  if (mean.size() != n || se.size() != n) throw ConfigError("fit_rate: column lengths differ");
  if (n < std::max<std::size_t>(options.min_points, 3))
    throw ConfigError("fit_rate: need at least " + std::to_string(std::max<std::size_t>(options.min_points, 3)) +
                      " points, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return resolution[a] < resolution[b]; });
  std::vector<double> L(n), y(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(resolution[order[i]] > 1.0)) throw ConfigError("fit_rate: resolution 1/epsilon must exceed 1");
    if (!(mean[order[i]] > 0.0)) throw ConfigError("fit_rate: mean steps must be positive");
    L[i] = std::log(resolution[order[i]]);
    y[i] = mean[order[i]];
    s[i] = se[order[i]];
  }
  for (std::size_t i = 1; i < n; ++i)
    if (!(L[i] > L[i - 1])) throw ConfigError("fit_rate: resolutions must be distinct");
  const double octaves = (L.back() - L.front()) / std::numbers::ln2;
  if (octaves + 1e-9 < options.min_octaves)
    throw ConfigError("fit_rate: schedule spans " + std::to_string(octaves) + " octaves, need " +
                      std::to_string(options.min_octaves));
  if (*std::max_element(y.begin(), y.end()) == *std::min_element(y.begin(), y.end()))
    throw ConfigError("fit_rate: response is constant");

  RateFit out;
  out.points = n;
  out.alpha_hint = alpha_hint;
  if (alpha_hint && *alpha_hint > 2.0) out.expected_theta = 2.0 - 4.0 / *alpha_hint;
  const RateModel all[] = {RateModel::Log, RateModel::Log2, RateModel::Power};
  for (std::size_t k = 0; k < 3; ++k) {
    ModelFit full = fit_model(all[k], L, y, n);
    for (std::size_t i = 0; i < n; ++i) full.rss += std::pow(y[i] - full.predict(L[i]), 2);
    const ModelFit held = fit_model(all[k], L, y, n - 1);
    full.holdout_residual = std::abs(y[n - 1] - held.predict(L[n - 1]));
    out.models[k] = full;
  }
  std::array<std::size_t, 3> rank{0, 1, 2};
  std::sort(rank.begin(), rank.end(),
            [&](std::size_t a, std::size_t b) { return out.models[a].holdout_residual < out.models[b].holdout_residual; });
  out.selected = all[rank[0]];
  const double best = out.models[rank[0]].holdout_residual;
  const double second = out.models[rank[1]].holdout_residual;
  out.margin = best > 0.0 ? second / best : std::numeric_limits<double>::infinity();

  out.theta = out.model(RateModel::Power).theta;
  out.theta_ci_lo = out.theta_ci_hi = out.theta;
  if (options.bootstrap > 0) {
    SeededStream rng(options.seed, 0x62006f6f74ULL);
    std::vector<double> thetas;
    thetas.reserve(options.bootstrap);
    std::vector<double> yb(n);
    const double floor = 1e-300;
    for (std::uint64_t r = 0; r < options.bootstrap; ++r) {
      for (std::size_t i = 0; i < n; ++i) yb[i] = std::max(y[i] + s[i] * rng.normal(), floor);
      thetas.push_back(power_theta(L, yb));
    }
    out.theta_ci_lo = quantile_of(thetas, 0.025);
    out.theta_ci_hi = quantile_of(thetas, 0.975);
  }
  return out;
}

RateFit fit_rate(const SweepTable& table, std::optional<double> alpha_hint, const FitOptions& options) {
  if (table.censored && !options.force)
    throw ConfigError("fit_rate: table is censored (more than 1% of walks hit max_steps at some point)");
  std::vector<double> res, mean, se;
  for (const auto& r : table.rows) {
    if (r.exhausted_fraction > kCensoringThreshold) continue;
    res.push_back(r.resolution());
    mean.push_back(r.mean_steps);
    se.push_back(r.se_steps);
  }
  return fit_rate(res, mean, se, alpha_hint, options);
}

double reselection_rate(const RateFit& fit, const std::vector<double>& resolution, const std::vector<double>& se,
                        std::uint64_t replicates, std::uint64_t seed, const FitOptions& options) {
  if (replicates == 0) throw ConfigError("reselection_rate: replicates must be positive");
  const ModelFit& m = fit.model(fit.selected);
  SeededStream rng(seed, 0x7265ULL);
  FitOptions inner = options;
  inner.bootstrap = 0;
  std::uint64_t hits = 0;
  std::vector<double> y(resolution.size());
  for (std::uint64_t r = 0; r < replicates; ++r) {
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = std::max(m.predict(std::log(resolution[i])) + se[i] * rng.normal(), 1e-300);
    if (fit_rate(resolution, y, se, std::nullopt, inner).selected == fit.selected) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(replicates);
}

// ---------------------------------------------------------------------------

double chi_square_quantile_999(int df) {
  if (df < 1) throw ConfigError("chi-square degrees of freedom must be positive");
  return boost::math::quantile(boost::math::chi_squared_distribution<double>(df), 0.999);
}

double ks_critical_999(std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw ConfigError("KS critical value needs nonempty samples");
  const double c = std::sqrt(-0.5 * std::log(0.0005));
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS statistic needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    dmax = std::max(dmax, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return dmax;
}

Wilson wilson_interval(std::uint64_t successes, std::uint64_t n) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = kZ95 * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {successes == 0 ? 0.0 : std::max(0.0, centre - half), successes == n ? 1.0 : std::min(1.0, centre + half)};
}

nlohmann::json GoFReport::to_json() const {
  return {{"d", d},           {"x0", point_json(x0)}, {"walks", walks},         {"statistic", statistic},
          {"counts", counts}, {"expected", expected}, {"chi_square", chi_square}, {"df", df},
          {"critical", critical}, {"tv", tv},         {"tv_limit", tv_limit},   {"passed", passed}};
}

namespace {

double poisson_kernel_2d(const Point& x, double theta) {
  const double dx = std::cos(theta) - x[0], dy = std::sin(theta) - x[1];
  return (1.0 - x.norm2()) / (2.0 * std::numbers::pi * (dx * dx + dy * dy));
}

std::vector<double> poisson_bins_2d(const Point& x, int bins) {
  const int sub = 64;
  std::vector<double> p(static_cast<std::size_t>(bins));
  const double w = 2.0 * std::numbers::pi / bins;
  for (int b = 0; b < bins; ++b) {
    const double lo = b * w, h = w / sub;
    double s = poisson_kernel_2d(x, lo) + poisson_kernel_2d(x, lo + w);
    for (int i = 1; i < sub; ++i) s += (i % 2 ? 4.0 : 2.0) * poisson_kernel_2d(x, lo + i * h);
    p[static_cast<std::size_t>(b)] = s * h / 3.0;
  }
  return p;
}

int octant(const Point& p) { return (p[0] < 0 ? 1 : 0) | (p[1] < 0 ? 2 : 0) | (p[2] < 0 ? 4 : 0); }

// Midpoint rule on a (theta, phi) grid whose lines include the octant boundaries.
std::vector<double> poisson_octants_3d(const Point& x) {
  const int nt = 360, np = 720;
  std::vector<double> p(8, 0.0);
  const double ht = std::numbers::pi / nt, hp = 2.0 * std::numbers::pi / np;
  const double c = (1.0 - x.norm2()) / (4.0 * std::numbers::pi);
  for (int i = 0; i < nt; ++i) {
    const double t = (i + 0.5) * ht;
    for (int j = 0; j < np; ++j) {
      const double f = (j + 0.5) * hp;
      const Point z{std::sin(t) * std::cos(f), std::sin(t) * std::sin(f), std::cos(t)};
      const double r = distance(z, x);
      p[static_cast<std::size_t>(octant(z))] += c / (r * r * r) * std::sin(t) * ht * hp;
    }
  }
  return p;
}

}  // namespace

GoFReport exit_distribution_test(int d, const Point& x0, std::uint64_t n_walks, std::uint64_t seed,
                                 const ExitTestOptions& options) {
  if (d != 2 && d != 3) throw ConfigError("exit_distribution_test: d must be 2 or 3");
  if (x0.dim() != d) throw ConfigError("exit_distribution_test: x0 dimension mismatch");
  if (!(x0.norm() < 1.0)) throw ConfigError("exit_distribution_test: x0 must lie inside the unit ball");
  GoFReport rep;
  rep.d = d;
  rep.x0 = x0;
  rep.walks = n_walks;
  const bool centre = x0.norm2() == 0.0;
  const int bins = d == 2 ? options.bins : 8;
  if (bins < 2) throw ConfigError("exit_distribution_test: need at least 2 bins");
  if (centre) {
    rep.expected.assign(static_cast<std::size_t>(bins), 1.0 / bins);
  } else {
    rep.expected = d == 2 ? poisson_bins_2d(x0, bins) : poisson_octants_3d(x0);
    double total = 0.0;
    for (double p : rep.expected) total += p;
    for (double& p : rep.expected) p /= total;
  }
  const double nw = static_cast<double>(n_walks);
  for (double p : rep.expected)
    if (p * nw < 5.0)
      throw ConfigError("exit_distribution_test: expected count below 5 in some bin; use more walks or fewer bins");

  const DomainPtr ball = ball_domain(d, 1.0);
  WosConfig cfg;
  cfg.epsilon = options.epsilon;
  const auto walks = run_batch(*ball, cfg, x0, n_walks, seed, options.workers);
  rep.counts.assign(static_cast<std::size_t>(bins), 0);
  for (const auto& w : walks) {
    if (w.terminated_by == Termination::MaxSteps) throw ConfigError("exit_distribution_test: censored walk");
    std::size_t b;
    if (d == 2) {
      double a = std::atan2(w.exit_point[1], w.exit_point[0]);
      if (a < 0.0) a += 2.0 * std::numbers::pi;
      b = static_cast<std::size_t>(std::floor(a / (2.0 * std::numbers::pi) * bins));
      if (b >= static_cast<std::size_t>(bins)) b = 0;
    } else {
      b = static_cast<std::size_t>(octant(w.exit_point));
    }
    ++rep.counts[b];
  }
  for (std::size_t b = 0; b < rep.counts.size(); ++b) {
    const double e = rep.expected[b] * nw;
    const double o = static_cast<double>(rep.counts[b]);
    rep.chi_square += (o - e) * (o - e) / e;
    rep.tv += 0.5 * std::abs(o / nw - rep.expected[b]);
  }
  rep.df = bins - 1;
  rep.critical = chi_square_quantile_999(rep.df);
  if (centre) {
    rep.statistic = "chi_square";
    rep.passed = rep.chi_square < rep.critical;
  } else {
    rep.statistic = "total_variation";
    rep.passed = rep.tv <= rep.tv_limit;
  }
  return rep;
}

nlohmann::json MartingaleReport::to_json() const {
  nlohmann::json j = {{"x0", point_json(x0)},
                      {"mean_exit", mean_exit},
                      {"se_exit", se_exit},
                      {"mean_ok", mean_ok},
                      {"mean_sum_sq_jumps", mean_sum_sq_jumps},
                      {"se_sum_sq_jumps", se_sum_sq_jumps},
                      {"second_moment_gain", second_moment_gain},
                      {"paired_gap", paired_gap},
                      {"paired_gap_se", paired_gap_se},
                      {"second_moment_ok", second_moment_ok},
                      {"passed", passed}};
  j["ball_bound"] = ball_bound ? nlohmann::json(*ball_bound) : nlohmann::json(nullptr);
  return j;
}

MartingaleReport martingale_test(const Domain& domain, const WosConfig& config, const Point& x0,
                                 std::uint64_t n_walks, std::uint64_t seed, int workers) {
  if (n_walks < 2) throw ConfigError("martingale_test: need at least 2 walks");
  const auto walks = run_batch(domain, config, x0, n_walks, seed, workers);
  for (const auto& w : walks)
    if (w.terminated_by == Termination::MaxSteps) throw ConfigError("martingale_test: censored batch");
  MartingaleReport rep;
  rep.x0 = x0;
  const int d = x0.dim();
  const double n = static_cast<double>(n_walks);
  rep.mean_ok = true;
  for (int i = 0; i < d; ++i) {
    std::vector<double> c;
    c.reserve(walks.size());
    for (const auto& w : walks) c.push_back(w.exit_point[i]);
    const double m = mean_of(c);
    const double se = sd_of(c, m) / std::sqrt(n);
    rep.mean_exit.push_back(m);
    rep.se_exit.push_back(se);
    if (std::abs(m - x0[i]) > 3.0 * se) rep.mean_ok = false;
  }
  std::vector<double> sq, gain, gap;
  for (const auto& w : walks) {
    const double q = w.exit_point.norm2() - x0.norm2();
    sq.push_back(w.sum_sq_jumps);
    gain.push_back(q);
    gap.push_back(w.sum_sq_jumps - q);
  }
  rep.mean_sum_sq_jumps = mean_of(sq);
  rep.se_sum_sq_jumps = sd_of(sq, rep.mean_sum_sq_jumps) / std::sqrt(n);
  rep.second_moment_gain = mean_of(gain);
  rep.paired_gap = mean_of(gap);
  rep.paired_gap_se = sd_of(gap, rep.paired_gap) / std::sqrt(n);
  // Exact martingale identity gives gap 0; allow rounding on top of 3 SE.
  rep.second_moment_ok = rep.paired_gap <= 3.0 * rep.paired_gap_se + 1e-12;
  if (const auto* ball = dynamic_cast<const BallDomain*>(&domain)) {
    rep.ball_bound = ball->radius() * ball->radius() - x0.norm2();
    if (rep.mean_sum_sq_jumps > *rep.ball_bound + 3.0 * rep.se_sum_sq_jumps) rep.second_moment_ok = false;
  }
  rep.passed = rep.mean_ok && rep.second_moment_ok;
  return rep;
}

nlohmann::json HoleTerminationReport::to_json() const {
  return {{"log_n", log_n},
          {"gamma", gamma},
          {"holes", holes},
          {"walks", walks},
          {"hole_fraction", hole_fraction},
          {"circle_fraction", circle_fraction},
          {"censored_fraction", censored_fraction},
          {"mean_steps", mean_steps},
          {"gate", gate_json(gate)}};
}

HoleTerminationReport hole_termination_test(double log_n, std::uint64_t n_walks, std::uint64_t seed,
                                            const HoleTestOptions& options) {
  if (!(log_n > 0.0) || !std::isfinite(log_n)) throw ConfigError("hole_termination_test: log n must be positive");
  if (log_n > 700.0) throw ConfigError("hole_termination_test: n overflows double precision");
  PuncturedDiskParams p;
  p.n = std::exp(log_n);
  p.pitch_constant = options.pitch_constant;
  const auto dom = std::make_shared<PuncturedDiskDomain>(p);
  WosConfig cfg;
  cfg.epsilon = 1.0 / p.n;
  cfg.max_steps = options.max_steps;
  const auto walks = run_batch(*dom, cfg, Point::zero(2), n_walks, seed, options.workers);
  std::uint64_t hole = 0, circle = 0, censored = 0;
  double steps = 0.0;
  for (const auto& w : walks) {
    steps += static_cast<double>(w.steps);
    switch (classify_exit(*dom, w, cfg.epsilon)) {
      case ExitClass::Removed:
        ++hole;
        break;
      case ExitClass::Outer:
        ++circle;
        break;
      case ExitClass::Censored:
        ++censored;
        break;
    }
  }
  HoleTerminationReport rep;
  rep.log_n = log_n;
  rep.gamma = dom->gamma();
  rep.holes = dom->removed_points().size();
  rep.walks = n_walks;
  const double n = static_cast<double>(n_walks);
  rep.hole_fraction = static_cast<double>(hole) / n;
  rep.circle_fraction = static_cast<double>(circle) / n;
  rep.censored_fraction = static_cast<double>(censored) / n;
  rep.mean_steps = steps / n;
  rep.gate = binomial_gate(hole, n_walks, 1.0 / 8.0, true);
  return rep;
}

nlohmann::json BigJumpReport::to_json() const {
  return {{"threshold", threshold}, {"limit", limit}, {"mean_count", mean_count}, {"gate", gate_json(gate)}};
}

BigJumpReport big_jump_test(const Domain& domain, const WosConfig& config, const Point& x0, double threshold,
                            std::uint64_t n_walks, std::uint64_t seed, int workers) {
  if (!(threshold > 0.0)) throw ConfigError("big_jump_test: threshold must be positive");
  WosConfig cfg = config;
  cfg.jumps = JumpRetention::Full;
  const auto walks = run_batch(domain, cfg, x0, n_walks, seed, workers);
  BigJumpReport rep;
  rep.threshold = threshold;
  rep.limit = 4.0 / (threshold * threshold);
  std::uint64_t over = 0;
  double total = 0.0;
  for (const auto& w : walks) {
    const auto c = big_jump_count(w, threshold);
    total += static_cast<double>(c);
    if (static_cast<double>(c) > rep.limit) ++over;
  }
  rep.mean_count = total / static_cast<double>(n_walks);
  rep.gate = binomial_gate(over, n_walks, 0.25, true);
  return rep;
}

// ---------------------------------------------------------------------------

nlohmann::json LowerBound2Report::to_json() const {
  return {{"fit", fit.to_json()},
          {"ratio_spread", ratio_spread},
          {"c_hat", c_hat},
          {"median_smallest", median_smallest},
          {"threshold_smallest", threshold_smallest},
          {"model_ok", model_ok},
          {"spread_ok", spread_ok},
          {"median_ok", median_ok},
          {"passed", passed}};
}

LowerBound2Report lower_bound_alpha2(const std::vector<double>& n_schedule, std::uint64_t walks, std::uint64_t seed,
                                     const LowerBound2Options& options) {
  if (n_schedule.size() < 2) throw ConfigError("lower_bound_alpha2: schedule needs at least 2 values of n");
  SweepPlan plan;
  plan.x0 = Point::zero(2);
  plan.walks_per_point = walks;
  plan.seed = seed;
  plan.workers = options.workers;
  for (double n : n_schedule) {
    PuncturedDiskParams p{n, options.pitch_constant};
    build_punctured_disk(p);
    plan.schedule.push_back(
        {{{"family", "punctured_disk"}, {"params", {{"n", n}, {"pitch_constant", options.pitch_constant}}}},
         1.0 / n});
  }
  plan.config.epsilon = plan.schedule.front().epsilon;

  LowerBound2Report rep;
  rep.table = run_sweep(plan);
  FitOptions fo = options.fit;
  fo.seed = seed;
  rep.fit = fit_rate(rep.table, 2.0, fo);
  rep.model_ok = rep.fit.selected == RateModel::Log2 && rep.fit.margin >= 2.0;

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rep.table.rows) {
    const double L = std::log(r.resolution());
    const double ratio = r.mean_steps / (L * L);
    lo = std::min(lo, ratio);
    hi = std::max(hi, ratio);
  }
  rep.ratio_spread = hi / lo;
  rep.spread_ok = rep.ratio_spread <= 3.0;

  const double n0 = n_schedule.front();
  const double L0 = std::log(n0);
  const auto dom = build_punctured_disk({n0, options.pitch_constant});
  WosConfig cfg = plan.config;
  cfg.epsilon = 1.0 / n0;
  const std::uint64_t pilot_seed = seed ^ 0x9E3779B97F4A7C15ULL;
  const auto pilot = run_batch(*dom, cfg, plan.x0, options.pilot_walks, pilot_seed, options.workers);
  std::vector<double> ps;
  for (const auto& w : pilot) ps.push_back(static_cast<double>(w.steps));
  rep.c_hat = quantile_of(ps, options.pilot_quantile) / (L0 * L0);
  rep.median_smallest = rep.table.rows.front().median_steps;
  rep.threshold_smallest = rep.c_hat * L0 * L0;
  rep.median_ok = rep.median_smallest > rep.threshold_smallest;
  rep.passed = rep.model_ok && rep.spread_ok && rep.median_ok && !rep.table.censored;
  return rep;
}

double cylinder_gamma(double alpha, double n) { return 8.0 * std::pow(n, 2.0 / alpha - 1.0) * (1.0 + 1e-6); }

double minimal_cylinder_n(double alpha) {
  if (!(alpha > 2.0)) throw ConfigError("cylinder schedule: alpha must exceed 2");
  // 8 n^{2/alpha-1}(1+1e-6) < 1/24  <=>  n > (192(1+1e-6))^{alpha/(alpha-2)}
  return std::pow(192.0 * (1.0 + 1e-6), alpha / (alpha - 2.0));
}

std::vector<double> cylinder_schedule(double alpha, int points) {
  if (points < 1) throw ConfigError("cylinder schedule: need at least one point");
  int k = static_cast<int>(std::ceil(std::log2(minimal_cylinder_n(alpha))));
  while (!(cylinder_gamma(alpha, std::ldexp(1.0, k)) < 1.0 / 24.0)) ++k;
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(std::ldexp(1.0, k + i));
  return out;
}

nlohmann::json LowerBoundGt2Report::to_json() const {
  return {{"alpha", alpha},         {"fit", fit.to_json()},          {"theta", theta},
          {"expected_theta", expected_theta}, {"wall_fraction", wall_fraction}, {"theta_ok", theta_ok},
          {"wall_ok", wall_ok},     {"passed", passed}};
}

LowerBoundGt2Report lower_bound_alpha_gt2(double alpha, const std::vector<double>& n_schedule, std::uint64_t walks,
                                          std::uint64_t seed, const LowerBoundGt2Options& options) {
  if (!(alpha > 2.0)) throw ConfigError("lower_bound_alpha_gt2: alpha must exceed 2");
  if (n_schedule.empty()) throw ConfigError("lower_bound_alpha_gt2: empty schedule");
  const double n_min = minimal_cylinder_n(alpha);
  SweepPlan plan;
  plan.walks_per_point = walks;
  plan.seed = seed;
  plan.workers = options.workers;
  for (double n : n_schedule) {
    if (!(n > n_min))
      throw ConfigError("lower_bound_alpha_gt2: n = " + format_double(n) + " is below the admissible minimum " +
                        format_double(n_min));
    const double eps = 1.0 / n;
    nlohmann::json params = {{"alpha", alpha},
                             {"gamma", cylinder_gamma(alpha, n)},
                             {"cantor_tolerance", eps / 2.0},
                             {"shell", options.shell == ShellKind::Product ? "product" : "separating"}};
    plan.schedule.push_back({{{"family", "cantor_cylinder"}, {"params", params}}, eps});
  }
  plan.x0 = Point::zero(static_cast<int>(std::ceil(alpha - 1e-12)));
  plan.config.epsilon = plan.schedule.front().epsilon;

  LowerBoundGt2Report rep;
  rep.alpha = alpha;
  rep.table = run_sweep(plan);
  FitOptions fo = options.fit;
  fo.seed = seed;
  rep.fit = fit_rate(rep.table, alpha, fo);
  rep.theta = rep.fit.theta;
  rep.expected_theta = 2.0 - 4.0 / alpha;
  rep.theta_ok = std::abs(rep.theta - rep.expected_theta) <= options.tolerance;
  rep.wall_ok = true;
  for (const auto& r : rep.table.rows) {
    rep.wall_fraction.push_back(r.outer_exit_fraction);
    if (r.outer_exit_fraction < options.wall_min) rep.wall_ok = false;
  }
  rep.passed = rep.theta_ok && rep.wall_ok && !rep.table.censored;
  return rep;
}

}  // namespace wos
