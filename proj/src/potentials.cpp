#include "wos/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_alpha(double alpha, int d) {
  if (d < 1 || d > kMaxDim) throw ConfigError("dimension must be in [1, 6]");
  if (!(alpha > 0.0 && alpha <= d)) throw ConfigError("alpha must lie in (0, d]");
}

void check_dim(const DiscreteMeasure& mu, int d) {
  if (!mu.empty() && mu.dim() != d) throw ConfigError("measure dimension does not match d");
}

// (1/p) sum w |z-y|^{-p} for p > 0, sum w log(1/|z-y|) for p = 0.
double kernel_sum(const DiscreteMeasure& mu, const Point& y, double p) {
  double s = 0.0;
  for (const Atom& a : mu.atoms()) {
    if (a.weight == 0.0) continue;
    const double r = distance(a.point, y);
    if (r == 0.0) return kInf;
    s += p > 0.0 ? a.weight * std::pow(r, -p) : -a.weight * std::log(r);
  }
  return p > 0.0 ? s / p : s;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("measure dimension must be in [1, 6]");
}

DiscreteMeasure::DiscreteMeasure(int dim, std::vector<Atom> atoms) : DiscreteMeasure(dim) {
  atoms_.reserve(atoms.size());
  for (const Atom& a : atoms) add(a.point, a.weight);
}

void DiscreteMeasure::add(const Point& p, double weight) {
  if (dim_ == 0) dim_ = p.dim();
  if (p.dim() != dim_) throw ConfigError("atom dimension does not match the measure");
  if (!p.finite()) throw ConfigError("atom coordinates must be finite");
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw ConfigError("atom weights must be finite and non-negative");
  atoms_.push_back({p, weight});
  total_ += weight;
}

DiscreteMeasure DiscreteMeasure::scaled(double s) const {
  if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("scale must be finite and non-negative");
  DiscreteMeasure out(dim_ > 0 ? dim_ : 1);
  out.dim_ = dim_;
  for (const Atom& a : atoms_) out.add(a.point, a.weight * s);
  return out;
}

DiscreteMeasure DiscreteMeasure::mapped(const std::function<Point(const Point&)>& f) const {
  DiscreteMeasure out;
  out.dim_ = dim_;
  out.atoms_.reserve(atoms_.size());
  for (const Atom& a : atoms_) out.add(f(a.point), a.weight);
  return out;
}

double DiscreteMeasure::min_spacing() const {
  double best = kInf;
  for (std::size_t i = 0; i < atoms_.size(); ++i)
    for (std::size_t j = i + 1; j < atoms_.size(); ++j) {
      const double r = distance2(atoms_[i].point, atoms_[j].point);
      if (r > 0.0) best = std::min(best, r);
    }
  return std::sqrt(best);
}

// ---------------------------------------------------------------------------

double riesz_potential(const DiscreteMeasure& mu, const Point& y, double alpha, int d) {
  check_alpha(alpha, d);
  check_dim(mu, d);
  if (y.dim() != d) throw ConfigError("evaluation point dimension does not match d");
  return kernel_sum(mu, y, d - alpha);
}

double ball_mass(const DiscreteMeasure& mu, const Point& y, double r) {
  if (!(r >= 0.0)) throw ConfigError("ball radius must be non-negative");
  const double r2 = r * r;
  double m = 0.0;
  for (const Atom& a : mu.atoms())
    if (distance2(a.point, y) <= r2) m += a.weight;
  return m;
}

double riesz_potential_from_profile(const DiscreteMeasure& mu, const Point& y, double alpha, int d) {
  check_alpha(alpha, d);
  check_dim(mu, d);
  std::vector<std::pair<double, double>> shells;
  shells.reserve(mu.size());
  for (const Atom& a : mu.atoms()) {
    if (a.weight == 0.0) continue;
    shells.emplace_back(distance(a.point, y), a.weight);
  }
  if (shells.empty()) return 0.0;
  std::sort(shells.begin(), shells.end());
  if (shells.front().first == 0.0) return kInf;
  // merge equal radii: the closed-ball mass jumps once per distinct radius
  std::vector<double> radius;
  std::vector<double> mass;  // mu(B(y, r)) on [radius[i], radius[i+1])
  double acc = 0.0;
  for (auto [r, w] : shells) {
    acc += w;
    if (!radius.empty() && radius.back() == r) {
      mass.back() = acc;
    } else {
      radius.push_back(r);
      mass.push_back(acc);
    }
  }
  const double total = acc;
  const double beta = d - alpha;
  double u = 0.0;
  if (beta > 0.0) {
    for (std::size_t i = 0; i < radius.size(); ++i) {
      const double hi = i + 1 < radius.size() ? std::pow(radius[i + 1], -beta) : 0.0;
      u += mass[i] * (std::pow(radius[i], -beta) - hi);
    }
    return u / beta;
  }
  for (std::size_t i = 0; i < radius.size(); ++i) {
    const double lo = radius[i];
    const double hi = i + 1 < radius.size() ? radius[i + 1] : kInf;
    const double near_hi = std::min(hi, 1.0);
    if (near_hi > lo) u += mass[i] * (std::log(near_hi) - std::log(lo));
    const double far_lo = std::max(lo, 1.0);
    const double deficit = total - mass[i];
    if (hi > far_lo && deficit > 0.0) u -= deficit * (std::log(hi) - std::log(far_lo));
  }
  // [0, radius[0]) carries no mass; [1, radius[0]) has deficit = total
  if (radius[0] > 1.0) u -= total * std::log(radius[0]);
  return u;
}

// ---------------------------------------------------------------------------

nlohmann::json ClassMReport::to_json() const {
  return {{"alpha", alpha},
          {"resolution_floor", resolution_floor},
          {"max_violation_ratio", std::isfinite(max_violation_ratio) ? nlohmann::json(max_violation_ratio)
                                                                      : nlohmann::json("inf")},
          {"support_in_domain_count", support_in_domain_count},
          {"support_outside_ball2_count", support_outside_ball2_count},
          {"balls_tested", balls_tested},
          {"worst_center", worst_center.to_vector()},
          {"worst_radius", worst_radius},
          {"vacuous", vacuous},
          {"in_class_M", in_class_M()}};
}

double class_M_certificate(const DiscreteMeasure& mu, double alpha, double floor) {
  const int d = mu.dim();
  check_alpha(alpha, d);
  if (!(floor > 0.0)) throw ConfigError("class-M certificate needs a positive floor");
  const double beta = d - alpha;
  const double r0 = 2.0 * floor;
  const auto& atoms = mu.atoms();
  double worst = 0.0;
  std::vector<std::pair<double, double>> ring;
  for (const Atom& a : atoms) {
    ring.clear();
    for (const Atom& b : atoms) ring.emplace_back(distance(a.point, b.point), b.weight);
    std::sort(ring.begin(), ring.end());
    double mass = 0.0;
    std::size_t i = 0;
    for (; i < ring.size() && ring[i].first <= r0; ++i) mass += ring[i].second;
    worst = std::max(worst, mass / std::pow(r0, beta));
    while (i < ring.size()) {
      const double r = ring[i].first;
      for (; i < ring.size() && ring[i].first <= r; ++i) mass += ring[i].second;
      worst = std::max(worst, mass / std::pow(r, beta));
    }
  }
  return std::exp2(beta) * worst;
}

ClassMReport verify_class_M(const DiscreteMeasure& mu, const Domain& domain, double alpha, std::uint64_t n_balls,
                            SeededStream stream, const ClassMOptions& options) {
  const int d = domain.dim();
  check_alpha(alpha, d);
  check_dim(mu, d);
  if (n_balls == 0) throw ConfigError("verify_class_M: n_balls must be at least 1");
  ClassMReport report;
  report.alpha = alpha;
  report.tolerance = options.tolerance;
  report.worst_center = Point::zero(d);
  if (mu.empty()) {
    report.vacuous = true;
    return report;
  }
  const double spacing = mu.min_spacing();
  double floor = 0.0;
  if (options.resolution_floor) {
    floor = *options.resolution_floor;
    if (!(floor >= 0.0)) throw ConfigError("resolution floor must be non-negative");
  } else if (std::isfinite(spacing)) {
    floor = spacing / 2.0;
  }
  report.resolution_floor = floor;
  const double beta = d - alpha;

  auto account = [&](const Point& c, double r, double mass) {
    ++report.balls_tested;
    double ratio;
    if (r == 0.0) {
      ratio = mass > 0.0 ? (beta > 0.0 ? kInf : mass) : 0.0;
    } else {
      ratio = mass / std::pow(r, beta);
    }
    if (report.balls_tested == 1 || ratio > report.max_violation_ratio) {
      report.max_violation_ratio = ratio;
      report.worst_center = c;
      report.worst_radius = r;
    }
  };

  const auto& atoms = mu.atoms();
  const std::size_t n = atoms.size();
  for (const Atom& a : atoms) {
    if (domain.contains(a.point)) ++report.support_in_domain_count;
    if (a.point.norm() > 2.0 * (1.0 + 1e-12)) ++report.support_outside_ball2_count;
  }

  // atom-centred balls at the floor and at the nearest-neighbour radii
  const std::size_t keep = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(0, options.neighbour_radii)) + 2);
  std::vector<std::pair<double, double>> dist(n);
  for (const Atom& a : atoms) {
    for (std::size_t j = 0; j < n; ++j) dist[j] = {distance(atoms[j].point, a.point), atoms[j].weight};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(keep), dist.end());
    auto mass_at = [&](double r) {
      double m = 0.0;
      std::size_t i = 0;
      for (; i < keep && dist[i].first <= r; ++i) m += dist[i].second;
      if (i == keep && keep < n) m = ball_mass(mu, a.point, r);
      return m;
    };
    account(a.point, floor, mass_at(floor));
    for (std::size_t k = 1; k < keep && k <= static_cast<std::size_t>(options.neighbour_radii); ++k) {
      const double r = std::max(dist[k].first, floor);
      account(a.point, r, mass_at(r));
    }
  }

  // random balls, half around atoms, half anywhere in [-2, 2]^d
  const double lo = std::max(std::isfinite(spacing) ? spacing / 2.0 : 1e-3, floor > 0.0 ? floor : 0.0);
  const double log_lo = std::log(std::max(lo, 1e-300));
  const double log_hi = std::log(4.0);
  for (std::uint64_t b = 0; b < n_balls; ++b) {
    const double r = std::max(floor, std::exp(stream.uniform(std::min(log_lo, log_hi), log_hi)));
    Point c(d);
    if (b % 2 == 0) {
      const Atom& a = atoms[static_cast<std::size_t>(stream.next_u64() % n)];
      c = a.point + sample_unit_direction(stream, d) * (r * stream.uniform());
    } else {
      for (int i = 0; i < d; ++i) c[i] = stream.uniform(-2.0, 2.0);
    }
    account(c, r, ball_mass(mu, c, r));
  }
  return report;
}

// ---------------------------------------------------------------------------

double amalgamation_factor(int k, double alpha, int d) {
  if (k <= 3) return 0.0;
  return 1.0 - std::exp2(static_cast<double>(4 - k) * (d - alpha));
}

int amalgamation_annulus(double dist, double d_y) {
  if (!(d_y > 0.0)) throw ConfigError("amalgamation: d_y must be positive");
  int k = 1;
  if (dist > 2.0 * d_y) k = std::max(1, static_cast<int>(std::ceil(std::log2(dist / d_y))));
  while (k > 1 && dist <= std::ldexp(d_y, k - 1)) --k;
  while (dist > std::ldexp(d_y, k)) ++k;
  return k;
}

DiscreteMeasure amalgamate(const DiscreteMeasure& mu, const DiscreteMeasure& mu_x, const Point& y, double d_y,
                           double alpha, int d) {
  check_alpha(alpha, d);
  check_dim(mu, d);
  check_dim(mu_x, d);
  if (!(d_y > 0.0) || !std::isfinite(d_y)) throw ConfigError("amalgamation: d_y must be positive");
  DiscreteMeasure nu(d);
  const double r1 = 2.0 * d_y;
  for (const Atom& a : mu_x.atoms())
    if (distance(a.point, y) <= r1) nu.add(a.point, a.weight);
  for (const Atom& a : mu.atoms()) {
    const double f = amalgamation_factor(amalgamation_annulus(distance(a.point, y), d_y), alpha, d);
    if (f > 0.0) nu.add(a.point, a.weight * f);
  }
  return nu;
}

// ---------------------------------------------------------------------------

LaplacianCheck laplacian_identity_check(const DiscreteMeasure& mu, const Point& y, double alpha, int d, double h) {
  check_alpha(alpha, d);
  check_dim(mu, d);
  if (!(alpha < d)) throw ConfigError("laplacian check needs alpha < d");
  if (!(h > 0.0)) throw ConfigError("stencil spacing must be positive");
  for (const Atom& a : mu.atoms())
    if (a.weight > 0.0 && distance(a.point, y) < 10.0 * h) throw ConfigError("stencil touches an atom");
  const double p = d - alpha;
  const double u0 = kernel_sum(mu, y, p);
  double lap = 0.0;
  for (int i = 0; i < d; ++i) {
    Point a = y, b = y;
    a[i] += h;
    b[i] -= h;
    lap += (kernel_sum(mu, a, p) - 2.0 * u0 + kernel_sum(mu, b, p)) / (h * h);
  }
  LaplacianCheck out;
  out.fd_laplacian = lap;
  out.rhs = (d - alpha + 2.0) * (2.0 - alpha) * kernel_sum(mu, y, p + 2.0);
  const double diff = std::abs(out.fd_laplacian - out.rhs);
  out.rel_err = out.rhs != 0.0 ? diff / std::abs(out.rhs) : diff;
  return out;
}

EnergyBoundCheck energy_bound_check(const DiscreteMeasure& mu, const Domain& domain, const Point& y, double alpha,
                                    const ClassMReport& report) {
  const int d = domain.dim();
  check_alpha(alpha, d);
  check_dim(mu, d);
  if (!domain.contains(y)) throw ConfigError("energy bound: y must lie in the domain");
  if (!report.in_class_M() || report.alpha != alpha) throw ConfigError("energy bound: measure is not class-M verified");
  const double dy = domain.distance(y);
  if (!mu.empty() && report.resolution_floor > dy / 10.0)
    throw ConfigError("energy bound: resolution floor exceeds d(y)/10");
  EnergyBoundCheck out;
  const double beta = d - alpha;
  if (alpha <= 2.0) {
    out.value = riesz_potential(mu, y, alpha, d);
    out.bound = std::log(2.0 / dy);
    if (beta > 0.0) {
      out.correction = mu.total_mass() / (beta * std::pow(2.0, beta));
      out.bound += out.correction;
    }
  } else {
    out.value = riesz_potential(mu, y, 2.0, d);
    out.bound = std::pow(dy, 2.0 - alpha) / (alpha - 2.0);
  }
  out.ok = out.value <= out.bound * (1.0 + 1e-12) + 1e-300;
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json DriftReport::to_json() const {
  nlohmann::json bj = nlohmann::json::array();
  for (const DriftBin& b : bins)
    bj.push_back({{"u_lo", b.u_lo},
                  {"u_hi", b.u_hi},
                  {"count", b.count},
                  {"populated", b.populated},
                  {"mean_increment", b.mean_increment},
                  {"se_increment", b.se_increment},
                  {"mean_sq_increment", b.mean_sq_increment},
                  {"se_sq_increment", b.se_sq_increment}});
  return {{"alpha", alpha},         {"k", k}, {"newton", newton}, {"samples", samples}, {"bins", bj},
          {"mean_increment", mean_increment}, {"se_increment", se_increment}};
}

namespace {

void mean_se(const std::vector<double>& v, std::size_t lo, std::size_t hi, double& mean, double& se) {
  const double n = static_cast<double>(hi - lo);
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += v[i];
  mean = s / n;
  double ss = 0.0;
  for (std::size_t i = lo; i < hi; ++i) ss += (v[i] - mean) * (v[i] - mean);
  se = n > 1.0 ? std::sqrt(ss / (n - 1.0) / n) : kInf;
}

}  // namespace

DriftReport drift_probe(const Domain& domain, const MeasureSelector& selector, const WosConfig& config,
                        const Point& x0, int k, std::uint64_t n_walks, double alpha, const DriftOptions& options) {
  const int d = domain.dim();
  check_alpha(alpha, d);
  if (k < 1) throw ConfigError("drift probe: k must be at least 1");
  if (options.bins < 1) throw ConfigError("drift probe: at least one bin");
  const int stride = options.stride.value_or(k);
  if (stride < 1) throw ConfigError("drift probe: stride must be positive");
  WosConfig cfg = config;
  cfg.keep_trajectory = true;
  const bool newton = alpha > 2.0;
  const double kernel_alpha = newton ? 2.0 : alpha;

  std::vector<WalkResult> walks = run_batch(domain, cfg, x0, n_walks, options.seed, options.workers);
  std::vector<std::vector<std::pair<double, double>>> per_walk(walks.size());
  const auto n = static_cast<long long>(walks.size());
#ifdef _OPENMP
  const int threads = options.workers > 0 ? options.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
#endif
  for (long long w = 0; w < n; ++w) {
    const WalkResult& r = walks[static_cast<std::size_t>(w)];
    auto& out = per_walk[static_cast<std::size_t>(w)];
    for (std::uint64_t t = 0; t < r.steps; t += static_cast<std::uint64_t>(stride)) {
      const Point& xt = r.trajectory[t];
      const Point& xs = r.trajectory[std::min<std::uint64_t>(t + static_cast<std::uint64_t>(k), r.steps)];
      auto mu = selector(xt);
      const double u0 = riesz_potential(*mu, xt, kernel_alpha, d);
      const double u1 = riesz_potential(*mu, xs, kernel_alpha, d);
      if (std::isfinite(u0) && std::isfinite(u1)) out.emplace_back(u0, u1 - u0);
    }
  }

  std::vector<std::pair<double, double>> samples;
  for (auto& v : per_walk) samples.insert(samples.end(), v.begin(), v.end());
  DriftReport rep;
  rep.alpha = alpha;
  rep.k = k;
  rep.newton = newton;
  rep.samples = samples.size();
  if (samples.empty()) return rep;
  std::vector<double> inc(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) inc[i] = samples[i].second;
  mean_se(inc, 0, inc.size(), rep.mean_increment, rep.se_increment);

  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> sorted_inc(samples.size()), sorted_sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sorted_inc[i] = samples[i].second;
    sorted_sq[i] = samples[i].second * samples[i].second;
  }
  const std::size_t m = samples.size();
  for (int b = 0; b < options.bins; ++b) {
    const std::size_t lo = m * static_cast<std::size_t>(b) / static_cast<std::size_t>(options.bins);
    const std::size_t hi = m * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(options.bins);
    DriftBin bin;
    bin.count = hi - lo;
    if (hi > lo) {
      bin.u_lo = samples[lo].first;
      bin.u_hi = samples[hi - 1].first;
    }
    bin.populated = bin.count >= options.min_bin_count;
    if (bin.populated) {
      mean_se(sorted_inc, lo, hi, bin.mean_increment, bin.se_increment);
      mean_se(sorted_sq, lo, hi, bin.mean_sq_increment, bin.se_sq_increment);
    }
    rep.bins.push_back(bin);
  }
  return rep;
}

}  // namespace wos
