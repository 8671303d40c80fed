#include "wos/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace wos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nearest point of pitch·Z inside the open set {x : lo2 < x^2 < hi2}.
// Returns the squared distance from `p` or +inf.
double nearest_on_line(double p, double pitch, double lo2, double hi2, long& best_index) {
  if (hi2 <= 0.0) return kInf;
  const double hi = std::sqrt(hi2);
  auto admissible = [&](long i) {
    const double x = static_cast<double>(i) * pitch;
    const double x2 = x * x;
    return x2 < hi2 && x2 > lo2;
  };
  double best = kInf;
  auto consider_range = [&](double a, double b) {
    // lattice indices in the open interval (a, b)
    long imin = static_cast<long>(std::floor(a / pitch)) + 1;
    long imax = static_cast<long>(std::ceil(b / pitch)) - 1;
    while (imin <= imax && !admissible(imin)) ++imin;
    while (imax >= imin && !admissible(imax)) --imax;
    if (imin > imax) return;
    const long c = std::clamp(static_cast<long>(std::llround(p / pitch)), imin, imax);
    for (long i : {c - 1, c, c + 1}) {
      if (i < imin || i > imax || !admissible(i)) continue;
      const double dx = p - static_cast<double>(i) * pitch;
      if (dx * dx < best) {
        best = dx * dx;
        best_index = i;
      }
    }
  };
  if (lo2 < 0.0) {
    consider_range(-hi, hi);
  } else {
    const double lo = std::sqrt(lo2);
    consider_range(-hi, -lo);
    consider_range(lo, hi);
  }
  return best;
}

struct ShellSearch {
  const Point& p;
  int k;
  double pitch;
  std::array<long, kMaxDim> current{};
  std::array<long, kMaxDim> best_index{};
  double best2 = kInf;

  void run(int level, double lo2, double hi2, double acc2) {
    if (hi2 <= 0.0) return;
    if (level == k - 1) {
      long idx = 0;
      const double d2 = nearest_on_line(p[level], pitch, lo2, hi2, idx);
      if (acc2 + d2 < best2) {
        best2 = acc2 + d2;
        current[static_cast<std::size_t>(level)] = idx;
        best_index = current;
      }
      return;
    }
    const double r = std::sqrt(hi2);
    const long imin = static_cast<long>(std::ceil(-r / pitch));
    const long imax = static_cast<long>(std::floor(r / pitch));
    if (imin > imax) return;
    const long i0 = std::clamp(static_cast<long>(std::llround(p[level] / pitch)), imin, imax);
    auto visit = [&](long i) {
      const double x = static_cast<double>(i) * pitch;
      const double dx = p[level] - x;
      const double d2 = acc2 + dx * dx;
      if (d2 >= best2) return false;
      current[static_cast<std::size_t>(level)] = i;
      run(level + 1, lo2 - x * x, hi2 - x * x, d2);
      return true;
    };
    for (long i = i0; i <= imax; ++i)
      if (!visit(i)) break;
    for (long i = i0 - 1; i >= imin; --i)
      if (!visit(i)) break;
  }
};

}  // namespace

std::optional<BoundaryWitness> nearest_lattice_point_in_shell(const Point& p, double pitch, double inner2,
                                                              double outer2) {
  if (!(pitch > 0.0)) throw ConfigError("lattice pitch must be positive");
  ShellSearch search{p, p.dim(), pitch};
  search.run(0, inner2, outer2, 0.0);
  if (!std::isfinite(search.best2)) return std::nullopt;
  Point g(p.dim());
  for (int i = 0; i < p.dim(); ++i) g[i] = static_cast<double>(search.best_index[static_cast<std::size_t>(i)]) * pitch;
  return BoundaryWitness{g, std::sqrt(search.best2)};
}

// ---------------------------------------------------------------------------

BoundaryWitness Domain::nearest_removed(const Point&) const {
  throw ConfigError("domain family '" + family() + "' has no removed set");
}

BoundaryWitness Domain::nearest_boundary(const Point& p) const {
  BoundaryWitness outer = outer_projection(p);
  if (has_removed_set()) {
    BoundaryWitness inner = nearest_removed(p);
    if (inner.distance < outer.distance) return inner;
  }
  return outer;
}

BoundaryWitness nearest_removed_point(const Domain& domain, const Point& p) {
  if (!domain.has_removed_set()) throw ConfigError("nearest_removed_point: domain has no removed set");
  return domain.nearest_removed(p);
}

// ---------------------------------------------------------------------------

double cantor_lambda(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw ConfigError("cantor_lambda: eta must lie in (0, 1)");
  // 1 - lambda = 2^(1 - 1/eta)
  return 1.0 - std::exp2(1.0 - 1.0 / eta);
}

CantorSet::CantorSet(double eta, int depth) : eta_(eta), depth_(depth), lambda_(0.0), scale_(0.0) {
  if (!(eta >= 0.0 && eta < 1.0)) throw ConfigError("Cantor dimension must lie in [0, 1)");
  if (eta > 0.0) {
    if (depth < 1 || depth > 60) throw ConfigError("Cantor depth must be in [1, 60]");
    lambda_ = cantor_lambda(eta);
    scale_ = (1.0 - lambda_) / 2.0;
  } else {
    depth_ = 0;
  }
}

double CantorSet::interval_length() const { return eta_ > 0.0 ? std::pow(scale_, depth_) : 0.0; }

double CantorSet::nearest(double t) const {
  if (eta_ == 0.0) return 0.0;
  double best_d = kInf;
  double best_x = 0.0;
  // branch and bound over the binary interval tree
  struct Node {
    double a;
    double len;
    int level;
  };
  std::array<Node, 128> stack{};
  std::size_t top = 0;
  stack[top++] = {0.0, 1.0, 0};
  while (top > 0) {
    const Node n = stack[--top];
    const double clamped = std::clamp(t, n.a, n.a + n.len);
    const double d = std::abs(t - clamped);
    if (d >= best_d) continue;
    if (n.level == depth_) {
      best_d = d;
      best_x = clamped;
      continue;
    }
    const double child = n.len * scale_;
    const Node left{n.a, child, n.level + 1};
    const Node right{n.a + n.len - child, child, n.level + 1};
    // push the farther child first so the nearer one is explored first
    const bool left_nearer = std::abs(t - (left.a + child / 2)) <= std::abs(t - (right.a + child / 2));
    stack[top++] = left_nearer ? right : left;
    stack[top++] = left_nearer ? left : right;
  }
  return best_x;
}

double CantorSet::distance(double t) const { return std::abs(t - nearest(t)); }

std::vector<std::pair<double, double>> CantorSet::intervals() const {
  std::vector<std::pair<double, double>> out{{0.0, eta_ > 0.0 ? 1.0 : 0.0}};
  for (int level = 0; level < depth_; ++level) {
    std::vector<std::pair<double, double>> next;
    next.reserve(out.size() * 2);
    for (auto [a, b] : out) {
      const double child = (b - a) * scale_;
      next.emplace_back(a, a + child);
      next.emplace_back(b - child, b);
    }
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------

BallDomain::BallDomain(int dim, double radius) : Domain(dim, radius), radius_(radius) {
  if (dim < 1 || dim > kMaxDim) throw ConfigError("ball_domain: dimension must be in [1, 6]");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("ball_domain: radius must be positive");
}

bool BallDomain::contains(const Point& p) const { return p.norm() < radius_; }

double BallDomain::distance(const Point& p) const { return std::abs(radius_ - p.norm()); }

BoundaryWitness BallDomain::outer_projection(const Point& p) const {
  const double r = p.norm();
  Point q(dim());
  if (r == 0.0) {
    q[0] = radius_;
  } else {
    q = p * (radius_ / r);
  }
  return {q, std::abs(radius_ - r)};
}

nlohmann::json BallDomain::params() const { return {{"dim", dim()}, {"radius", radius_}}; }

DomainPtr ball_domain(int dim, double radius) { return std::make_shared<BallDomain>(dim, radius); }

// ---------------------------------------------------------------------------

double PuncturedDiskParams::gamma() const {
  if (!(n > 1.0)) throw ConfigError("punctured_disk: n must exceed 1");
  return pitch_constant / std::sqrt(std::log(n));
}

PuncturedDiskDomain::PuncturedDiskDomain(PuncturedDiskParams params) : Domain(2, 1.0), params_(params), gamma_(0.0) {
  if (!(params.pitch_constant > 0.0)) throw ConfigError("punctured_disk: pitch_constant must be positive");
  if (!(params.n >= 3.0)) throw ConfigError("punctured_disk: n must be at least 3");
  gamma_ = params.gamma();
  if (!(gamma_ < 1.0 / 3.0)) {
    throw ConfigError("punctured_disk: pitch gamma = " + std::to_string(gamma_) +
                      " must be < 1/3; need log n > (3 * pitch_constant)^2 = " +
                      std::to_string(9.0 * params.pitch_constant * params.pitch_constant));
  }
  const long m = static_cast<long>(std::ceil((2.0 / 3.0) / gamma_));
  for (long i = -m; i <= m; ++i) {
    for (long j = -m; j <= m; ++j) {
      const Point g{static_cast<double>(i) * gamma_, static_cast<double>(j) * gamma_};
      const double r2 = g.norm2();
      if (r2 > 1.0 / 9.0 && r2 < 4.0 / 9.0) holes_.push_back(g);
    }
  }
  if (holes_.empty()) throw ConfigError("punctured_disk: annulus contains no grid point");
}

double PuncturedDiskDomain::outer_distance(const Point& p) const { return std::abs(1.0 - p.norm()); }

BoundaryWitness PuncturedDiskDomain::outer_projection(const Point& p) const {
  const double r = p.norm();
  return {r == 0.0 ? Point{1.0, 0.0} : p * (1.0 / r), std::abs(1.0 - r)};
}

BoundaryWitness PuncturedDiskDomain::nearest_removed(const Point& p) const {
  auto hit = nearest_lattice_point_in_shell(p, gamma_, 1.0 / 9.0, 4.0 / 9.0);
  return *hit;  // non-empty: checked at construction
}

double PuncturedDiskDomain::distance(const Point& p) const {
  const double outer = outer_distance(p);
  // holes all lie in |g| < 2/3, so they cannot beat the circle when |p| - 2/3 >= 1 - |p|
  if (p.norm() - 2.0 / 3.0 >= outer) return outer;
  return std::min(outer, nearest_removed(p).distance);
}

std::optional<Point> PuncturedDiskDomain::anchor_near(const Point& p) const {
  BoundaryWitness hole = nearest_removed(p);
  if (hole.distance < anchor_radius()) return hole.point;
  return std::nullopt;
}

double PuncturedDiskDomain::distance_from_anchor(const Point& anchor, const Point& offset) const {
  const double r = offset.norm();
  // every other hole is at least gamma - r away, farther than the anchor
  if (r < anchor_radius()) return std::min(outer_distance(anchor + offset), r);
  return distance(anchor + offset);
}

bool PuncturedDiskDomain::contains(const Point& p) const { return p.norm() < 1.0 && distance(p) > 0.0; }

nlohmann::json PuncturedDiskDomain::params() const {
  return {{"n", params_.n}, {"pitch_constant", params_.pitch_constant}, {"gamma", gamma_}, {"holes", holes_.size()}};
}

DomainPtr build_punctured_disk(PuncturedDiskParams params) { return std::make_shared<PuncturedDiskDomain>(params); }

// ---------------------------------------------------------------------------

int CantorCylinderParams::dim() const { return static_cast<int>(std::ceil(alpha - 1e-12)); }

double CantorCylinderParams::eta() const {
  const double e = static_cast<double>(dim()) - alpha;
  return e < 1e-12 ? 0.0 : e;
}

namespace {

CantorSet make_cantor(const CantorCylinderParams& p) {
  const double eta = p.eta();
  if (eta == 0.0) return CantorSet(0.0, 0);
  int depth = p.depth;
  if (depth <= 0) {
    const double tol = p.cantor_tolerance > 0.0 ? p.cantor_tolerance : p.gamma * 1e-3;
    const double scale = (1.0 - cantor_lambda(eta)) / 2.0;
    depth = 1;
    while (depth < 60 && p.gamma * std::pow(scale, depth) > tol) ++depth;
  }
  return CantorSet(eta, depth);
}

struct IndexRange {
  long lo;
  long hi;
};

// Lattice indices j with pitch·j in the set selected by `pred`, scanned
// inside [-limit, limit]; returns the maximal runs.
template <class Pred>
std::vector<IndexRange> index_runs(double pitch, double limit, Pred pred) {
  std::vector<IndexRange> runs;
  const long m = static_cast<long>(std::ceil(limit / pitch)) + 1;
  bool open = false;
  for (long j = -m; j <= m; ++j) {
    const bool in = pred(static_cast<double>(j) * pitch);
    if (in && !open) {
      runs.push_back({j, j});
      open = true;
    } else if (in) {
      runs.back().hi = j;
    } else {
      open = false;
    }
  }
  return runs;
}

}  // namespace

CantorCylinderDomain::CantorCylinderDomain(CantorCylinderParams params)
    : Domain(params.dim(), std::sqrt(2.0)), params_(params), cantor_(make_cantor(params)) {
  if (!(params.alpha > 2.0)) throw ConfigError("cantor_cylinder: alpha must exceed 2");
  if (params.dim() > kMaxDim) throw ConfigError("cantor_cylinder: ceil(alpha) must be <= 6");
  if (!(params.gamma > 0.0) || !(params.gamma < 1.0 / 24.0))
    throw ConfigError("cantor_cylinder: grid pitch gamma must lie in (0, 1/24)");
}

bool CantorCylinderDomain::in_shell(const Point& g) const {
  const int d = dim();
  double z2 = 0.0;
  for (int i = 0; i + 1 < d; ++i) z2 += g[i] * g[i];
  const double t = std::abs(g[d - 1]);
  const double z = std::sqrt(z2);
  if (params_.shell == ShellKind::Product)
    return z2 > 1.0 / 9.0 && z2 < 4.0 / 9.0 && t > 1.0 / 3.0 && t < 2.0 / 3.0;
  const double n = std::max(z, t);
  return n > 1.0 / 3.0 && n < 2.0 / 3.0;
}

std::vector<Point> CantorCylinderDomain::anchor_points() const {
  const int d = dim();
  const double g = params_.gamma;
  const long m = static_cast<long>(std::ceil((2.0 / 3.0) / g));
  std::vector<Point> out;
  std::array<long, kMaxDim> idx{};
  idx.fill(-m);
  while (true) {
    Point p(d);
    for (int i = 0; i < d; ++i) p[i] = static_cast<double>(idx[static_cast<std::size_t>(i)]) * g;
    if (in_shell(p)) out.push_back(p);
    int k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] > m) idx[static_cast<std::size_t>(k++)] = -m;
    if (k == d) break;
  }
  return out;
}

std::size_t CantorCylinderDomain::anchor_count() const { return anchor_points().size(); }

double CantorCylinderDomain::shell_volume() const {
  const int k = dim() - 1;
  // volume of the unit ball in R^k
  const double unit = std::pow(M_PI, k / 2.0) / std::tgamma(k / 2.0 + 1.0);
  auto cyl = [&](double r) { return unit * std::pow(r, k) * 2.0 * r; };  // B_r^k x [-r, r]
  if (params_.shell == ShellKind::Product) {
    return unit * (std::pow(2.0 / 3.0, k) - std::pow(1.0 / 3.0, k)) * (2.0 / 3.0);
  }
  return cyl(2.0 / 3.0) - cyl(1.0 / 3.0);
}

double CantorCylinderDomain::outer_distance(const Point& p) const {
  const int d = dim();
  double z2 = 0.0;
  for (int i = 0; i + 1 < d; ++i) z2 += p[i] * p[i];
  const double z = std::sqrt(z2);
  const double t = std::abs(p[d - 1]);
  if (z < 1.0 && t < 1.0) return std::min(1.0 - z, 1.0 - t);
  const double a = std::max(z - 1.0, 0.0);
  const double b = std::max(t - 1.0, 0.0);
  return std::sqrt(a * a + b * b);
}

BoundaryWitness CantorCylinderDomain::outer_projection(const Point& p) const {
  const int d = dim();
  double z2 = 0.0;
  for (int i = 0; i + 1 < d; ++i) z2 += p[i] * p[i];
  const double z = std::sqrt(z2);
  const double t = p[d - 1];
  Point q = p;
  auto project_side = [&] {
    if (z == 0.0) {
      q[0] = 1.0;
    } else {
      for (int i = 0; i + 1 < d; ++i) q[i] = p[i] / z;
    }
  };
  if (z < 1.0 && std::abs(t) < 1.0) {
    if (1.0 - z <= 1.0 - std::abs(t)) {
      project_side();
    } else {
      q[d - 1] = t >= 0.0 ? 1.0 : -1.0;
    }
  } else {
    if (z > 1.0) project_side();
    q[d - 1] = std::clamp(t, -1.0, 1.0);
  }
  return {q, outer_distance(p)};
}

BoundaryWitness CantorCylinderDomain::nearest_removed(const Point& p) const {
  const int d = dim();
  const double g = params_.gamma;
  Point pz(d - 1);
  for (int i = 0; i + 1 < d; ++i) pz[i] = p[i];
  const double pt = p[d - 1];

  struct Layer {
    double inner2;
    double outer2;
    std::vector<IndexRange> runs;
  };
  // Anchors are decomposed into horizontal layers t = j·gamma; each family of
  // layers shares one transverse shell, so its nearest transverse point is
  // computed once.
  std::vector<Layer> layers;
  const double third = 1.0 / 3.0;
  const double two_thirds = 2.0 / 3.0;
  auto mid = [&](double t) { return std::abs(t) > third && std::abs(t) < two_thirds; };
  if (params_.shell == ShellKind::Product) {
    layers.push_back({1.0 / 9.0, 4.0 / 9.0, index_runs(g, two_thirds, mid)});
  } else {
    layers.push_back({-1.0, 4.0 / 9.0, index_runs(g, two_thirds, mid)});
    layers.push_back({1.0 / 9.0, 4.0 / 9.0, index_runs(g, two_thirds, [&](double t) { return std::abs(t) <= third; })});
  }

  BoundaryWitness best{Point(d), kInf};
  for (const Layer& layer : layers) {
    auto transverse = nearest_lattice_point_in_shell(pz, g, layer.inner2, layer.outer2);
    if (!transverse) continue;
    const double h2 = transverse->distance * transverse->distance;
    const long j0 = static_cast<long>(std::floor(pt / g));
    for (const IndexRange& run : layer.runs) {
      for (long cand : {j0 - 1, j0, j0 + 1}) {
        const long j = std::clamp(cand, run.lo, run.hi);
        const double base = static_cast<double>(j) * g;
        const double vt = base + g * cantor_.nearest((pt - base) / g);
        const double dv = pt - vt;
        const double dist = std::sqrt(h2 + dv * dv);
        if (dist < best.distance) {
          Point q(d);
          for (int i = 0; i + 1 < d; ++i) q[i] = transverse->point[i];
          q[d - 1] = vt;
          best = {q, dist};
        }
      }
    }
  }
  return best;
}

double CantorCylinderDomain::distance(const Point& p) const {
  return std::min(outer_distance(p), nearest_removed(p).distance);
}

bool CantorCylinderDomain::contains(const Point& p) const {
  const int d = dim();
  double z2 = 0.0;
  for (int i = 0; i + 1 < d; ++i) z2 += p[i] * p[i];
  if (!(z2 < 1.0 && std::abs(p[d - 1]) < 1.0)) return false;
  return nearest_removed(p).distance > 0.0;
}

nlohmann::json CantorCylinderDomain::params() const {
  return {{"alpha", params_.alpha},
          {"gamma", params_.gamma},
          {"dim", dim()},
          {"eta", params_.eta()},
          {"depth", cantor_.depth()},
          {"shell", params_.shell == ShellKind::Product ? "product" : "separating"}};
}

DomainPtr build_cantor_cylinder(CantorCylinderParams params) {
  return std::make_shared<CantorCylinderDomain>(params);
}

// ---------------------------------------------------------------------------

DomainPtr domain_from_json(const nlohmann::json& spec) {
  try {
    const std::string family = spec.at("family").get<std::string>();
    const nlohmann::json params = spec.value("params", nlohmann::json::object());
    if (family == "ball") {
      return ball_domain(params.value("dim", 2), params.value("radius", 1.0));
    }
    if (family == "punctured_disk") {
      PuncturedDiskParams p;
      p.n = params.at("n").get<double>();
      p.pitch_constant = params.value("pitch_constant", 4.0);
      return build_punctured_disk(p);
    }
    if (family == "cantor_cylinder") {
      CantorCylinderParams p;
      p.alpha = params.value("alpha", 3.0);
      p.gamma = params.at("gamma").get<double>();
      p.depth = params.value("depth", 0);
      p.cantor_tolerance = params.value("cantor_tolerance", 0.0);
      const std::string shell = params.value("shell", std::string("separating"));
      if (shell == "separating") {
        p.shell = ShellKind::Separating;
      } else if (shell == "product") {
        p.shell = ShellKind::Product;
      } else {
        throw ConfigError("cantor_cylinder: shell must be 'separating' or 'product'");
      }
      return build_cantor_cylinder(p);
    }
    throw ConfigError("unknown domain family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed domain spec: ") + e.what());
  }
}

}  // namespace wos
