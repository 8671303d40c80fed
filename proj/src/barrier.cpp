#include <algorithm>
#include <cmath>
#include <sstream>

#include "wos/potentials.hpp"

namespace wos {

namespace {

constexpr double kThird = 1.0 / 3.0;

double half_diagonal(int level, int d) { return DyadicGrid::side(level) * std::sqrt(static_cast<double>(d)) / 2.0; }

// Axis-aligned box [lo, lo + side]^d.
struct Box {
  Point lo;
  double side;

  double hi(int i) const { return lo[i] + side; }
};

Box box_of(const DyadicGrid& grid, const DyadicCube& c) { return {grid.lower(c), DyadicGrid::side(c.level)}; }

// Closest and farthest point of the box to the origin, over the first k coordinates.
void radial_extent(const Box& b, int k, double& rmin, double& rmax) {
  double a = 0.0, f = 0.0;
  for (int i = 0; i < k; ++i) {
    const double lo = b.lo[i], hi = b.hi(i);
    const double c = std::clamp(0.0, lo, hi);
    a += c * c;
    const double far = std::max(std::abs(lo), std::abs(hi));
    f += far * far;
  }
  rmin = std::sqrt(a);
  rmax = std::sqrt(f);
}

Point farthest_corner(const Box& b, int k, Point p) {
  for (int i = 0; i < k; ++i) p[i] = std::abs(b.lo[i]) > std::abs(b.hi(i)) ? b.lo[i] : b.hi(i);
  return p;
}

Point box_center(const Box& b) {
  Point c = b.lo;
  for (int i = 0; i < c.dim(); ++i) c[i] += b.side / 2.0;
  return c;
}

bool in_box(const Box& b, const Point& p) {
  for (int i = 0; i < p.dim(); ++i)
    if (p[i] < b.lo[i] || p[i] > b.hi(i)) return false;
  return true;
}

// Closed exterior of an analytic outer boundary.
class Exterior {
 public:
  virtual ~Exterior() = default;
  virtual Coverage classify(const Box& b) const = 0;
  virtual Point representative(const Box& b) const = 0;
};

class BallExterior final : public Exterior {
 public:
  explicit BallExterior(double radius) : r_(radius) {}

  Coverage classify(const Box& b) const override {
    double rmin, rmax;
    radial_extent(b, b.lo.dim(), rmin, rmax);
    if (rmin >= r_) return Coverage::Full;
    if (rmax < r_) return Coverage::Empty;
    return Coverage::Partial;
  }

  Point representative(const Box& b) const override {
    const Point c = box_center(b);
    const double n = c.norm();
    if (n >= r_) return c;
    if (n > 0.0) {
      Point q = c * (r_ / n);
      for (int i = 0; i < 4 && q.norm() < r_; ++i) q *= 1.0 + 0x1p-52;
      if (q.norm() >= r_ && in_box(b, q)) return q;
    }
    return farthest_corner(b, b.lo.dim(), c);
  }

 private:
  double r_;
};

// Complement of B(0,1)_{d-1} x (-1, 1).
class CylinderExterior final : public Exterior {
 public:
  Coverage classify(const Box& b) const override {
    const int d = b.lo.dim();
    double zmin, zmax;
    radial_extent(b, d - 1, zmin, zmax);
    const double tlo = b.lo[d - 1], thi = b.hi(d - 1);
    const double tmin = (tlo <= 0.0 && thi >= 0.0) ? 0.0 : std::min(std::abs(tlo), std::abs(thi));
    const double tmax = std::max(std::abs(tlo), std::abs(thi));
    if (zmin >= 1.0 || tmin >= 1.0) return Coverage::Full;
    if (zmax < 1.0 && tmax < 1.0) return Coverage::Empty;
    return Coverage::Partial;
  }

  Point representative(const Box& b) const override {
    const int d = b.lo.dim();
    Point c = box_center(b);
    const double tlo = b.lo[d - 1], thi = b.hi(d - 1);
    if (std::max(std::abs(tlo), std::abs(thi)) >= 1.0) {
      c[d - 1] = std::abs(tlo) > std::abs(thi) ? tlo : thi;
      return c;
    }
    return farthest_corner(b, d - 1, c);
  }
};

std::uint64_t interleave(const std::array<std::int64_t, kMaxDim>& off, int d, int bits) {
  std::uint64_t key = 0;
  for (int b = bits - 1; b >= 0; --b)
    for (int i = 0; i < d; ++i) key = (key << 1) | ((static_cast<std::uint64_t>(off[static_cast<std::size_t>(i)]) >> b) & 1u);
  return key;
}

// Finite point set (plus an optional analytic exterior) with Morton-ordered
// range queries over the dyadic tree below the root cube.
class PointSetSampler final : public ComplementSampler {
 public:
  using Generator = std::function<std::vector<Point>(const Box& root, double finest_side)>;

  PointSetSampler(std::unique_ptr<Exterior> exterior, Generator gen)
      : exterior_(std::move(exterior)), gen_(std::move(gen)) {}

  void prepare(const DyadicGrid& grid, const DyadicCube& root, int finest) override {
    const int d = grid.dim();
    root_ = root;
    finest_ = finest;
    bits_ = finest - root.level;
    if (d * bits_ > 63) throw ConfigError("barrier depth too large for this dimension");
    keys_.clear();
    points_.clear();
    const Box rb = box_of(grid, root);
    std::vector<std::pair<std::uint64_t, Point>> tagged;
    for (const Point& p : gen_(rb, DyadicGrid::side(finest))) {
      const DyadicCube top = grid.containing(p, root.level);
      if (!(top == root)) continue;
      const DyadicCube leaf = grid.containing(p, finest);
      tagged.emplace_back(key_of(leaf, d), p);
    }
    std::stable_sort(tagged.begin(), tagged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [k, p] : tagged) {
      keys_.push_back(k);
      points_.push_back(p);
    }
  }

  Coverage classify(const DyadicGrid& grid, const DyadicCube& cube) const override {
    Coverage ext = exterior_ ? exterior_->classify(box_of(grid, cube)) : Coverage::Empty;
    if (ext == Coverage::Full) return ext;
    auto [lo, hi] = range(cube, grid.dim());
    if (lo < hi) return Coverage::Partial;
    return ext;
  }

  Point representative(const DyadicGrid& grid, const DyadicCube& cube) const override {
    auto [lo, hi] = range(cube, grid.dim());
    if (lo < hi) return points_[lo];
    return exterior_->representative(box_of(grid, cube));
  }

  std::size_t point_count() const { return points_.size(); }

 private:
  std::uint64_t key_of(const DyadicCube& c, int d) const {
    std::array<std::int64_t, kMaxDim> off{};
    const int shift = c.level - root_.level;
    for (int i = 0; i < d; ++i)
      off[static_cast<std::size_t>(i)] = c.index[static_cast<std::size_t>(i)] - (root_.index[static_cast<std::size_t>(i)] << shift);
    return interleave(off, d, shift);
  }

  std::pair<std::size_t, std::size_t> range(const DyadicCube& c, int d) const {
    const int rest = d * (finest_ - c.level);
    const std::uint64_t first = key_of(c, d) << rest;
    const std::uint64_t last = first + (std::uint64_t{1} << rest);
    const auto a = std::lower_bound(keys_.begin(), keys_.end(), first);
    const auto b = std::lower_bound(a, keys_.end(), last);
    return {static_cast<std::size_t>(a - keys_.begin()), static_cast<std::size_t>(b - keys_.begin())};
  }

  std::unique_ptr<Exterior> exterior_;
  Generator gen_;
  DyadicCube root_;
  int finest_ = 0;
  int bits_ = 0;
  std::vector<std::uint64_t> keys_;
  std::vector<Point> points_;
};

// Any domain: a cube is empty when its centre is interior and farther than
// the half-diagonal from the boundary.
class GreedySampler final : public ComplementSampler {
 public:
  explicit GreedySampler(DomainPtr domain) : domain_(std::move(domain)) {}

  Coverage classify(const DyadicGrid& grid, const DyadicCube& cube) const override {
    const Point c = grid.center(cube);
    if (domain_->contains(c) && domain_->distance(c) > half_diagonal(cube.level, grid.dim())) return Coverage::Empty;
    return Coverage::Partial;
  }

  Point representative(const DyadicGrid& grid, const DyadicCube& cube) const override {
    const Point c = grid.center(cube);
    if (!domain_->contains(c)) return c;
    return domain_->nearest_boundary(c).point;
  }

  bool exact() const override { return false; }

 private:
  DomainPtr domain_;
};

// Lattice points gamma·Z^d with lo[i] <= p[i] <= hi[i] that satisfy `keep`.
template <class Keep>
std::vector<Point> lattice_in_range(const Point& lo_c, const Point& hi_c, double gamma, Keep keep) {
  const int d = lo_c.dim();
  std::array<long, kMaxDim> lo{}, hi{}, idx{};
  for (std::size_t i = 0; i < static_cast<std::size_t>(d); ++i) {
    lo[i] = static_cast<long>(std::ceil(lo_c[static_cast<int>(i)] / gamma));
    hi[i] = static_cast<long>(std::floor(hi_c[static_cast<int>(i)] / gamma));
    if (lo[i] > hi[i]) return {};
  }
  idx = lo;
  std::vector<Point> out;
  while (true) {
    Point p(d);
    for (int i = 0; i < d; ++i) p[i] = static_cast<double>(idx[static_cast<std::size_t>(i)]) * gamma;
    if (keep(p)) out.push_back(p);
    std::size_t k = 0;
    while (k < static_cast<std::size_t>(d) && ++idx[k] > hi[k]) {
      idx[k] = lo[k];
      ++k;
    }
    if (k == static_cast<std::size_t>(d)) break;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

DyadicGrid::DyadicGrid(const Point& x) : origin_(x) {
  for (int i = 0; i < x.dim(); ++i) origin_[i] -= kThird;
}

Point DyadicGrid::lower(const DyadicCube& c) const {
  Point p = origin_;
  const double s = side(c.level);
  for (int i = 0; i < dim(); ++i) p[i] += static_cast<double>(c.index[static_cast<std::size_t>(i)]) * s;
  return p;
}

Point DyadicGrid::center(const DyadicCube& c) const {
  Point p = lower(c);
  const double h = side(c.level) / 2.0;
  for (int i = 0; i < dim(); ++i) p[i] += h;
  return p;
}

DyadicCube DyadicGrid::containing(const Point& p, int level) const {
  DyadicCube c;
  c.level = level;
  const double scale = std::ldexp(1.0, level);
  for (int i = 0; i < dim(); ++i)
    c.index[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor((p[i] - origin_[i]) * scale));
  return c;
}

DyadicCube DyadicGrid::parent(const DyadicCube& c) const {
  DyadicCube q = c;
  q.level = c.level - 1;
  for (int i = 0; i < dim(); ++i) q.index[static_cast<std::size_t>(i)] >>= 1;  // floor division by 2
  return q;
}

bool DyadicGrid::contains(const DyadicCube& c, const Point& p) const { return in_box(box_of(*this, c), p); }

std::vector<std::size_t> BarrierMeasure::level(int k) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cubes.size(); ++i)
    if (cubes[i].cube.level == k) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<ComplementSampler> make_complement_sampler(const DomainPtr& domain, ContentMethod method) {
  if (!domain) throw ConfigError("complement sampler: null domain");
  if (method == ContentMethod::Greedy) return std::make_unique<GreedySampler>(domain);

  if (auto ball = std::dynamic_pointer_cast<const BallDomain>(domain)) {
    return std::make_unique<PointSetSampler>(std::make_unique<BallExterior>(ball->radius()),
                                             [](const Box&, double) { return std::vector<Point>{}; });
  }
  if (auto disk = std::dynamic_pointer_cast<const PuncturedDiskDomain>(domain)) {
    return std::make_unique<PointSetSampler>(std::make_unique<BallExterior>(1.0), [disk](const Box& b, double) {
      std::vector<Point> out;
      for (const Point& h : disk->removed_points())
        if (in_box(b, h)) out.push_back(h);
      return out;
    });
  }
  if (auto cyl = std::dynamic_pointer_cast<const CantorCylinderDomain>(domain)) {
    return std::make_unique<PointSetSampler>(std::make_unique<CylinderExterior>(), [cyl](const Box& b, double finest) {
      const int d = cyl->dim();
      const double g = cyl->gamma();
      const CantorSet& full = cyl->cantor();
      Point lo = b.lo, hi = b.lo;
      for (int i = 0; i < d; ++i) hi[i] = b.hi(i);
      if (full.eta() > 0.0) lo[d - 1] -= g;  // attachments reach gamma above their anchor
      std::vector<Point> anchors = lattice_in_range(lo, hi, g, [&](const Point& p) { return cyl->in_shell(p); });
      if (full.eta() == 0.0) return anchors;
      // cover intervals no longer than the finest cube side
      const double scale = (1.0 - full.lambda()) / 2.0;
      int depth = 1;
      while (depth < full.depth() && g * std::pow(scale, depth) > finest) ++depth;
      const auto intervals = CantorSet(full.eta(), depth).intervals();
      std::vector<Point> out;
      for (const Point& a : anchors)
        for (auto [s0, e0] : intervals)
          for (double t : {s0, e0}) {
            Point q = a;
            q[d - 1] += g * t;
            if (in_box(b, q)) out.push_back(q);
          }
      return out;
    });
  }
  return std::make_unique<GreedySampler>(domain);
}

// ---------------------------------------------------------------------------

double barrier_upper_bound(int k, double alpha, int d) {
  return std::pow(3.0, d) * std::pow(std::sqrt(static_cast<double>(d)), d) * std::exp2(-k * (d - alpha));
}

double barrier_lower_bound(int k, double alpha, int d, double thickness) {
  return thickness * std::pow(3.0, -d) * std::exp2(-k * (d - alpha));
}

double analytic_thickness(const Domain& domain, double alpha) {
  const double beta = domain.dim() - alpha;
  if (dynamic_cast<const BallDomain*>(&domain)) {
    if (beta > 1.0) throw ConfigError("no closed-form thickness for a ball exterior with d - alpha > 1");
    return std::pow(2.0, -beta);
  }
  if (beta == 0.0) return 1.0;
  throw ConfigError("no closed-form thickness for this family at alpha < d");
}

BarrierMeasure build_barrier_measure(ComplementSampler& sampler, const Point& x, double alpha, int depth,
                                     const BarrierOptions& options) {
  const int d = x.dim();
  if (!(alpha > 0.0 && alpha <= d)) throw ConfigError("barrier: alpha must lie in (0, d]");
  if (depth < 1 || depth > 40) throw ConfigError("barrier: depth must be in [1, 40]");
  if (!x.finite()) throw ConfigError("barrier: x must be finite");
  const double beta = d - alpha;
  const DyadicGrid grid(x);
  const DyadicCube root = grid.containing(x, 1);
  sampler.prepare(grid, root, depth);

  struct Node {
    DyadicCube cube;
    Coverage cov;
    std::int64_t parent;
    std::int64_t first_child = -1;
    int children = 0;
    double content = 0.0;
    double mass = 0.0;
    bool chain = false;
  };
  std::vector<Node> nodes;
  const Coverage root_cov = sampler.classify(grid, root);
  if (root_cov == Coverage::Empty) throw ConfigError("barrier: content of D_1(x) is zero; x is not a boundary point");
  nodes.push_back({root, root_cov, -1, -1, 0, 0.0, 0.0, true});

  const int fan = 1 << d;
  std::size_t level_begin = 0;
  for (int level = 1; level < depth; ++level) {
    const std::size_t level_end = nodes.size();
    const DyadicCube chain_child = grid.containing(x, level + 1);
    for (std::size_t i = level_begin; i < level_end; ++i) {
      nodes[i].first_child = static_cast<std::int64_t>(nodes.size());
      for (int m = 0; m < fan; ++m) {
        DyadicCube c;
        c.level = level + 1;
        for (int a = 0; a < d; ++a)
          c.index[static_cast<std::size_t>(a)] = 2 * nodes[i].cube.index[static_cast<std::size_t>(a)] + ((m >> a) & 1);
        const Coverage cov = nodes[i].cov == Coverage::Full ? Coverage::Full : sampler.classify(grid, c);
        const bool chain = nodes[i].chain && c == chain_child;
        if (cov == Coverage::Empty) {
          if (chain) throw ConfigError("barrier: complement sampler reports an empty cube containing x");
          continue;
        }
        nodes.push_back({c, cov, static_cast<std::int64_t>(i), -1, 0, 0.0, 0.0, chain});
        ++nodes[i].children;
      }
      if (nodes.size() > options.max_cubes) throw ConfigError("barrier: cube budget exceeded; lower the depth");
    }
    level_begin = level_end;
  }

  // content, finest level first
  for (std::size_t i = nodes.size(); i-- > 0;) {
    Node& n = nodes[i];
    const double cap = std::pow(half_diagonal(n.cube.level, d), beta);
    if (n.cube.level == depth || n.cov == Coverage::Full) {
      n.content = cap;
    } else {
      double s = 0.0;
      for (int c = 0; c < n.children; ++c) s += nodes[static_cast<std::size_t>(n.first_child + c)].content;
      n.content = std::min(cap, s);
    }
  }

  // redistribution, coarsest level first
  nodes[0].mass = nodes[0].content;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    Node& n = nodes[i];
    if (n.children == 0) continue;
    const auto begin = static_cast<std::size_t>(n.first_child);
    const auto end = begin + static_cast<std::size_t>(n.children);
    double rest = n.mass;
    double others = 0.0;
    for (std::size_t c = begin; c < end; ++c) {
      if (nodes[c].chain) {
        nodes[c].mass = nodes[c].content;
        rest -= nodes[c].content;
      } else {
        others += nodes[c].content;
      }
    }
    if (rest < 0.0) {
      if (rest < -1e-12 * n.mass) throw ConfigError("barrier: content oracle is not monotone");
      rest = 0.0;
    }
    for (std::size_t c = begin; c < end; ++c)
      if (!nodes[c].chain) nodes[c].mass = others > 0.0 ? rest * nodes[c].content / others : 0.0;
  }

  BarrierMeasure out;
  out.x = x;
  out.origin = grid.origin();
  out.alpha = alpha;
  out.depth = depth;
  out.exact_content = sampler.exact();
  out.measure = DiscreteMeasure(d);
  out.cubes.reserve(nodes.size());
  for (const Node& n : nodes) {
    out.cubes.push_back({n.cube, n.content, n.mass, n.parent, n.chain});
    if (n.cube.level == depth && n.mass > 0.0) out.measure.add(n.chain ? x : sampler.representative(grid, n.cube), n.mass);
  }
  return out;
}

BarrierMeasure build_barrier_measure(const DomainPtr& domain, const Point& x, double alpha, int depth,
                                     ContentMethod method, const BarrierOptions& options) {
  if (!domain) throw ConfigError("barrier: null domain");
  if (x.dim() != domain->dim()) throw ConfigError("barrier: x dimension does not match the domain");
  if (domain->contains(x) && domain->distance(x) > 1e-12)
    throw ConfigError("barrier: x lies inside the domain, not on its boundary");
  auto sampler = make_complement_sampler(domain, method);
  BarrierMeasure out = build_barrier_measure(*sampler, x, alpha, depth, options);
  if (domain->contains(x)) {
    // x rounded into the domain; the chain leaf takes the sampler's point instead
    const DyadicGrid grid(x);
    DiscreteMeasure fixed(domain->dim());
    std::size_t i = 0;
    for (const auto& c : out.cubes) {
      if (c.cube.level != depth || !(c.mass > 0.0)) continue;
      fixed.add(c.on_chain ? sampler->representative(grid, c.cube) : out.measure.atoms()[i].point, c.mass);
      ++i;
    }
    out.measure = std::move(fixed);
  }
  return out;
}

// ---------------------------------------------------------------------------

BarrierSelector::BarrierSelector(DomainPtr domain, double alpha, int depth, double cell)
    : domain_(std::move(domain)), alpha_(alpha), depth_(depth), cell_(cell > 0.0 ? cell : std::ldexp(0.25, -depth)) {
  if (!domain_) throw ConfigError("barrier selector: null domain");
  if (auto ball = std::dynamic_pointer_cast<const BallDomain>(domain_)) {
    Point e(domain_->dim());
    e[0] = ball->radius();
    canonical_ = std::make_shared<const DiscreteMeasure>(build_barrier_measure(domain_, e, alpha_, depth_).measure);
  }
}

std::size_t BarrierSelector::cached() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

std::shared_ptr<const DiscreteMeasure> BarrierSelector::operator()(const Point& p) const {
  const int d = domain_->dim();
  if (canonical_) {
    const double r = p.norm();
    Point u(d);
    if (r > 0.0) {
      u = p * (1.0 / r);
    } else {
      u[0] = 1.0;
    }
    // reflection exchanging e_1 and u
    Point v = -1.0 * u;
    v[0] += 1.0;
    const double vv = v.norm2();
    if (vv < 1e-30) return canonical_;
    return std::make_shared<const DiscreteMeasure>(canonical_->mapped([&](const Point& z) {
      Point w = z - v * (2.0 * dot(v, z) / vv);
      // atoms on the sphere can round inward
      while (domain_->contains(w)) w *= 1.0 + 0x1p-52;
      return w;
    }));
  }
  const BoundaryWitness outer = domain_->outer_projection(p);
  const bool removed =
      domain_->has_removed_set() && domain_->nearest_removed(p).distance < outer.distance;
  const Point w = removed ? domain_->nearest_removed(p).point : outer.point;
  Point centre(d);
  std::ostringstream key;
  key << (removed ? 'r' : 'o');
  for (int i = 0; i < d; ++i) {
    const double q = std::floor(w[i] / cell_);
    centre[i] = (q + 0.5) * cell_;
    key << ':' << static_cast<long long>(q);
  }
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key.str());
    if (it != cache_.end()) return it->second;
  }
  const Point x = removed ? domain_->nearest_removed(centre).point : domain_->outer_projection(centre).point;
  auto mu = std::make_shared<const DiscreteMeasure>(build_barrier_measure(domain_, x, alpha_, depth_).measure);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key.str(), mu).first->second;
}

}  // namespace wos
