#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "wos/engine.hpp"
#include "wos/geometry.hpp"
#include "wos/rng.hpp"

namespace wos {

struct Atom {
  Point point;
  double weight = 0.0;
};

/// Finite sum of weighted delta masses.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(int dim);
  DiscreteMeasure(int dim, std::vector<Atom> atoms);

  int dim() const { return dim_; }
  bool empty() const { return atoms_.empty(); }
  std::size_t size() const { return atoms_.size(); }
  const std::vector<Atom>& atoms() const { return atoms_; }
  double total_mass() const { return total_; }

  /// Appends an atom; weights must be finite and non-negative.
  void add(const Point& p, double weight);
  /// Same atoms with every weight multiplied by s >= 0.
  DiscreteMeasure scaled(double s) const;
  /// Atoms moved by `f` (weights kept).
  DiscreteMeasure mapped(const std::function<Point(const Point&)>& f) const;
  /// Smallest distance between two distinct atoms; +inf with fewer than two.
  double min_spacing() const;

 private:
  int dim_ = 0;
  std::vector<Atom> atoms_;
  double total_ = 0.0;
};

/// U_alpha(y) = 1/(d-alpha) sum w |z-y|^{-(d-alpha)}, or sum w log(1/|z-y|)
/// when alpha = d. +inf when y carries positive weight.
double riesz_potential(const DiscreteMeasure& mu, const Point& y, double alpha, int d);

/// Newton potential U_2.
inline double newton_potential(const DiscreteMeasure& mu, const Point& y) {
  return riesz_potential(mu, y, 2.0, mu.dim() > 0 ? mu.dim() : y.dim());
}

/// mu of the closed ball B(y, r).
double ball_mass(const DiscreteMeasure& mu, const Point& y, double r);

/// The potential recomputed from the radial mass profile r -> mu(B(y, r)),
/// integrated exactly between consecutive atom distances.
///
/// For alpha < d this is the integral of mu(B(y,r)) / r^{d-alpha+1} over
/// (0, inf). For alpha = d that integral diverges for any nonzero measure;
/// the profile form of the log kernel,
///   int_0^1 mu(B(y,r))/r dr - int_1^inf (M - mu(B(y,r)))/r dr,
/// is used instead.
double riesz_potential_from_profile(const DiscreteMeasure& mu, const Point& y, double alpha, int d);

// ---------------------------------------------------------------------------
// Growth condition mu(B(y, r)) <= r^{d-alpha}.

struct ClassMOptions {
  /// Balls are tested only at radius >= floor. Unset: half the minimum atom
  /// spacing (0 for a single atom). 0 is the strict condition.
  std::optional<double> resolution_floor;
  double tolerance = 1e-9;
  /// Nearest-neighbour radii tested around each atom.
  int neighbour_radii = 20;
};

struct ClassMReport {
  double alpha = 0.0;
  double resolution_floor = 0.0;
  /// max over tested balls of mu(B(y,r)) / r^{d-alpha}.
  double max_violation_ratio = 0.0;
  std::size_t support_in_domain_count = 0;
  /// Atoms outside the closed ball B(0, 2).
  std::size_t support_outside_ball2_count = 0;
  std::size_t balls_tested = 0;
  Point worst_center;
  double worst_radius = 0.0;
  bool vacuous = false;
  double tolerance = 1e-9;

  bool in_class_M() const {
    return max_violation_ratio <= 1.0 + tolerance && support_in_domain_count == 0 && support_outside_ball2_count == 0;
  }
  nlohmann::json to_json() const;
};

ClassMReport verify_class_M(const DiscreteMeasure& mu, const Domain& domain, double alpha, std::uint64_t n_balls,
                            SeededStream stream, const ClassMOptions& options = {});

/// Upper bound on sup mu(B(w,r)) / r^{d-alpha} over all balls with r >= floor.
/// A ball holding atom a lies in B(a, 2r), so the bound is 2^{d-alpha} times
/// the largest ratio over atom-centred balls of radius >= 2·floor.
double class_M_certificate(const DiscreteMeasure& mu, double alpha, double floor);

// ---------------------------------------------------------------------------

/// Scale applied to mu on the annulus A_k = {2^{k-1} d_y <= |w-y| <= 2^k d_y}:
/// 0 for k <= 3, 1 - 2^{(4-k)(d-alpha)} for k >= 4.
double amalgamation_factor(int k, double alpha, int d);
/// Smallest k with |w - y| <= 2^k d_y (k >= 1).
int amalgamation_annulus(double distance, double d_y);

/// mu_x restricted to B(y, 2 d_y) plus the rescaled annular pieces of mu.
DiscreteMeasure amalgamate(const DiscreteMeasure& mu, const DiscreteMeasure& mu_x, const Point& y, double d_y,
                           double alpha, int d);

// ---------------------------------------------------------------------------
// Dyadic barrier measures.

struct DyadicCube {
  int level = 0;
  std::array<std::int64_t, kMaxDim> index{};

  bool operator==(const DyadicCube& o) const { return level == o.level && index == o.index; }
};

/// Dyadic grid translated so a chosen point x has coordinates (1/3, ..., 1/3).
class DyadicGrid {
 public:
  DyadicGrid(const Point& x);

  int dim() const { return origin_.dim(); }
  const Point& origin() const { return origin_; }
  static double side(int level) { return std::ldexp(1.0, -level); }
  Point lower(const DyadicCube& c) const;
  Point center(const DyadicCube& c) const;
  DyadicCube containing(const Point& p, int level) const;
  DyadicCube parent(const DyadicCube& c) const;
  /// Closed-cube membership.
  bool contains(const DyadicCube& c, const Point& p) const;

 private:
  Point origin_;
};

enum class Coverage { Empty, Partial, Full };

/// Description of R^d \ Omega for content estimates and atom placement.
class ComplementSampler {
 public:
  virtual ~ComplementSampler() = default;
  /// Called once with the root cube and the finest level before any query.
  virtual void prepare(const DyadicGrid&, const DyadicCube& /*root*/, int /*finest_level*/) {}
  virtual Coverage classify(const DyadicGrid& grid, const DyadicCube& cube) const = 0;
  /// A point of the complement in (or, for greedy samplers, near) the cube.
  virtual Point representative(const DyadicGrid& grid, const DyadicCube& cube) const = 0;
  /// False when cube membership is only an over-approximation.
  virtual bool exact() const { return true; }
};

enum class ContentMethod {
  Analytic,  ///< family-specific exact cube classification
  Greedy,    ///< distance-query cover, upper estimate only; works for any domain
};

std::unique_ptr<ComplementSampler> make_complement_sampler(const DomainPtr& domain, ContentMethod method);

struct BarrierCube {
  DyadicCube cube;
  double content = 0.0;  ///< content estimate of cube \ Omega
  double mass = 0.0;     ///< nu_depth(cube)
  std::int64_t parent = -1;
  bool on_chain = false;  ///< cube is D_k(x)
};

struct BarrierMeasure {
  DiscreteMeasure measure;  ///< one atom per nonempty cube of the finest level
  Point x;
  Point origin;
  double alpha = 0.0;
  int depth = 0;
  bool exact_content = true;
  /// All nonempty cubes of levels 1..depth, parents before children.
  std::vector<BarrierCube> cubes;

  /// Cubes of a given level (indices into `cubes`).
  std::vector<std::size_t> level(int k) const;
};

struct BarrierOptions {
  std::size_t max_cubes = 4'000'000;
};

/// Content of a cube from its children: min(rho^beta, sum of children),
/// rho the half-diagonal; finest-level nonempty cubes count as rho^beta.
/// `depth` is the finest level, x a boundary point.
BarrierMeasure build_barrier_measure(ComplementSampler& sampler, const Point& x, double alpha, int depth,
                                     const BarrierOptions& options = {});
BarrierMeasure build_barrier_measure(const DomainPtr& domain, const Point& x, double alpha, int depth,
                                     ContentMethod method = ContentMethod::Analytic,
                                     const BarrierOptions& options = {});

/// 3^d (sqrt d)^d 2^{-k(d-alpha)}.
double barrier_upper_bound(int k, double alpha, int d);
/// c 3^{-d} 2^{-k(d-alpha)}.
double barrier_lower_bound(int k, double alpha, int d, double thickness);
/// Thickness constant of the family's complement at boundary points:
/// 1 for point sets at alpha = d, 2^{-(d-alpha)} for a ball exterior with
/// d - alpha <= 1. Throws where no closed form is available.
double analytic_thickness(const Domain& domain, double alpha);

// ---------------------------------------------------------------------------
// Identity and bound checks.

struct LaplacianCheck {
  double fd_laplacian = 0.0;
  double rhs = 0.0;
  /// |fd - rhs| / |rhs|, or |fd - rhs| when rhs = 0.
  double rel_err = 0.0;
};

/// Central second differences of U_alpha at spacing h against
/// (d-alpha+2)(2-alpha) U_{alpha-2}, U_{alpha-2} evaluated with the same
/// kernel formula at exponent d-alpha+2.
LaplacianCheck laplacian_identity_check(const DiscreteMeasure& mu, const Point& y, double alpha, int d, double h);

struct EnergyBoundCheck {
  double value = 0.0;
  double bound = 0.0;
  /// Included in bound: tail beyond radius 2 (alpha <= 2, alpha < d) and the
  /// floor correction when the resolution floor exceeds d(y).
  double correction = 0.0;
  bool ok = false;
};

/// U_alpha(y) <= log(2/d(y)) for alpha <= 2; U_2(y) <= d(y)^{2-alpha}/(alpha-2)
/// for alpha > 2. `report` must certify mu at a floor <= d(y)/10.
EnergyBoundCheck energy_bound_check(const DiscreteMeasure& mu, const Domain& domain, const Point& y, double alpha,
                                    const ClassMReport& report);

// ---------------------------------------------------------------------------
// Drift probes.

using MeasureSelector = std::function<std::shared_ptr<const DiscreteMeasure>(const Point&)>;

/// Barrier measure at the nearest boundary point of a walk position.
///
/// Ball domains reflect one measure built at radius·e_1. Other families
/// group boundary points into cells of side `cell` (default a quarter of the
/// finest cube side) and build one measure per cell at the boundary point
/// nearest the cell centre, so results never depend on query order.
class BarrierSelector {
 public:
  BarrierSelector(DomainPtr domain, double alpha, int depth, double cell = 0.0);

  std::shared_ptr<const DiscreteMeasure> operator()(const Point& p) const;
  std::size_t cached() const;

 private:
  DomainPtr domain_;
  double alpha_;
  int depth_;
  double cell_;
  std::shared_ptr<const DiscreteMeasure> canonical_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, std::shared_ptr<const DiscreteMeasure>> cache_;
};

struct DriftBin {
  double u_lo = 0.0;
  double u_hi = 0.0;
  std::uint64_t count = 0;
  bool populated = false;
  double mean_increment = 0.0;
  double se_increment = 0.0;
  double mean_sq_increment = 0.0;
  double se_sq_increment = 0.0;
};

struct DriftReport {
  double alpha = 0.0;
  int k = 0;
  bool newton = false;  ///< U_2 used (alpha > 2)
  std::uint64_t samples = 0;
  std::vector<DriftBin> bins;
  double mean_increment = 0.0;
  double se_increment = 0.0;

  nlohmann::json to_json() const;
};

struct DriftOptions {
  int bins = 6;
  std::uint64_t min_bin_count = 30;
  std::uint64_t seed = 0;
  int workers = 0;
  /// Start times are t = 0, k, 2k, ... unless set.
  std::optional<int> stride;
};

/// Pairs (U_t, U_{t+k}) with mu = selector(X_t) held fixed for both values;
/// t + k is capped at the exit time.
DriftReport drift_probe(const Domain& domain, const MeasureSelector& selector, const WosConfig& config,
                        const Point& x0, int k, std::uint64_t n_walks, double alpha,
                        const DriftOptions& options = {});

}  // namespace wos
