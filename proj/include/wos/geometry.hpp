#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wos/point.hpp"

namespace wos {

/// A point of the boundary (or of its truncated cover) together with its
/// distance from the query point.
struct BoundaryWitness {
  Point point;
  double distance = 0.0;
};

/// Bounded open region of R^d with an unsigned distance-to-boundary query.
///
/// Implementations are immutable once built; every query is a pure function
/// of the point, so one instance is shared by all concurrent walkers.
class Domain {
 public:
  virtual ~Domain() = default;

  int dim() const { return dim_; }
  /// Radius of an origin-centred ball containing the whole domain.
  double bounding_radius() const { return bounding_radius_; }

  virtual bool contains(const Point& p) const = 0;
  /// Unsigned distance from p to the boundary; 1-Lipschitz everywhere.
  virtual double distance(const Point& p) const = 0;
  /// Distance to the outer boundary only (sphere or cylinder surface).
  virtual double outer_distance(const Point& p) const = 0;
  /// Closest point of the outer boundary.
  virtual BoundaryWitness outer_projection(const Point& p) const = 0;

  virtual bool has_removed_set() const { return false; }
  /// Closest element of the removed set (or its truncated cover).
  virtual BoundaryWitness nearest_removed(const Point& p) const;

  /// Closest boundary point overall.
  BoundaryWitness nearest_boundary(const Point& p) const;

  /// Local origin for walk coordinates near a removed point. Walks store
  /// X = anchor + offset so the distance to the anchor keeps full relative
  /// precision far below the resolution of absolute coordinates.
  virtual std::optional<Point> anchor_near(const Point&) const { return std::nullopt; }
  /// Offsets shorter than this keep their anchor.
  virtual double anchor_radius() const { return 0.0; }
  /// distance(anchor + offset), evaluated without cancellation when possible.
  virtual double distance_from_anchor(const Point& anchor, const Point& offset) const {
    return distance(anchor + offset);
  }

  virtual std::string family() const = 0;
  virtual nlohmann::json params() const = 0;
  nlohmann::json to_json() const { return {{"family", family()}, {"params", params()}}; }

 protected:
  Domain(int dim, double bounding_radius) : dim_(dim), bounding_radius_(bounding_radius) {}

 private:
  int dim_;
  double bounding_radius_;
};

using DomainPtr = std::shared_ptr<const Domain>;

// ---------------------------------------------------------------------------
// Lattice search primitive shared by the lower-bound families.

/// Nearest point of (pitch·Z)^k inside the open radial shell
/// {g : inner2 < |g|^2 < outer2}; inner2 < 0 means a full ball.
/// Returns nullopt if the shell holds no lattice point.
std::optional<BoundaryWitness> nearest_lattice_point_in_shell(const Point& p, double pitch, double inner2,
                                                              double outer2);

// ---------------------------------------------------------------------------
// Cantor set C_eta in [0,1].

/// Middle fraction removed at each generation so that C has dimension eta.
double cantor_lambda(double eta);

/// Depth-truncated Cantor set: the union of 2^depth closed intervals left
/// after `depth` generations. eta = 0 is the degenerate set {0}.
class CantorSet {
 public:
  CantorSet(double eta, int depth);

  double eta() const { return eta_; }
  int depth() const { return depth_; }
  double lambda() const { return lambda_; }
  /// Length of each depth-level interval (0 for the degenerate set).
  double interval_length() const;
  /// Distance from t to the truncated cover.
  double distance(double t) const;
  /// Closest point of the cover to t.
  double nearest(double t) const;
  /// The 2^depth intervals as (left, right) pairs.
  std::vector<std::pair<double, double>> intervals() const;

 private:
  double eta_;
  int depth_;
  double lambda_;
  double scale_;  // (1 - lambda) / 2
};

// ---------------------------------------------------------------------------
// Families.

class BallDomain final : public Domain {
 public:
  BallDomain(int dim, double radius);

  double radius() const { return radius_; }
  bool contains(const Point& p) const override;
  double distance(const Point& p) const override;
  double outer_distance(const Point& p) const override { return distance(p); }
  BoundaryWitness outer_projection(const Point& p) const override;
  std::string family() const override { return "ball"; }
  nlohmann::json params() const override;

 private:
  double radius_;
};

struct PuncturedDiskParams {
  double n = 0.0;               ///< resolution 1/epsilon
  double pitch_constant = 4.0;  ///< gamma = pitch_constant / sqrt(log n)

  double gamma() const;
};

/// Unit disk with the grid points gamma·Z^2 inside the open annulus
/// 1/3 < |g| < 2/3 removed.
class PuncturedDiskDomain final : public Domain {
 public:
  explicit PuncturedDiskDomain(PuncturedDiskParams params);

  const PuncturedDiskParams& settings() const { return params_; }
  double gamma() const { return gamma_; }
  const std::vector<Point>& removed_points() const { return holes_; }

  bool contains(const Point& p) const override;
  double distance(const Point& p) const override;
  double outer_distance(const Point& p) const override;
  BoundaryWitness outer_projection(const Point& p) const override;
  bool has_removed_set() const override { return true; }
  BoundaryWitness nearest_removed(const Point& p) const override;
  std::optional<Point> anchor_near(const Point& p) const override;
  double anchor_radius() const override { return gamma_ / 4.0; }
  double distance_from_anchor(const Point& anchor, const Point& offset) const override;
  std::string family() const override { return "punctured_disk"; }
  nlohmann::json params() const override;

 private:
  PuncturedDiskParams params_;
  double gamma_;
  std::vector<Point> holes_;
};

/// Which lattice points of the cylinder carry an attachment.
enum class ShellKind {
  /// {1/3 < max(|z|, |t|) < 2/3}: separates the origin from the cylinder wall.
  Separating,
  /// {1/3 < |z| < 2/3} x {1/3 < |t| < 2/3}: the literal product of the two ranges.
  Product,
};

struct CantorCylinderParams {
  double alpha = 3.0;
  double gamma = 0.0;
  /// Cantor generations; 0 picks the smallest depth meeting `cantor_tolerance`.
  int depth = 0;
  /// Upper bound on cover interval length used when depth == 0.
  double cantor_tolerance = 0.0;
  ShellKind shell = ShellKind::Separating;

  int dim() const;
  double eta() const;
};

/// Cylinder B(0,1)_{d-1} x [-1,1] minus a gamma-scaled Cantor set attached
/// (along the last axis) to every lattice point of the middle shell.
class CantorCylinderDomain final : public Domain {
 public:
  explicit CantorCylinderDomain(CantorCylinderParams params);

  const CantorCylinderParams& settings() const { return params_; }
  const CantorSet& cantor() const { return cantor_; }
  double gamma() const { return params_.gamma; }
  /// Whether a lattice point anchors an attachment.
  bool in_shell(const Point& g) const;
  /// Anchors of the removed set (materialized on demand).
  std::vector<Point> anchor_points() const;
  std::size_t anchor_count() const;
  /// Lebesgue volume of the shell holding the anchors.
  double shell_volume() const;

  bool contains(const Point& p) const override;
  double distance(const Point& p) const override;
  double outer_distance(const Point& p) const override;
  BoundaryWitness outer_projection(const Point& p) const override;
  bool has_removed_set() const override { return true; }
  BoundaryWitness nearest_removed(const Point& p) const override;
  std::string family() const override { return "cantor_cylinder"; }
  nlohmann::json params() const override;

 private:
  CantorCylinderParams params_;
  CantorSet cantor_;
};

DomainPtr ball_domain(int dim, double radius);
DomainPtr build_punctured_disk(PuncturedDiskParams params);
DomainPtr build_cantor_cylinder(CantorCylinderParams params);

/// Closest removed point; throws ConfigError for domains without one.
BoundaryWitness nearest_removed_point(const Domain& domain, const Point& p);

/// {"family": "ball"|"punctured_disk"|"cantor_cylinder", "params": {...}}
DomainPtr domain_from_json(const nlohmann::json& spec);

}  // namespace wos
