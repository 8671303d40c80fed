#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "wos/geometry.hpp"
#include "wos/rng.hpp"

namespace wos {

enum class EstimatorMode {
  Exact,   ///< r_t = d(X_t)
  Fuzzed,  ///< r_t ~ Uniform(beta·d(X_t), d(X_t))
};

enum class Termination {
  Epsilon,
  MaxSteps,
  /// x0 was already within epsilon of the boundary; no step taken.
  StartedWithinEpsilon,
  /// steps fell below the floating-point resolution of the walk coordinates.
  Precision,
};

const char* to_string(Termination t);
const char* to_string(EstimatorMode m);
EstimatorMode estimator_mode_from_string(const std::string& s);

enum class JumpRetention { Histogram, Full };

struct WosConfig {
  double beta = 0.5;
  double epsilon = 1e-3;
  double jump_fraction = 0.5;
  std::uint64_t max_steps = 100'000'000;
  EstimatorMode mode = EstimatorMode::Exact;
  /// jump_fraction other than 1/2 is only accepted with this set.
  bool experimental_jump_fraction = false;
  JumpRetention jumps = JumpRetention::Histogram;
  bool keep_trajectory = false;

  void validate() const;
};

/// Counts of jump lengths in dyadic buckets.
///
/// Bucket 0 holds lengths >= 1, bucket j in [1, 60] holds
/// 2^-j <= len < 2^-(j-1), bucket 61 everything shorter.
class JumpHistogram {
 public:
  static constexpr int kBuckets = 62;

  void add(double length);
  std::uint64_t total() const;
  /// Number of jumps with length >= 2^-j, j in [0, 60].
  std::uint64_t count_at_least_edge(int j) const;
  const std::array<std::uint64_t, kBuckets>& counts() const { return counts_; }

 private:
  std::array<std::uint64_t, kBuckets> counts_{};
};

struct WalkResult {
  Point exit_point;
  /// Exit position as anchor + offset; anchor is zero when the walk ended
  /// away from every anchor of the domain.
  Point exit_anchor;
  Point exit_offset;
  bool anchored_exit = false;
  std::uint64_t steps = 0;
  double exit_distance = 0.0;
  double min_distance = 0.0;
  /// Sum over t of |X_t - X_{t-1}|^2.
  double sum_sq_jumps = 0.0;
  Termination terminated_by = Termination::Epsilon;
  JumpHistogram histogram;
  std::vector<double> jumps;       ///< filled for JumpRetention::Full
  std::vector<Point> trajectory;   ///< X_0 .. X_T when keep_trajectory
};

/// One Walk-on-Spheres trajectory from x0 until d(X_t) <= epsilon.
WalkResult run_walk(const Domain& domain, const WosConfig& config, const Point& x0, SeededStream stream);

/// Error raised by a batch, tagged with the failing walk index.
class BatchError : public std::runtime_error {
 public:
  BatchError(std::uint64_t walk_index, const std::string& what)
      : std::runtime_error("walk " + std::to_string(walk_index) + ": " + what), walk_index_(walk_index) {}
  std::uint64_t walk_index() const { return walk_index_; }

 private:
  std::uint64_t walk_index_;
};

/// Walk i uses derive_stream(seed, i); results come back in index order and
/// do not depend on `workers` (0 = OpenMP default).
std::vector<WalkResult> run_batch(const Domain& domain, const WosConfig& config, const Point& x0,
                                  std::uint64_t n_walks, std::uint64_t seed, int workers = 0);

/// Single-threaded reference for run_batch.
std::vector<WalkResult> run_batch_serial(const Domain& domain, const WosConfig& config, const Point& x0,
                                         std::uint64_t n_walks, std::uint64_t seed);

/// N(threshold, T) = #{t <= T : |X_t - X_{t-1}| >= threshold}.
std::uint64_t big_jump_count(const WalkResult& result, double threshold);

/// v_k = #{t < T : X_t in R_k}, R_0 the 1/n-neighbourhood of the boundary and
/// R_k = {2^(k-1)/n < d(x) <= 2^k/n}.
std::map<int, std::uint64_t> region_visits(const WalkResult& result, const Domain& domain, double n);

/// Shell index k with 2^(k-1)/n < distance <= 2^k/n (0 when distance <= 1/n).
int region_index(double distance, double n);

}  // namespace wos
