#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "wos/experiments.hpp"
#include "wos/potentials.hpp"

namespace wos {

/// One CSV row per walk: index, steps, termination, exit class, distances,
/// sum of squared jumps and exit coordinates.
std::string walk_table_csv(const Domain& domain, const std::vector<WalkResult>& walks, double epsilon);

struct RateLawReport {
  int d = 0;
  SweepTable table;
  RateFit fit;
  bool passed = false;

  nlohmann::json to_json() const;
};

/// Unit ball, x0 = 0, epsilon = 2^-4 .. 2^-20; log selected with margin >= 2.
RateLawReport rate_law_ball(int d, std::uint64_t walks, std::uint64_t seed, int workers = 0);

struct SuiteCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = false;
  nlohmann::json detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<SuiteCheck> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct PotentialSuiteOptions {
  int profile_measures = 100;
  double profile_tolerance = 1e-6;
  int closure_measures = 20;
  std::uint64_t closure_balls = 1000;
  int barrier_depth_2d = 8;
  int barrier_depth_3d = 6;
};

/// Profile identity, Laplacian Richardson ratios, amalgamation closure and
/// barrier cube bounds.
SuiteReport potential_suite(std::uint64_t seed, const PotentialSuiteOptions& options = {});

struct DriftSuiteOptions {
  std::uint64_t walks = 300;
  int depth = 6;
  int k = 1;
  std::uint64_t min_samples = 10'000;
  int workers = 0;
};

/// Mean increment of U_1 along walks in the unit disk and squared increment
/// of U_2 in the punctured disk, both positive at 2 sigma in every bin.
SuiteReport drift_suite(std::uint64_t seed, const DriftSuiteOptions& options = {});

}  // namespace wos
