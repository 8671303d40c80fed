#include "wos/engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace wos {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::Epsilon:
      return "epsilon";
    case Termination::MaxSteps:
      return "max_steps";
    case Termination::StartedWithinEpsilon:
      return "started_within_epsilon";
    case Termination::Precision:
      return "precision";
  }
  return "unknown";
}

const char* to_string(EstimatorMode m) { return m == EstimatorMode::Exact ? "exact" : "fuzzed"; }

EstimatorMode estimator_mode_from_string(const std::string& s) {
  if (s == "exact") return EstimatorMode::Exact;
  if (s == "fuzzed") return EstimatorMode::Fuzzed;
  throw ConfigError("mode must be 'exact' or 'fuzzed', got '" + s + "'");
}

void WosConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
  if (max_steps == 0) throw ConfigError("max_steps must be positive");
  if (!(jump_fraction > 0.0 && jump_fraction <= 1.0)) throw ConfigError("jump_fraction must lie in (0, 1]");
  if (jump_fraction != 0.5 && !experimental_jump_fraction)
    throw ConfigError("jump_fraction is fixed at 1/2 unless experimental_jump_fraction is set");
}

// ---------------------------------------------------------------------------

void JumpHistogram::add(double length) {
  int bucket;
  if (length >= 1.0) {
    bucket = 0;
  } else if (length <= 0.0) {
    bucket = kBuckets - 1;
  } else {
    int exp = 0;
    std::frexp(length, &exp);  // length = m·2^exp, m in [0.5, 1) => 2^(exp-1) <= length < 2^exp
    bucket = std::min(1 - exp, kBuckets - 1);
  }
  ++counts_[static_cast<std::size_t>(bucket)];
}

std::uint64_t JumpHistogram::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t JumpHistogram::count_at_least_edge(int j) const {
  if (j < 0 || j > kBuckets - 2) throw ConfigError("histogram edge index out of range");
  std::uint64_t s = 0;
  for (int i = 0; i <= j; ++i) s += counts_[static_cast<std::size_t>(i)];
  return s;
}

// ---------------------------------------------------------------------------

namespace {

// Walk position kept as anchor + offset.
struct Position {
  Point anchor;
  Point offset;
  bool anchored = false;

  Point absolute() const { return anchored ? anchor + offset : offset; }
};

void rebase(const Domain& domain, Position& pos) {
  const Point abs = pos.absolute();
  if (auto a = domain.anchor_near(abs)) {
    // keep the exact sub-ulp offset when the anchor does not change
    if (!(pos.anchored && *a == pos.anchor)) pos.offset = abs - *a;
    pos.anchor = *a;
    pos.anchored = true;
  } else {
    pos.anchor = Point::zero(abs.dim());
    pos.offset = abs;
    pos.anchored = false;
  }
}

double max_abs(const Point& p) {
  double m = 0.0;
  for (int i = 0; i < p.dim(); ++i) m = std::max(m, std::abs(p[i]));
  return m;
}

}  // namespace

WalkResult run_walk(const Domain& domain, const WosConfig& config, const Point& x0, SeededStream stream) {
  config.validate();
  if (x0.dim() != domain.dim()) throw ConfigError("x0 dimension does not match the domain");
  if (!x0.finite() || !domain.contains(x0)) throw ConfigError("x0 lies outside the domain");

  WalkResult out;
  const double anchor_radius = domain.anchor_radius();
  Position pos{Point::zero(x0.dim()), x0, false};
  if (anchor_radius > 0.0) rebase(domain, pos);
  auto dist = [&] { return pos.anchored ? domain.distance_from_anchor(pos.anchor, pos.offset) : domain.distance(pos.offset); };
  double d = dist();
  out.min_distance = d;
  if (config.keep_trajectory) out.trajectory.push_back(x0);

  const int dim = domain.dim();
  const bool exact = config.mode == EstimatorMode::Exact;
  std::uint64_t t = 0;
  if (d <= config.epsilon) {
    out.terminated_by = Termination::StartedWithinEpsilon;
  } else {
    while (d > config.epsilon) {
      if (t == config.max_steps) {
        out.terminated_by = Termination::MaxSteps;
        break;
      }
      const double r = exact ? d : stream.uniform(config.beta * d, d);
      // stay strictly inside even if an experimental jump fraction reaches d
      const double step = std::min(config.jump_fraction * r, d * (1.0 - 1e-12));
      if (step < 0x1p-50 * max_abs(pos.offset)) {
        out.terminated_by = Termination::Precision;
        break;
      }
      pos.offset += sample_unit_direction(stream, dim) * step;
      ++t;
      out.sum_sq_jumps += step * step;
      out.histogram.add(step);
      if (config.jumps == JumpRetention::Full) out.jumps.push_back(step);
      if (config.keep_trajectory) out.trajectory.push_back(pos.absolute());
      if (anchor_radius > 0.0) {
        const bool drifted = pos.anchored && max_abs(pos.offset) >= anchor_radius;
        if (drifted || (!pos.anchored && d < 2.0 * anchor_radius)) rebase(domain, pos);
      }
      d = dist();
      out.min_distance = std::min(out.min_distance, d);
    }
  }
  out.steps = t;
  out.exit_point = pos.absolute();
  out.exit_anchor = pos.anchor;
  out.exit_offset = pos.offset;
  out.anchored_exit = pos.anchored;
  out.exit_distance = d;
  return out;
}

std::vector<WalkResult> run_batch_serial(const Domain& domain, const WosConfig& config, const Point& x0,
                                         std::uint64_t n_walks, std::uint64_t seed) {
  if (n_walks == 0) throw ConfigError("run_batch: n_walks must be at least 1");
  std::vector<WalkResult> results;
  results.reserve(n_walks);
  for (std::uint64_t i = 0; i < n_walks; ++i) {
    try {
      results.push_back(run_walk(domain, config, x0, derive_stream(seed, i)));
    } catch (const std::exception& e) {
      throw BatchError(i, e.what());
    }
  }
  return results;
}

std::vector<WalkResult> run_batch(const Domain& domain, const WosConfig& config, const Point& x0,
                                  std::uint64_t n_walks, std::uint64_t seed, int workers) {
  if (n_walks == 0) throw ConfigError("run_batch: n_walks must be at least 1");
  config.validate();
  std::vector<WalkResult> results(n_walks);
  std::optional<std::uint64_t> failed;
  std::string failure;
  const auto n = static_cast<long long>(n_walks);
#ifdef _OPENMP
  const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 4) num_threads(threads)
#endif
  for (long long i = 0; i < n; ++i) {
    try {
      results[static_cast<std::size_t>(i)] =
          run_walk(domain, config, x0, derive_stream(seed, static_cast<std::uint64_t>(i)));
    } catch (const std::exception& e) {
#ifdef _OPENMP
#pragma omp critical(wos_batch_error)
#endif
      {
        if (!failed || static_cast<std::uint64_t>(i) < *failed) {
          failed = static_cast<std::uint64_t>(i);
          failure = e.what();
        }
      }
    }
  }
  (void)workers;
  if (failed) throw BatchError(*failed, failure);
  return results;
}

// ---------------------------------------------------------------------------

std::uint64_t big_jump_count(const WalkResult& result, double threshold) {
  if (!result.jumps.empty() || result.steps == 0) {
    return static_cast<std::uint64_t>(
        std::count_if(result.jumps.begin(), result.jumps.end(), [&](double j) { return j >= threshold; }));
  }
  int exp = 0;
  const double mant = std::frexp(threshold, &exp);
  // threshold = 2^-j  <=>  mantissa 0.5 and exp = 1 - j
  const int j = 1 - exp;
  if (mant != 0.5 || j < 0 || j > JumpHistogram::kBuckets - 2)
    throw ConfigError("big_jump_count: threshold is not a histogram edge and jump sizes were not retained");
  return result.histogram.count_at_least_edge(j);
}

int region_index(double distance, double n) {
  if (distance * n <= 1.0) return 0;
  int k = static_cast<int>(std::ceil(std::log2(distance * n)));
  while (std::ldexp(1.0, k) / n < distance) ++k;
  while (k > 1 && std::ldexp(1.0, k - 1) / n >= distance) --k;
  return k;
}

std::map<int, std::uint64_t> region_visits(const WalkResult& result, const Domain& domain, double n) {
  if (result.trajectory.empty()) throw ConfigError("region_visits: trajectory was not retained");
  if (!(n > 0.0)) throw ConfigError("region_visits: n must be positive");
  std::map<int, std::uint64_t> visits;
  for (std::uint64_t t = 0; t < result.steps; ++t) ++visits[region_index(domain.distance(result.trajectory[t]), n)];
  return visits;
}

}  // namespace wos
