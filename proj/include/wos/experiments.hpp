#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "wos/engine.hpp"
#include "wos/geometry.hpp"

namespace wos {

nlohmann::json config_to_json(const WosConfig& config);
/// Missing keys keep their defaults; the result is validated.
WosConfig config_from_json(const nlohmann::json& j);

/// How a finished walk ended.
enum class ExitClass { Outer, Removed, Censored };

const char* to_string(ExitClass c);

/// Outer boundary vs removed set; censored for max_steps exhaustion.
ExitClass classify_exit(const Domain& domain, const WalkResult& walk, double epsilon);

// ---------------------------------------------------------------------------
// Sweeps.

struct SchedulePoint {
  nlohmann::json domain;  ///< {"family": ..., "params": {...}}
  double epsilon = 0.0;
};

struct SweepPlan {
  std::vector<SchedulePoint> schedule;
  Point x0;
  std::uint64_t walks_per_point = 1000;
  WosConfig config;
  std::uint64_t seed = 0;
  int workers = 0;

  /// Strictly decreasing epsilon, >= 100 walks, constructible domains.
  void validate() const;
  nlohmann::json to_json() const;
  static SweepPlan from_json(const nlohmann::json& j);
};

struct SweepRow {
  double epsilon = 0.0;
  std::uint64_t walks = 0;
  double mean_steps = 0.0;
  double sd_steps = 0.0;
  double se_steps = 0.0;
  double ci_lo = 0.0;  ///< 95% normal interval for the mean
  double ci_hi = 0.0;
  double median_steps = 0.0;
  std::uint64_t exhausted = 0;
  double exhausted_fraction = 0.0;
  double outer_exit_fraction = 0.0;
  double removed_exit_fraction = 0.0;

  double resolution() const { return 1.0 / epsilon; }
};

/// Exhaustion fraction above which a point censors the table.
inline constexpr double kCensoringThreshold = 0.01;

struct SweepTable {
  nlohmann::json plan;
  std::vector<SweepRow> rows;
  bool censored = false;

  /// "# {metadata}" line followed by a fixed-column CSV body; `extra` keys
  /// are merged into the metadata.
  std::string to_csv(const nlohmann::json& extra = nlohmann::json::object()) const;
  static SweepTable from_csv(const std::string& text);
  /// CSV body without the metadata line.
  std::string csv_body() const;
};

/// Every point runs the same walk indices under the plan seed, so exact-mode
/// walks of a coarser epsilon are prefixes of the finer ones.
SweepTable run_sweep(const SweepPlan& plan);

/// Per-walk statistics of one batch, used by sweeps and by the tests below.
SweepRow summarize_batch(const Domain& domain, const std::vector<WalkResult>& walks, double epsilon);

// ---------------------------------------------------------------------------
// Rate models.

enum class RateModel { Log, Log2, Power };

const char* to_string(RateModel m);

/// y = a·L + b, y = a·L^2 + b, or log y = b + theta·L, with L = log(1/eps).
struct ModelFit {
  RateModel model = RateModel::Log;
  double a = 0.0;
  double b = 0.0;
  double theta = 0.0;  ///< power model exponent (equals a)
  double rss = 0.0;    ///< full-data residual sum of squares in y
  double holdout_residual = 0.0;

  double predict(double L) const;
};

struct RateFit {
  std::array<ModelFit, 3> models;
  RateModel selected = RateModel::Log;
  /// second-best hold-out residual / best.
  double margin = 0.0;
  double theta = 0.0;
  double theta_ci_lo = 0.0;
  double theta_ci_hi = 0.0;
  std::optional<double> alpha_hint;
  std::optional<double> expected_theta;  ///< 2 - 4/alpha for alpha > 2
  std::size_t points = 0;

  const ModelFit& model(RateModel m) const { return models[static_cast<std::size_t>(m)]; }
  nlohmann::json to_json() const;
};

struct FitOptions {
  std::size_t min_points = 5;
  double min_octaves = 3.0;
  bool force = false;  ///< fit censored tables
  std::uint64_t bootstrap = 2000;
  std::uint64_t seed = 0;
};

/// Fits all three models; the held-out largest-1/eps point selects.
RateFit fit_rate(const std::vector<double>& resolution, const std::vector<double>& mean,
                 const std::vector<double>& se, std::optional<double> alpha_hint = std::nullopt,
                 const FitOptions& options = {});
RateFit fit_rate(const SweepTable& table, std::optional<double> alpha_hint = std::nullopt,
                 const FitOptions& options = {});

/// Fraction of parametric-bootstrap replicates, drawn from the selected
/// model with the given per-point SEs, on which fit_rate reselects it.
double reselection_rate(const RateFit& fit, const std::vector<double>& resolution, const std::vector<double>& se,
                        std::uint64_t replicates, std::uint64_t seed, const FitOptions& options = {});

// ---------------------------------------------------------------------------
// Statistical tests.

/// 99.9% quantile of chi-square with `df` degrees of freedom.
double chi_square_quantile_999(int df);
/// Asymptotic 99.9% critical value of the two-sample KS statistic.
double ks_critical_999(std::size_t n, std::size_t m);
/// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b);

struct Wilson {
  double lo = 0.0;
  double hi = 0.0;
};
/// 95% Wilson score interval.
Wilson wilson_interval(std::uint64_t successes, std::uint64_t n);

struct GoFReport {
  int d = 0;
  Point x0;
  std::uint64_t walks = 0;
  std::string statistic;  ///< "chi_square" or "total_variation"
  std::vector<std::uint64_t> counts;
  std::vector<double> expected;  ///< expected fraction per bin
  double chi_square = 0.0;
  int df = 0;
  double critical = 0.0;
  double tv = 0.0;
  double tv_limit = 0.02;
  bool passed = false;

  nlohmann::json to_json() const;
};

struct ExitTestOptions {
  int bins = 36;
  double epsilon = 1e-6;
  int workers = 0;
};

/// Unit ball. Centre: chi-square uniformity over angular bins (d = 2) or
/// octants (d = 3). Off centre: total variation to the Poisson kernel
/// integrated over each bin.
GoFReport exit_distribution_test(int d, const Point& x0, std::uint64_t n_walks, std::uint64_t seed,
                                 const ExitTestOptions& options = {});

struct MartingaleReport {
  Point x0;
  std::vector<double> mean_exit;
  std::vector<double> se_exit;
  bool mean_ok = false;
  double mean_sum_sq_jumps = 0.0;
  double se_sum_sq_jumps = 0.0;
  /// E|X_T|^2 - |X_0|^2.
  double second_moment_gain = 0.0;
  /// mean of sum_sq_jumps - (|X_T|^2 - |X_0|^2) and its SE.
  double paired_gap = 0.0;
  double paired_gap_se = 0.0;
  /// radius^2 - |x0|^2 for ball domains.
  std::optional<double> ball_bound;
  bool second_moment_ok = false;
  bool passed = false;

  nlohmann::json to_json() const;
};

MartingaleReport martingale_test(const Domain& domain, const WosConfig& config, const Point& x0,
                                 std::uint64_t n_walks, std::uint64_t seed, int workers = 0);

struct BinomialGate {
  std::uint64_t trials = 0;
  std::uint64_t hits = 0;
  double fraction = 0.0;
  double bound = 0.0;
  /// binomial SE at the bound.
  double se = 0.0;
  Wilson ci;
  bool passed = false;
};

struct HoleTerminationReport {
  double log_n = 0.0;
  double gamma = 0.0;
  std::size_t holes = 0;
  std::uint64_t walks = 0;
  double hole_fraction = 0.0;
  double circle_fraction = 0.0;
  double censored_fraction = 0.0;
  double mean_steps = 0.0;
  BinomialGate gate;  ///< hole fraction <= 1/8 + 3 SE

  nlohmann::json to_json() const;
};

struct HoleTestOptions {
  double pitch_constant = 4.0;
  std::uint64_t max_steps = 100'000'000;
  int workers = 0;
};

/// Punctured disk with n = e^{log_n}, walks from the centre to distance 1/n.
HoleTerminationReport hole_termination_test(double log_n, std::uint64_t n_walks, std::uint64_t seed,
                                            const HoleTestOptions& options = {});

struct BigJumpReport {
  double threshold = 0.0;
  double limit = 0.0;  ///< 4 / threshold^2
  BinomialGate gate;   ///< P[N > limit] <= 1/4 + 3 SE
  double mean_count = 0.0;

  nlohmann::json to_json() const;
};

BigJumpReport big_jump_test(const Domain& domain, const WosConfig& config, const Point& x0, double threshold,
                            std::uint64_t n_walks, std::uint64_t seed, int workers = 0);

// ---------------------------------------------------------------------------
// Lower-bound experiments.

struct LowerBound2Options {
  double pitch_constant = 0.5;
  std::uint64_t pilot_walks = 100;
  /// pilot quantile frozen into c_hat.
  double pilot_quantile = 0.25;
  int workers = 0;
  FitOptions fit{4, 3.0, false, 2000, 0};
};

struct LowerBound2Report {
  SweepTable table;
  RateFit fit;
  double ratio_spread = 0.0;  ///< max/min of mean / log^2 n
  double c_hat = 0.0;
  double median_smallest = 0.0;
  double threshold_smallest = 0.0;  ///< c_hat·log^2 n at the smallest n
  bool model_ok = false;
  bool spread_ok = false;
  bool median_ok = false;
  bool passed = false;

  nlohmann::json to_json() const;
};

LowerBound2Report lower_bound_alpha2(const std::vector<double>& n_schedule, std::uint64_t walks, std::uint64_t seed,
                                     const LowerBound2Options& options = {});

/// gamma = 8 n^{2/alpha - 1}·(1 + 1e-6).
double cylinder_gamma(double alpha, double n);
/// Smallest n with cylinder_gamma(alpha, n) < 1/24.
double minimal_cylinder_n(double alpha);
/// `points` powers of two starting at the first admissible one.
std::vector<double> cylinder_schedule(double alpha, int points);

struct LowerBoundGt2Options {
  ShellKind shell = ShellKind::Separating;
  int workers = 0;
  double tolerance = 0.15;
  /// Minimum wall-exit fraction at every point.
  double wall_min = 0.7;
  FitOptions fit{4, 2.0, false, 2000, 0};
};

struct LowerBoundGt2Report {
  double alpha = 0.0;
  SweepTable table;
  RateFit fit;
  double theta = 0.0;
  double expected_theta = 0.0;
  std::vector<double> wall_fraction;
  bool theta_ok = false;
  bool wall_ok = false;
  bool passed = false;

  nlohmann::json to_json() const;
};

LowerBoundGt2Report lower_bound_alpha_gt2(double alpha, const std::vector<double>& n_schedule, std::uint64_t walks,
                                          std::uint64_t seed, const LowerBoundGt2Options& options = {});

}  // namespace wos
