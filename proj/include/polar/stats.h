#ifndef POLAR_STATS_H_
#define POLAR_STATS_H_

#include <cstdint>
#include <optional>
#include <span>

namespace polar::stats {

// ---- Distributions -------------------------------------------------------

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

// Standard normal CDF and two-sided tail probability P(|Z| >= |z|).
double normal_cdf(double z);
double normal_two_sided_p(double z);

// Student t CDF with `dof` > 0 degrees of freedom (non-integer allowed).
double t_cdf(double t, double dof);
// P(|T| >= |t|).
double t_two_sided_p(double t, double dof);
// Inverse CDF for p in (0, 1).
double t_quantile(double p, double dof);

// ---- Correlation ---------------------------------------------------------

struct PearsonResult {
  double r = 0.0;
  double p = 1.0;  // two-sided, t-test on n - 2 dof
};

// nullopt when either vector has zero variance. Throws when the sizes differ
// or there are fewer than 3 points.
std::optional<PearsonResult> pearson(std::span<const double> x,
                                     std::span<const double> y);

// ---- Two-sample t-test ---------------------------------------------------

enum class TTestVariant { kPooled, kWelch };
enum class HigherGroup { kFirst, kSecond, kNone };

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
  HigherGroup higher_group = HigherGroup::kNone;
  bool significant = false;
  // Both groups have zero variance but different means: t is infinite.
  bool degenerate = false;
};

// Two-sided test of equal means. Each group needs at least 2 values.
TTestResult two_sample_t(std::span<const double> a, std::span<const double> b,
                         TTestVariant variant = TTestVariant::kPooled,
                         double alpha = 0.05);

// ---- Mann-Kendall --------------------------------------------------------

enum class TrendDirection { kIncreasing, kDecreasing, kNone };

struct TrendResult {
  std::int64_t s = 0;
  double var_s = 0.0;
  double z = 0.0;
  double p = 1.0;
  TrendDirection direction = TrendDirection::kNone;
};

inline constexpr std::size_t kMannKendallMinLength = 8;

// Tie-corrected Mann-Kendall test with continuity correction. `series` is in
// time order and must hold at least kMannKendallMinLength values.
TrendResult mann_kendall(std::span<const double> series, double alpha = 0.05);

// Var(S) with the tie correction, from the series values alone.
double mann_kendall_variance(std::span<const double> series);

// ---- Descriptive ---------------------------------------------------------

double mean(std::span<const double> x);
// Sample variance (n - 1 denominator); 0 for a single value.
double sample_variance(std::span<const double> x);

}  // namespace polar::stats

#endif  // POLAR_STATS_H_
