#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace tocrag {

class StatsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class LengthMismatch : public StatsError {
 public:
  using StatsError::StatsError;
};
class ConstantSeries : public StatsError {
 public:
  using StatsError::StatsError;
};
class DegenerateSample : public StatsError {
 public:
  using StatsError::StatsError;
};
class SampleTooLargeForExact : public StatsError {
 public:
  using StatsError::StatsError;
};

/// I_x(a, b) by Lentz's continued fraction; absolute error below 1e-10.
double regularized_incomplete_beta(double a, double b, double x);
double student_t_cdf(double t, double df);
/// P(|T| >= |t|) for T ~ Student-t(df).
double student_t_two_sided_p(double t, double df);
double normal_cdf(double z);

enum class CorrelationKind { pearson_r, spearman_rho };
std::string_view to_string(CorrelationKind kind);

struct CorrelationResult {
  CorrelationKind kind = CorrelationKind::pearson_r;
  double value = 0.0;
  std::size_t n = 0;
  double p_value = 1.0;
  double p_adjusted = 1.0;  // equals p_value until a correction is applied
};

enum class PValueMethod { t_approximation, exact_permutation };

/// Two-sided p from t = r sqrt((n-2)/(1-r^2)) with n-2 degrees of freedom.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; ties get the mean of the positions they occupy.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson on average ranks. exact_permutation enumerates all n! orderings
/// (n <= 8) for the p-value instead of the t approximation.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y,
                           PValueMethod method = PValueMethod::t_approximation);

/// min(1, m p) for each p. Requires m >= p_values.size().
std::vector<double> bonferroni(std::span<const double> p_values, std::size_t family_size);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  bool jittered = false;
};

/// Welch two-sample t-test. When both samples are constant: equal means give
/// t = 0, p = 1; different means throw DegenerateSample unless
/// `jitter_epsilon` > 0, in which case each constant sample is spread
/// linearly over [v - eps, v + eps] (mean preserved) before testing.
WelchResult welch_t_test(std::span<const double> x, std::span<const double> y,
                         double jitter_epsilon = 0.0);

enum class MwuMode { automatic, exact, normal_approx };
std::string_view to_string(MwuMode mode);

struct MwuResult {
  double u = 0.0;  // sum over pairs of [x > y] + 0.5 [x == y]
  double p = 1.0;  // two-sided
  MwuMode mode = MwuMode::exact;
};

inline constexpr std::size_t kMwuAutoExactLimit = 14;  // automatic: exact when nx + ny <= this
inline constexpr std::size_t kMwuExactMaxTotal = 60;

/// Exact mode: the permutation distribution of U over all C(nx+ny, nx)
/// splits of the pooled sample (ties kept), p = min(1, 2 min(P[U<=u], P[U>=u])).
/// Normal mode: mean nx ny / 2, tie-corrected variance, continuity
/// correction 0.5.
MwuResult mann_whitney_u(std::span<const double> x, std::span<const double> y,
                         MwuMode mode = MwuMode::automatic);

double mean(std::span<const double> values);

}  // namespace tocrag
