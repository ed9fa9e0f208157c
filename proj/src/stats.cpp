#include "tocrag/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

namespace tocrag {

namespace {

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 100000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw StatsError("incomplete beta continued fraction did not converge");
}

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw LengthMismatch("series lengths differ: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  if (x.size() < 3) throw StatsError("correlation needs at least 3 observations");
}

double pearson_value(std::span<const double> x, std::span<const double> y) {
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw ConstantSeries("correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_t_p(double r, std::size_t n) {
  if (std::fabs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n) - 2.0;
  return student_t_two_sided_p(r * std::sqrt(df / (1.0 - r * r)), df);
}

double sample_variance(std::span<const double> v, double m) {
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

std::vector<double> jitter(std::span<const double> v, double eps) {
  std::vector<double> out(v.begin(), v.end());
  const double n = static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += eps * (2.0 * static_cast<double>(i) / (n - 1.0) - 1.0);
  }
  return out;
}

double u_statistic(std::span<const double> x, std::span<const double> y) {
  double u = 0;
  for (double a : x) {
    for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  }
  return u;
}

double mwu_exact_p(std::span<const double> x, std::span<const double> y, double u) {
  const std::size_t nx = x.size();
  const std::size_t n = nx + y.size();
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  // Doubled midranks are integers, so rank sums can index the table.
  const std::vector<double> ranks = average_ranks(pooled);
  std::vector<std::size_t> r2(n);
  for (std::size_t i = 0; i < n; ++i) r2[i] = static_cast<std::size_t>(std::lround(2 * ranks[i]));
  const std::size_t max_sum = n * (n + 1);

  // ways[j][s]: number of j-element subsets with doubled rank sum s.
  std::vector<std::vector<std::uint64_t>> ways(nx + 1, std::vector<std::uint64_t>(max_sum + 1, 0));
  ways[0][0] = 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = std::min(i + 1, nx); j >= 1; --j) {
      for (std::size_t s = max_sum; s >= r2[i]; --s) {
        ways[j][s] += ways[j - 1][s - r2[i]];
        if (s == r2[i]) break;
      }
    }
  }
  // U = R_x - nx(nx+1)/2, so in doubled units 2U + nx(nx+1) is the rank sum.
  const auto observed = static_cast<std::size_t>(std::lround(2 * u)) + nx * (nx + 1);
  long double total = 0, le = 0, ge = 0;
  for (std::size_t s = 0; s <= max_sum; ++s) {
    const auto w = static_cast<long double>(ways[nx][s]);
    total += w;
    if (s <= observed) le += w;
    if (s >= observed) ge += w;
  }
  return static_cast<double>(std::min<long double>(1.0L, 2.0L * std::min(le, ge) / total));
}

double mwu_normal_p(std::span<const double> x, std::span<const double> y, double u) {
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double n = nx + ny;
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  std::sort(pooled.begin(), pooled.end());
  double tie_sum = 0;
  for (std::size_t i = 0; i < pooled.size();) {
    std::size_t j = i;
    while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_sum += t * t * t - t;
    i = j;
  }
  const double var = nx * ny / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
  if (var <= 0) return 1.0;
  const double z = std::max(0.0, std::fabs(u - nx * ny / 2.0) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) throw StatsError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw StatsError("incomplete beta needs a, b > 0");
  if (x < 0 || x > 1 || std::isnan(x)) throw StatsError("incomplete beta needs x in [0, 1]");
  if (x == 0) return 0.0;
  if (x == 1) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0) throw StatsError("Student-t needs df > 0");
  if (std::isnan(t)) throw StatsError("Student-t of NaN");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

double student_t_cdf(double t, double df) {
  const double tail = student_t_two_sided_p(t, df) / 2.0;
  return t >= 0 ? 1.0 - tail : tail;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

std::string_view to_string(CorrelationKind kind) {
  return kind == CorrelationKind::pearson_r ? "pearson_r" : "spearman_rho";
}

std::string_view to_string(MwuMode mode) {
  switch (mode) {
    case MwuMode::automatic: return "automatic";
    case MwuMode::exact: return "exact";
    case MwuMode::normal_approx: return "normal_approx";
  }
  return "?";
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  CorrelationResult r;
  r.kind = CorrelationKind::pearson_r;
  r.n = x.size();
  r.value = pearson_value(x, y);
  r.p_value = r.p_adjusted = correlation_t_p(r.value, r.n);
  return r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i+1 .. j share their mean.
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y,
                           PValueMethod method) {
  require_same_length(x, y);
  const auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  CorrelationResult r;
  r.kind = CorrelationKind::spearman_rho;
  r.n = x.size();
  r.value = pearson_value(rx, ry);
  if (method == PValueMethod::t_approximation) {
    r.p_value = correlation_t_p(r.value, r.n);
  } else {
    if (r.n > 8) throw SampleTooLargeForExact("exact Spearman permutation needs n <= 8");
    std::sort(ry.begin(), ry.end());
    std::size_t hits = 0, total = 0;
    const double observed = std::fabs(r.value) - 1e-12;
    // Distinct orderings of the tied ranks each stand for the same number of
    // the n! permutations, so counting them gives the same fraction.
    do {
      ++total;
      if (std::fabs(pearson_value(rx, ry)) >= observed) ++hits;
    } while (std::next_permutation(ry.begin(), ry.end()));
    r.p_value = static_cast<double>(hits) / static_cast<double>(total);
  }
  r.p_adjusted = r.p_value;
  return r;
}

std::vector<double> bonferroni(std::span<const double> p_values, std::size_t family_size) {
  if (family_size < p_values.size()) {
    throw StatsError("Bonferroni family size smaller than the number of p-values");
  }
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0 && p <= 1)) throw StatsError("p-value outside [0, 1]");
    out.push_back(std::min(1.0, static_cast<double>(family_size) * p));
  }
  return out;
}

WelchResult welch_t_test(std::span<const double> x_in, std::span<const double> y_in,
                         double jitter_epsilon) {
  if (x_in.size() < 2 || y_in.size() < 2) throw StatsError("Welch t-test needs n >= 2 per sample");
  std::vector<double> x(x_in.begin(), x_in.end());
  std::vector<double> y(y_in.begin(), y_in.end());
  WelchResult res;
  double mx = mean(x), my = mean(y);
  double vx = sample_variance(x, mx), vy = sample_variance(y, my);
  if (vx == 0 && vy == 0) {
    if (mx == my) {
      res.t = 0;
      res.df = static_cast<double>(x.size() + y.size() - 2);
      res.p = 1.0;
      return res;
    }
    if (jitter_epsilon <= 0) {
      throw DegenerateSample("both samples are constant with different means");
    }
    x = jitter(x, jitter_epsilon);
    y = jitter(y, jitter_epsilon);
    vx = sample_variance(x, mx);
    vy = sample_variance(y, my);
    res.jittered = true;
  }
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double ax = vx / nx;
  const double ay = vy / ny;
  res.t = (mx - my) / std::sqrt(ax + ay);
  res.df = (ax + ay) * (ax + ay) / (ax * ax / (nx - 1) + ay * ay / (ny - 1));
  res.p = student_t_two_sided_p(res.t, res.df);
  return res;
}

MwuResult mann_whitney_u(std::span<const double> x, std::span<const double> y, MwuMode mode) {
  if (x.empty() || y.empty()) throw StatsError("Mann-Whitney U needs non-empty samples");
  const std::size_t total = x.size() + y.size();
  if (mode == MwuMode::automatic) {
    mode = total <= kMwuAutoExactLimit ? MwuMode::exact : MwuMode::normal_approx;
  }
  MwuResult res;
  res.u = u_statistic(x, y);
  res.mode = mode;
  if (mode == MwuMode::exact) {
    if (total > kMwuExactMaxTotal) {
      throw SampleTooLargeForExact("exact Mann-Whitney U supports nx + ny <= " +
                                   std::to_string(kMwuExactMaxTotal));
    }
    res.p = mwu_exact_p(x, y, res.u);
  } else {
    res.p = mwu_normal_p(x, y, res.u);
  }
  return res;
}

}  // namespace tocrag
