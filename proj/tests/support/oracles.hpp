#pragma once

// Reference implementations used as test oracles. They follow textbook
// definitions directly (pair counting, full enumeration, closed forms, Boost
// distributions) and share no code with the library.

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace oracle {

inline long double mean(const std::vector<double>& v) {
  long double s = 0;
  for (double x : v) s += x;
  return s / static_cast<long double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const long double mx = mean(x), my = mean(y);
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double t_two_sided(double t, double df) {
  boost::math::students_t dist(df);
  return 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

inline double pearson_p(double r, std::size_t n) {
  if (std::fabs(r) >= 1) return 0.0;
  const double df = static_cast<double>(n) - 2;
  return t_two_sided(r * std::sqrt(df / (1 - r * r)), df);
}

/// Rank of v[i]: (number strictly below) + (ties including itself + 1) / 2.
inline std::vector<double> midranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double below = 0, equal = 0;
    for (double w : v) {
      below += w < v[i];
      equal += w == v[i];
    }
    r[i] = below + (equal + 1) / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(midranks(x), midranks(y));
}

/// Two-sided permutation p of Spearman's rho over all n! reorderings of y.
inline double spearman_permutation_p(const std::vector<double>& x, const std::vector<double>& y) {
  const double observed = std::fabs(spearman(x, y));
  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::uint64_t hits = 0, total = 0;
  do {
    std::vector<double> yp(y.size());
    for (std::size_t i = 0; i < idx.size(); ++i) yp[i] = y[idx[i]];
    hits += std::fabs(spearman(x, yp)) >= observed - 1e-12;
    ++total;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct Welch {
  double t, df, p;
};

inline Welch welch(const std::vector<double>& x, const std::vector<double>& y) {
  const long double mx = mean(x), my = mean(y);
  long double vx = 0, vy = 0;
  for (double a : x) vx += (a - mx) * (a - mx);
  for (double b : y) vy += (b - my) * (b - my);
  const long double nx = x.size(), ny = y.size();
  vx /= nx - 1;
  vy /= ny - 1;
  const long double se2 = vx / nx + vy / ny;
  const long double t = (mx - my) / std::sqrt(se2);
  const long double df =
      se2 * se2 / ((vx / nx) * (vx / nx) / (nx - 1) + (vy / ny) * (vy / ny) / (ny - 1));
  return {static_cast<double>(t), static_cast<double>(df),
          t_two_sided(static_cast<double>(t), static_cast<double>(df))};
}

/// U = #{x_i > y_j} + 0.5 #{x_i = y_j}, by direct pair counting.
inline double mwu_u(const std::vector<double>& x, const std::vector<double>& y) {
  double u = 0;
  for (double a : x) {
    for (double b : y) u += a > b ? 1.0 : a == b ? 0.5 : 0.0;
  }
  return u;
}

/// Exact two-sided p by enumerating every nx-subset of the pooled sample.
inline double mwu_exact_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const std::size_t n = pooled.size(), nx = x.size();
  const double u = mwu_u(x, y);
  std::uint64_t le = 0, ge = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != nx) continue;
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) ((mask >> i) & 1u ? a : b).push_back(pooled[i]);
    const double v = mwu_u(a, b);
    le += v <= u + 1e-9;
    ge += v >= u - 1e-9;
    ++total;
  }
  return std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(total));
}

/// Normal approximation: mean nx ny / 2, tie-corrected variance, continuity 0.5.
inline double mwu_normal_p(const std::vector<double>& x, const std::vector<double>& y) {
  const double nx = x.size(), ny = y.size(), n = nx + ny;
  std::map<double, double> ties;
  for (double v : x) ties[v] += 1;
  for (double v : y) ties[v] += 1;
  double tie_term = 0;
  for (const auto& [v, t] : ties) tie_term += t * t * t - t;
  const double var = nx * ny / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
  if (var <= 0) return 1.0;
  const double dev = std::max(0.0, std::fabs(mwu_u(x, y) - nx * ny / 2) - 0.5);
  boost::math::normal_distribution<double> z;
  return std::min(1.0, 2 * boost::math::cdf(boost::math::complement(z, dev / std::sqrt(var))));
}

/// Multiset intersection by repeatedly pairing off equal elements.
inline double overlap(std::vector<std::string> a, std::vector<std::string> b) {
  const double denom = static_cast<double>(std::min(a.size(), b.size()));
  double shared = 0;
  for (auto it = a.begin(); it != a.end();) {
    auto hit = std::find(b.begin(), b.end(), *it);
    if (hit != b.end()) {
      b.erase(hit);
      it = a.erase(it);
      ++shared;
    } else {
      ++it;
    }
  }
  return shared / denom;
}

inline long double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  long double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<long double>(u[i]) * v[i];
    uu += static_cast<long double>(u[i]) * u[i];
    vv += static_cast<long double>(v[i]) * v[i];
  }
  return dot / std::sqrt(uu * vv);
}

/// Greedy MMR re-derived from its definition: at each step score every
/// remaining candidate from scratch. Near-equal scores go to the lower index.
inline std::vector<std::size_t> mmr(const std::vector<double>& query,
                                    const std::vector<std::vector<double>>& docs, double lambda,
                                    std::size_t k) {
  std::vector<std::size_t> chosen;
  k = std::min(k, docs.size());
  while (chosen.size() < k) {
    long double best_score = 0;
    std::size_t best = docs.size();
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
      long double score = cosine(query, docs[i]);
      if (!chosen.empty()) {
        long double red = -2;
        for (std::size_t s : chosen) red = std::max(red, cosine(docs[i], docs[s]));
        score = lambda * score - (1 - lambda) * red;
      }
      if (best == docs.size() || score > best_score + 1e-12L) {
        best = i;
        best_score = score;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

}  // namespace oracle
