#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <utility>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "graspdec/error.hpp"

namespace graspdec {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  int dof = 0;
};

// Paired t-test on a - b. All-zero differences give t = 0, p = 1; constant
// non-zero differences (zero variance) give t = +/-inf, p = 0.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired t-test: samples differ in length");
  if (a.size() < 2) throw DataError("paired t-test: need at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) all_zero = false;
    ss += (d - mean) * (d - mean);
  }
  TTestResult r;
  r.dof = static_cast<int>(a.size()) - 1;
  if (all_zero) return r;
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd == 0.0) {
    r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(r.dof);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

// Accuracy interval consistent with guessing among `classes` equally likely
// labels under Binomial(n, 1/classes): the smallest hit count k whose lower
// tail P(X <= k) exceeds alpha/2, up to the largest k whose upper tail
// P(X >= k) exceeds alpha/2, divided by n.
inline std::pair<double, double> chance_band(std::size_t n_trials, int classes, double alpha = 0.05) {
  if (n_trials == 0) throw ConfigError("chance band needs at least one trial");
  if (classes < 2) throw ConfigError("chance band needs at least two classes");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  const boost::math::binomial dist(static_cast<double>(n_trials), 1.0 / classes);
  const double q = alpha / 2.0;
  auto lower_tail = [&](std::size_t k) { return boost::math::cdf(dist, static_cast<double>(k)); };
  auto upper_tail = [&](std::size_t k) {  // P(X >= k)
    return k == 0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, static_cast<double>(k) - 1.0));
  };
  // Start from Boost's quantiles and step to the exact boundaries.
  auto lo = static_cast<std::size_t>(boost::math::quantile(dist, q));
  while (lo < n_trials && lower_tail(lo) <= q) ++lo;
  while (lo > 0 && lower_tail(lo - 1) > q) --lo;
  auto hi = static_cast<std::size_t>(boost::math::quantile(boost::math::complement(dist, q)));
  hi = std::min(hi, n_trials);
  while (hi > 0 && upper_tail(hi) <= q) --hi;
  while (hi < n_trials && upper_tail(hi + 1) > q) ++hi;
  const auto n = static_cast<double>(n_trials);
  return {static_cast<double>(lo) / n, static_cast<double>(hi) / n};
}

}  // namespace graspdec
