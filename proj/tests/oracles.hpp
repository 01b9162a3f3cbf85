#pragma once

// Independent reference computations used only by the tests. None of these
// call into the library's numerical code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "graspdec/rng.hpp"

namespace oracle {

inline Eigen::MatrixXd naive_matmul(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      c(i, j) = static_cast<double>(s);
    }
  return c;
}

inline Eigen::MatrixXd random_matrix(graspdec::Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

// Q diag(lambda) Q^T with Q from a Householder QR of a Gaussian matrix and
// eigenvalues spread over [lo, hi] on a log scale.
inline Eigen::MatrixXd random_spd(graspdec::Rng& rng, Eigen::Index n, double lo = 0.1, double hi = 10.0) {
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(rng, n, n)).householderQ();
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) lambda(i) = lo * std::pow(hi / lo, rng.uniform01());
  return q * lambda.asDiagonal() * q.transpose();
}

// Closed-form magnitude of the bilinear-transformed Butterworth bandpass of
// total order 2n: |H|^2 = 1 / (1 + ((W^2 - W0^2) / (B W))^(2n)), where W is the
// prewarped analog frequency.
inline double butterworth_bandpass_mag(double f, double lo, double hi, double fs, int order) {
  auto warp = [fs](double x) { return 2.0 * fs * std::tan(std::numbers::pi * x / fs); };
  const double w = warp(f), w1 = warp(lo), w2 = warp(hi);
  const double x = (w * w - w1 * w2) / ((w2 - w1) * w);
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, order / 2));
}

inline double butterworth_lowpass_mag(double f, double cut, double fs, int order) {
  auto warp = [fs](double x) { return 2.0 * fs * std::tan(std::numbers::pi * x / fs); };
  const double x = warp(f) / warp(cut);
  return 1.0 / std::sqrt(1.0 + std::pow(x, 2 * order));
}

// Largest eigenvalue by power iteration.
inline double power_iteration(const Eigen::MatrixXd& q) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(q.rows()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 5000; ++it) {
    const Eigen::VectorXd u = q * v;
    const double n = u.norm();
    if (n == 0.0) return 0.0;
    lambda = v.dot(u);
    v = u / n;
  }
  return lambda;
}

// Projection onto {0 <= a <= c, y.a = 0} by bisection on the multiplier.
inline Eigen::VectorXd project_box_hyperplane(const Eigen::VectorXd& v, const std::vector<int>& y, double c) {
  auto at = [&](double nu) {
    Eigen::VectorXd a(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) a(i) = std::clamp(v(i) - nu * y[static_cast<std::size_t>(i)], 0.0, c);
    return a;
  };
  auto g = [&](double nu) {
    const Eigen::VectorXd a = at(nu);
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) s += y[static_cast<std::size_t>(i)] * a(i);
    return s;
  };
  double lo = -1.0, hi = 1.0;
  while (g(lo) < 0.0) lo *= 2.0;
  while (g(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return at(0.5 * (lo + hi));
}

// Minimizes the SVM dual 0.5 a'Qa - 1'a, Q_ij = y_i y_j x_i.x_j, over the box
// and the equality constraint with accelerated projected gradient. Returns
// the dual objective in the maximization convention (1'a - 0.5 a'Qa).
inline double svm_dual_objective_pg(const Eigen::MatrixXd& x, const std::vector<int>& y, double c,
                                    int iterations = 5000) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      q(i, j) = y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * x.row(i).dot(x.row(j));
  const double step = 1.0 / std::max(power_iteration(q), 1e-12);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), z = a;
  double t = 1.0;
  auto objective = [&](const Eigen::VectorXd& v) { return v.sum() - 0.5 * v.dot(q * v); };
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd grad = q * z - Eigen::VectorXd::Ones(n);
    const Eigen::VectorXd next = project_box_hyperplane(z - step * grad, y, c);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / t_next) * (next - a);
    // restart when the objective gets worse
    if (objective(next) < objective(a)) {
      z = next;
      t = 1.0;
    } else {
      t = t_next;
    }
    a = next;
  }
  return objective(a);
}

// Binomial(n, p) quantiles by summing the pmf: smallest k with CDF(k) >= q.
inline int binomial_lower_quantile(int n, double p, double q) {
  double cdf = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                           (n - k) * std::log1p(-p);
    cdf += std::exp(log_pmf);
    if (cdf >= q) return k;
  }
  return n;
}

// Smallest k with P(X > k) <= q.
inline int binomial_upper_quantile(int n, double p, double q) {
  double tail = 1.0;
  for (int k = 0; k <= n; ++k) {
    const double log_pmf = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * std::log(p) +
                           (n - k) * std::log1p(-p);
    tail -= std::exp(log_pmf);
    if (tail <= q) return k;
  }
  return n;
}

// Two-sided p-value of Student's t by Simpson integration of the density.
inline double student_t_two_sided_p(double t, int dof) {
  const double nu = dof;
  const double norm = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * std::numbers::pi);
  auto pdf = [&](double x) { return norm * std::pow(1.0 + x * x / nu, -(nu + 1) / 2); };
  const double a = 0.0, b = std::abs(t);
  const int m = 200000;
  const double h = (b - a) / m;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  const double central = s * h / 3.0;  // P(0 < T < |t|)
  return 1.0 - 2.0 * central;
}

}  // namespace oracle
