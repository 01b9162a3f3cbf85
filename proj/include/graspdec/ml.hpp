#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "graspdec/core.hpp"
#include "graspdec/csp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/io.hpp"
#include "graspdec/rng.hpp"

namespace graspdec {

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population standard deviation, 1 for constant columns

  static Standardizer fit(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw DataError("standardizer: no rows");
    Standardizer s;
    s.mean = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().mean());
      s.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(s.mean(j))) ? sd : 1.0;
    }
    return s;
  }

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const {
    return ((x - mean).array() / scale.array()).matrix();
  }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& x) const {
    return ((x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
  }

  bool operator==(const Standardizer&) const = default;
};

// ---------------------------------------------------------------------------
// Linear soft-margin SVM
// ---------------------------------------------------------------------------

struct SvmDualSolution {
  Eigen::VectorXd w;
  double b = 0.0;
  Eigen::VectorXd alpha;
  double primal = 0.0;  // 1/2 |w|^2 + C sum hinge
  double dual = 0.0;    // sum alpha - 1/2 |w|^2
  double max_violation = 0.0;
  long iterations = 0;
};

inline double svm_primal_objective(const Eigen::MatrixXd& x, std::span<const int> y, double c,
                                   const Eigen::VectorXd& w, double b) {
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    hinge += std::max(0.0, 1.0 - y[static_cast<std::size_t>(i)] * (x.row(i).dot(w) + b));
  }
  return 0.5 * w.squaredNorm() + c * hinge;
}

namespace detail {

inline void check_svm_input(const Eigen::MatrixXd& x, std::span<const int> y, double c) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("svm: label count does not match rows");
  if (x.rows() < 2) throw DataError("svm: need at least two samples");
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("svm: C must be positive");
  if (!x.allFinite()) throw DataError("svm: non-finite features");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw DataError("svm: labels must be +1 or -1");
  }
  if (!pos || !neg) throw DataError("svm: single-class input");
}

}  // namespace detail

// Solves  min_a 1/2 a^T Q a - e^T a,  0 <= a_i <= C,  y^T a = 0,  Q_ij = y_i y_j x_i.x_j
// by two-coordinate descent (maximal-violating-pair first index, second-order
// choice of the partner, as in Fan, Chen & Lin 2005). The bias stays
// unregularized, so the equality constraint forces paired updates.
// Stops when max_{I_up} F - min_{I_low} F <= tol with F_t = -y_t grad_t.
inline SvmDualSolution solve_svm_dual(const Eigen::MatrixXd& x, std::span<const int> y, double c,
                                      double tol = 1e-9) {
  detail::check_svm_input(x, y, c);
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd k = x * x.transpose();
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);
  constexpr double kTau = 1e-12;
  const long max_iter = std::max<long>(10'000'000L, 100L * static_cast<long>(n));

  auto in_up = [&](Eigen::Index t) { return yv(t) > 0 ? alpha(t) < c : alpha(t) > 0.0; };
  auto in_low = [&](Eigen::Index t) { return yv(t) > 0 ? alpha(t) > 0.0 : alpha(t) < c; };

  SvmDualSolution sol;
  double m_up = 0.0, m_low = 0.0;
  long iter = 0;
  for (;; ++iter) {
    m_up = -std::numeric_limits<double>::infinity();
    m_low = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double f = -yv(t) * grad(t);
      if (in_up(t) && f > m_up) {
        m_up = f;
        i = t;
      }
      if (in_low(t) && f < m_low) m_low = f;
    }
    if (i < 0 || m_up - m_low <= tol) break;
    if (iter >= max_iter) throw NumericalError("svm: dual solver did not converge");

    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double b = m_up + yv(t) * grad(t);
      if (b <= 0.0) continue;
      double a = k(i, i) + k(t, t) - 2.0 * k(i, t);
      if (a <= 0.0) a = kTau;
      const double gain = -(b * b) / a;
      if (gain < best) {
        best = gain;
        j = t;
      }
    }
    if (j < 0) break;

    // Step along d_i = y_i, d_j = -y_j.
    const double b = m_up + yv(j) * grad(j);
    double a = k(i, i) + k(j, j) - 2.0 * k(i, j);
    if (a <= 0.0) a = kTau;
    const double room_i = yv(i) > 0 ? c - alpha(i) : alpha(i);
    const double room_j = yv(j) > 0 ? alpha(j) : c - alpha(j);
    const double step = std::min({b / a, room_i, room_j});
    const double di = yv(i) * step;
    const double dj = -yv(j) * step;
    alpha(i) += di;
    alpha(j) += dj;
    if (step == room_i) alpha(i) = yv(i) > 0 ? c : 0.0;
    if (step == room_j) alpha(j) = yv(j) > 0 ? 0.0 : c;
    // grad_t += Q_ti di + Q_tj dj
    grad.array() += (yv.array() * (k.col(i).array() * (yv(i) * di) + k.col(j).array() * (yv(j) * dj)));
  }

  sol.alpha = alpha;
  sol.iterations = iter;
  sol.max_violation = std::max(0.0, m_up - m_low);
  sol.w = x.transpose() * (alpha.cwiseProduct(yv));

  double free_sum = 0.0;
  long free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha(t) > 0.0 && alpha(t) < c) {
      free_sum += -yv(t) * grad(t);
      ++free_count;
    }
  }
  if (free_count > 0) {
    sol.b = free_sum / static_cast<double>(free_count);
  } else {
    sol.b = std::isfinite(m_up) && std::isfinite(m_low) ? 0.5 * (m_up + m_low) : 0.0;
  }
  sol.dual = alpha.sum() - 0.5 * sol.w.squaredNorm();
  sol.primal = svm_primal_objective(x, y, c, sol.w, sol.b);
  return sol;
}

struct LinearSvmModel {
  Eigen::VectorXd w;  // in standardized feature space
  double b = 0.0;
  double c = 1.0;
  Standardizer scaler;

  double decision_value(const Eigen::VectorXd& x) const {
    if (x.size() != w.size()) throw DataError("feature vector length does not match the model");
    return w.dot(scaler.transform(x)) + b;
  }

  bool operator==(const LinearSvmModel&) const = default;
};

// Fits the standardizer on X, then the SVM on the standardized rows.
inline LinearSvmModel train_linear_svm(const Eigen::MatrixXd& x, std::span<const int> y, double c) {
  detail::check_svm_input(x, y, c);
  LinearSvmModel m;
  m.c = c;
  m.scaler = Standardizer::fit(x);
  const auto sol = solve_svm_dual(m.scaler.transform(x), y, c);
  m.w = sol.w;
  m.b = sol.b;
  return m;
}

inline nlohmann::json to_json(const LinearSvmModel& m) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"w", vec(m.w)},
          {"b", m.b},
          {"C", m.c},
          {"scaler", {{"mean", vec(m.scaler.mean)}, {"scale", vec(m.scaler.scale)}}}};
}

inline LinearSvmModel svm_from_json(const nlohmann::json& j) {
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  try {
    LinearSvmModel m;
    m.w = vec(j.at("w"));
    m.b = j.at("b").get<double>();
    m.c = j.at("C").get<double>();
    m.scaler.mean = vec(j.at("scaler").at("mean"));
    m.scaler.scale = vec(j.at("scaler").at("scale"));
    if (m.scaler.mean.size() != m.w.size() || m.scaler.scale.size() != m.w.size()) {
      throw DataError("SVM model: scaler length does not match weights");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed SVM model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DataError("accuracy: length mismatch");
  if (predicted.empty()) throw DataError("accuracy: no predictions");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// rows = truth, columns = prediction
inline Eigen::MatrixXi confusion(std::span<const int> predicted, std::span<const int> truth, int classes) {
  if (predicted.size() != truth.size()) throw DataError("confusion: length mismatch");
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(classes, classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
      throw DataError("confusion: label out of range");
    }
    ++m(truth[i], predicted[i]);
  }
  return m;
}

// Index of the largest score; ties go to the lowest index.
inline std::size_t argmax_lowest(std::span<const double> scores) {
  if (scores.empty()) throw DataError("argmax of no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Stratified k-fold cross-validation
// ---------------------------------------------------------------------------

struct FoldSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Samples are grouped by `strata`; within each group the sample order is
// shuffled with derive_seed(seed, "folds/<stratum>") and dealt round-robin
// into folds, continuing the deal position from the previous group.
inline std::vector<FoldSplit> stratified_folds(std::span<const int> strata, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
  std::vector<int> fold_of(strata.size(), 0);
  std::size_t deal = 0;
  for (auto& [stratum, members] : groups) {
    if (members.size() < static_cast<std::size_t>(k)) {
      throw DataError("too few trials: class " + std::to_string(stratum) + " has " +
                      std::to_string(members.size()) + " trials for " + std::to_string(k) + " folds");
    }
    Rng rng(derive_seed(seed, "folds/" + std::to_string(stratum)));
    rng.shuffle(std::span<std::size_t>(members));
    for (auto idx : members) fold_of[idx] = static_cast<int>(deal++ % static_cast<std::size_t>(k));
  }
  std::vector<FoldSplit> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < strata.size(); ++i) {
    for (int f = 0; f < k; ++f) {
      auto& split = folds[static_cast<std::size_t>(f)];
      (fold_of[i] == f ? split.validation : split.train).push_back(i);
    }
  }
  return folds;
}

struct FoldFeatures {
  Eigen::MatrixXd train_x;
  std::vector<int> train_y;
  Eigen::MatrixXd validation_x;
  std::vector<int> validation_y;
  std::vector<CspModel> csp;  // models fitted inside the fold, if any
};

using FoldFeaturizer = std::function<FoldFeatures(const FoldSplit&)>;

struct CvOptions {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0};
  bool keep_fold_models = false;
};

struct FoldArtifacts {
  std::vector<CspModel> csp;
  std::vector<LinearSvmModel> svm_by_c;  // one per grid entry, grid order
};

struct CvReport {
  std::vector<double> fold_accuracy;  // at the chosen C
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation across folds
  double chosen_c = 0.0;
  std::vector<double> c_grid;
  std::vector<double> grid_mean_accuracy;
  std::vector<std::vector<double>> grid_fold_accuracy;  // [c][fold]
  std::vector<FoldSplit> folds;
  std::vector<FoldArtifacts> artifacts;  // filled when keep_fold_models
};

inline double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// For each fold: featurize from the fold's training trials only, fit the
// standardizer and one SVM per C on them, score the validation trials. The C
// with the highest mean validation accuracy wins (first in grid order on ties).
inline CvReport cross_validate(std::span<const int> strata, const FoldFeaturizer& featurize,
                               const CvOptions& options) {
  if (options.c_grid.empty()) throw ConfigError("empty C grid");
  CvReport report;
  report.c_grid = options.c_grid;
  report.folds = stratified_folds(strata, options.k, options.seed);
  report.grid_fold_accuracy.assign(options.c_grid.size(), {});

  for (const auto& split : report.folds) {
    FoldFeatures ff = featurize(split);
    FoldArtifacts art;
    art.csp = std::move(ff.csp);
    for (std::size_t ci = 0; ci < options.c_grid.size(); ++ci) {
      const LinearSvmModel model = train_linear_svm(ff.train_x, ff.train_y, options.c_grid[ci]);
      std::vector<int> predicted;
      for (Eigen::Index r = 0; r < ff.validation_x.rows(); ++r) {
        predicted.push_back(model.decision_value(ff.validation_x.row(r).transpose()) >= 0.0 ? 1 : -1);
      }
      report.grid_fold_accuracy[ci].push_back(accuracy(predicted, ff.validation_y));
      if (options.keep_fold_models) art.svm_by_c.push_back(model);
    }
    if (options.keep_fold_models) report.artifacts.push_back(std::move(art));
  }

  std::size_t best = 0;
  for (std::size_t ci = 0; ci < options.c_grid.size(); ++ci) {
    report.grid_mean_accuracy.push_back(mean_of(report.grid_fold_accuracy[ci]));
    if (report.grid_mean_accuracy[ci] > report.grid_mean_accuracy[best]) best = ci;
  }
  report.chosen_c = options.c_grid[best];
  report.fold_accuracy = report.grid_fold_accuracy[best];
  report.mean_accuracy = report.grid_mean_accuracy[best];
  report.std_accuracy = sample_std(report.fold_accuracy);
  return report;
}

inline nlohmann::json to_json(const CvReport& r) {
  return {{"k", r.fold_accuracy.size()},
          {"fold_accuracy", r.fold_accuracy},
          {"mean_accuracy", r.mean_accuracy},
          {"std_accuracy", r.std_accuracy},
          {"chosen_C", r.chosen_c},
          {"C_grid", r.c_grid},
          {"grid_mean_accuracy", r.grid_mean_accuracy}};
}

inline std::string cv_report_csv(const CvReport& r) {
  std::string out = "fold,accuracy\n";
  for (std::size_t f = 0; f < r.fold_accuracy.size(); ++f) {
    out += std::to_string(f + 1) + "," + io::format_double(r.fold_accuracy[f]) + "\n";
  }
  out += "mean," + io::format_double(r.mean_accuracy) + "\n";
  out += "std," + io::format_double(r.std_accuracy) + "\n";
  return out;
}

}  // namespace graspdec
