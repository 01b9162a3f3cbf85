#pragma once

#include <cmath>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "graspdec/core.hpp"
#include "graspdec/dsp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/io.hpp"
#include "graspdec/linalg.hpp"

namespace graspdec {

// Two groups of class labels. Binary pairs ("pen-vs-bottle") and one-vs-rest
// members ("pen-vs-rest") are both scenarios.
struct Scenario {
  std::vector<Label> class_a;
  std::vector<Label> class_b;

  bool operator==(const Scenario&) const = default;

  static Scenario pair(Label a, Label b) { return {{a}, {b}}; }

  static Scenario one_vs_rest(Label target, const std::vector<Label>& present) {
    Scenario s{{target}, {}};
    for (auto l : present) {
      if (l != target) s.class_b.push_back(l);
    }
    return s;
  }

  bool is_one_vs_rest() const { return class_a.size() == 1 && class_b.size() > 1; }

  // +1 for class A, -1 for class B, 0 if the label is not part of the scenario.
  int side(Label label) const {
    for (auto l : class_a)
      if (l == label) return 1;
    for (auto l : class_b)
      if (l == label) return -1;
    return 0;
  }

  std::string name() const {
    std::string out(label_name(class_a.front()));
    for (std::size_t i = 1; i < class_a.size(); ++i) out += "+" + std::string(label_name(class_a[i]));
    out += "-vs-";
    if (is_one_vs_rest()) return out + "rest";
    out += std::string(label_name(class_b.front()));
    for (std::size_t i = 1; i < class_b.size(); ++i) out += "+" + std::string(label_name(class_b[i]));
    return out;
  }
};

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json a = nlohmann::json::array(), b = nlohmann::json::array();
  for (auto l : s.class_a) a.push_back(index_of(l));
  for (auto l : s.class_b) b.push_back(index_of(l));
  return {{"name", s.name()}, {"class_a", a}, {"class_b", b}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  for (const auto& v : j.at("class_a")) s.class_a.push_back(label_from_int(v.get<int>()));
  for (const auto& v : j.at("class_b")) s.class_b.push_back(label_from_int(v.get<int>()));
  if (s.class_a.empty() || s.class_b.empty()) throw DataError("scenario with an empty side");
  return s;
}

struct CspModel {
  Eigen::MatrixXd filters;      // W, C x C; filter j is column j, S = W^T E
  Eigen::VectorXd eigenvalues;  // whitened class-A eigenvalues, descending
  BandName band = BandName::theta;
  Scenario scenario;
  std::string window;  // phase name or explicit window tag
  std::string montage_hash;

  std::size_t channels() const { return static_cast<std::size_t>(filters.rows()); }

  bool operator==(const CspModel&) const = default;
};

// E E^T / trace(E E^T). No mean removal; the data is already high-passed.
inline Eigen::MatrixXd trial_covariance(const Eigen::MatrixXd& e) {
  if (e.cols() == 0) throw DataError("trial_covariance: no samples");
  Eigen::MatrixXd cov = e * e.transpose();
  const double tr = cov.trace();
  if (!(tr > 0.0)) throw NumericalError("zero-energy trial");
  return cov / tr;
}

inline Eigen::MatrixXd mean_covariance(std::span<const Eigen::MatrixXd> covariances) {
  if (covariances.empty()) throw DataError("empty class");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(covariances.front().rows(), covariances.front().cols());
  for (const auto& c : covariances) sum += c;
  return sum / static_cast<double>(covariances.size());
}

inline Eigen::MatrixXd class_mean_covariance(std::span<const Eigen::MatrixXd> trials) {
  if (trials.empty()) throw DataError("empty class");
  std::vector<Eigen::MatrixXd> covs;
  covs.reserve(trials.size());
  for (const auto& e : trials) covs.push_back(trial_covariance(e));
  return mean_covariance(covs);
}

inline constexpr double kRankTolerance = 1e-10;

// P = D^{-1/2} U^T from the eigendecomposition of the composite covariance.
inline Eigen::MatrixXd whitening_transform(const Eigen::MatrixXd& composite) {
  const auto eig = eigh(composite);
  const double largest = eig.values(0);
  const double smallest = eig.values(eig.values.size() - 1);
  if (!(largest > 0.0) || smallest <= kRankTolerance * largest) {
    throw NumericalError("rank-deficient composite covariance (eigenvalue ratio " +
                         std::to_string(smallest / largest) + ")");
  }
  return eig.values.cwiseSqrt().cwiseInverse().asDiagonal() * eig.vectors.transpose();
}

// CSP from per-class mean covariances (trace-normalized).
inline CspModel fit_csp_from_means(const Eigen::MatrixXd& sigma_a, const Eigen::MatrixXd& sigma_b) {
  const Eigen::MatrixXd p = whitening_transform(sigma_a + sigma_b);
  Eigen::MatrixXd whitened_a = p * sigma_a * p.transpose();
  whitened_a = 0.5 * (whitened_a + whitened_a.transpose());
  const auto eig = eigh(whitened_a);
  CspModel m;
  m.filters = p.transpose() * eig.vectors;
  m.eigenvalues = eig.values;
  return m;
}

inline CspModel fit_csp_from_covariances(std::span<const Eigen::MatrixXd> covs_a,
                                         std::span<const Eigen::MatrixXd> covs_b) {
  return fit_csp_from_means(mean_covariance(covs_a), mean_covariance(covs_b));
}

// Class blocks are C x T' phase segments.
inline CspModel fit_csp(std::span<const Eigen::MatrixXd> class_a, std::span<const Eigen::MatrixXd> class_b) {
  return fit_csp_from_means(class_mean_covariance(class_a), class_mean_covariance(class_b));
}

inline Eigen::MatrixXd project(const CspModel& m, const Eigen::MatrixXd& e) {
  if (e.rows() != m.filters.rows()) throw DataError("project: channel count does not match model");
  return m.filters.transpose() * e;
}

inline constexpr double kVarianceFloor = 1e-300;

namespace detail {

inline Eigen::VectorXd normalized_log(Eigen::VectorXd var) {
  bool clamped = false;
  for (Eigen::Index j = 0; j < var.size(); ++j) {
    if (var(j) < kVarianceFloor) {
      var(j) = kVarianceFloor;
      clamped = true;
    }
  }
  if (clamped) std::cerr << "warning: zero-variance CSP component clamped before log\n";
  const double total = var.sum();
  return (var / total).array().log().matrix();
}

}  // namespace detail

// x_j = log(var(S_j) / sum_k var(S_k)), variance about the row mean.
inline Eigen::VectorXd log_variance_features(const Eigen::MatrixXd& s) {
  if (s.cols() == 0) throw DataError("log_variance_features: no samples");
  Eigen::VectorXd var(s.rows());
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    const double mean = s.row(j).mean();
    var(j) = (s.row(j).array() - mean).square().mean();
  }
  if (!(var.maxCoeff() > 0.0)) throw NumericalError("all-zero projection");
  return detail::normalized_log(std::move(var));
}

// Same features from a precomputed centered scatter (E - mean)(E - mean)^T / T'.
inline Eigen::VectorXd log_variance_from_scatter(const Eigen::MatrixXd& filters,
                                                 const Eigen::MatrixXd& centered_scatter) {
  Eigen::VectorXd var = (filters.transpose() * centered_scatter * filters).diagonal();
  var = var.cwiseMax(0.0);
  if (!(var.maxCoeff() > 0.0)) throw NumericalError("all-zero projection");
  return detail::normalized_log(std::move(var));
}

// Scalp patterns A = (W^-1)^T; column j is the pattern of filter j.
inline Eigen::MatrixXd csp_patterns(const CspModel& m) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m.filters);
  if (!lu.isInvertible()) throw NumericalError("singular CSP filter matrix");
  return lu.inverse().transpose();
}

inline nlohmann::json to_json(const CspModel& m) {
  std::vector<double> w_row_major;
  w_row_major.reserve(static_cast<std::size_t>(m.filters.size()));
  for (Eigen::Index r = 0; r < m.filters.rows(); ++r)
    for (Eigen::Index c = 0; c < m.filters.cols(); ++c) w_row_major.push_back(m.filters(r, c));
  std::vector<double> eig(m.eigenvalues.data(), m.eigenvalues.data() + m.eigenvalues.size());
  return {{"channels", m.filters.rows()},
          {"filters_f64_b64", io::encode_f64(w_row_major)},
          {"eigenvalues_f64_b64", io::encode_f64(eig)},
          {"band", std::string(band_name(m.band))},
          {"scenario", to_json(m.scenario)},
          {"window", m.window},
          {"montage_hash", m.montage_hash}};
}

inline CspModel csp_from_json(const nlohmann::json& j) {
  try {
    CspModel m;
    const auto n = j.at("channels").get<Eigen::Index>();
    const auto w = io::decode_f64(j.at("filters_f64_b64").get<std::string>());
    const auto eig = io::decode_f64(j.at("eigenvalues_f64_b64").get<std::string>());
    if (static_cast<Eigen::Index>(w.size()) != n * n || static_cast<Eigen::Index>(eig.size()) != n) {
      throw DataError("CSP model: payload size does not match channel count");
    }
    m.filters.resize(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) m.filters(r, c) = w[static_cast<std::size_t>(r * n + c)];
    m.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eig.data(), n);
    m.band = band_from_name(j.at("band").get<std::string>());
    m.scenario = scenario_from_json(j.at("scenario"));
    m.window = j.at("window").get<std::string>();
    m.montage_hash = j.at("montage_hash").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed CSP model: ") + e.what());
  }
}

}  // namespace graspdec
