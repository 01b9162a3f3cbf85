#pragma once

// Leakage-safe FBCSP and MRCP classifiers built on the ml primitives.
//
// Band statistics are computed once per (dataset, band, window) and shared by
// every scenario and fold; only the CSP fit and the standardizer/SVM depend on
// which trials are in a fold's training set.

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "graspdec/core.hpp"
#include "graspdec/csp.hpp"
#include "graspdec/dsp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/features.hpp"
#include "graspdec/ml.hpp"

namespace graspdec {

inline constexpr int kBundleVersion = 1;

inline void sort_canonical(std::vector<BandSpec>& bands) {
  std::stable_sort(bands.begin(), bands.end(),
                   [](const BandSpec& a, const BandSpec& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < bands.size(); ++i) {
    if (bands[i].name == bands[i - 1].name) throw ConfigError("band listed twice");
  }
}

// Band statistics of every trial in a dataset for one window.
struct StatsTable {
  std::vector<BandSpec> bands;  // canonical order
  TrialWindow window = TrialWindow::of(Phase::planning);
  std::vector<BandTrialStats> per_band;
};

inline std::vector<StatsTable> compute_stats_tables(const Dataset& ds, std::vector<BandSpec> bands,
                                                    std::span<const TrialWindow> windows, std::size_t pad_len) {
  if (bands.empty()) throw ConfigError("filter bank is empty");
  sort_canonical(bands);
  std::vector<StatsTable> tables;
  for (const auto& w : windows) tables.push_back({bands, w, {}});
  for (const auto& band : bands) {
    auto per_window = compute_band_stats(ds.trials, band, windows, ds.sample_rate, pad_len);
    for (std::size_t w = 0; w < windows.size(); ++w) tables[w].per_band.push_back(std::move(per_window[w]));
  }
  return tables;
}

inline StatsTable compute_stats_table(const Dataset& ds, std::vector<BandSpec> bands, const TrialWindow& window,
                                      std::size_t pad_len) {
  return std::move(compute_stats_tables(ds, std::move(bands), std::span<const TrialWindow>(&window, 1), pad_len)
                       .front());
}

// The trials of a dataset that take part in a scenario.
struct ScenarioView {
  std::vector<std::size_t> trials;  // dataset indices
  std::vector<int> y;               // +1 class A, -1 class B
  std::vector<int> strata;          // original class label
};

inline ScenarioView scenario_view(const Dataset& ds, const Scenario& scenario) {
  ScenarioView v;
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    const int side = scenario.side(ds.trials[i].label);
    if (side == 0) continue;
    v.trials.push_back(i);
    v.y.push_back(side);
    v.strata.push_back(index_of(ds.trials[i].label));
  }
  return v;
}

// CSP per band from the view rows listed in `rows`.
inline std::vector<CspModel> fit_band_models(const StatsTable& table, const ScenarioView& view,
                                             std::span<const std::size_t> rows, const Scenario& scenario,
                                             const std::string& montage_hash) {
  std::vector<CspModel> models;
  for (const auto& stats : table.per_band) {
    std::vector<Eigen::MatrixXd> covs_a, covs_b;
    for (auto r : rows) {
      const auto& cov = stats.covariance[view.trials[r]];
      (view.y[r] > 0 ? covs_a : covs_b).push_back(cov);
    }
    CspModel m = fit_csp_from_covariances(covs_a, covs_b);
    m.band = stats.band;
    m.scenario = scenario;
    m.window = table.window.tag();
    m.montage_hash = montage_hash;
    models.push_back(std::move(m));
  }
  return models;
}

inline Eigen::MatrixXd fbcsp_feature_rows(const StatsTable& table, const std::vector<CspModel>& models,
                                          const ScenarioView& view, std::span<const std::size_t> rows) {
  const Eigen::Index per_band = models.empty() ? 0 : models.front().filters.cols();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), per_band * static_cast<Eigen::Index>(models.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t b = 0; b < models.size(); ++b) {
      const auto& scatter = table.per_band[b].scatter[view.trials[rows[r]]];
      x.row(static_cast<Eigen::Index>(r)).segment(static_cast<Eigen::Index>(b) * per_band, per_band) =
          log_variance_from_scatter(models[b].filters, scatter).transpose();
    }
  }
  return x;
}

namespace detail {

inline std::vector<int> pick(const std::vector<int>& v, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

inline std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace detail

inline CvReport kfold_cv_fbcsp(const Dataset& ds, const StatsTable& table, const Scenario& scenario,
                               const CvOptions& options) {
  const ScenarioView view = scenario_view(ds, scenario);
  const std::string hash = ds.montage.hash();
  FoldFeaturizer featurize = [&](const FoldSplit& split) {
    FoldFeatures ff;
    ff.csp = fit_band_models(table, view, split.train, scenario, hash);
    ff.train_x = fbcsp_feature_rows(table, ff.csp, view, split.train);
    ff.validation_x = fbcsp_feature_rows(table, ff.csp, view, split.validation);
    ff.train_y = detail::pick(view.y, split.train);
    ff.validation_y = detail::pick(view.y, split.validation);
    return ff;
  };
  return cross_validate(view.strata, featurize, options);
}

// Per-trial MRCP features (flattened C x 7) for a whole dataset.
struct MrcpTable {
  Eigen::MatrixXd rows;
};

inline MrcpTable compute_mrcp_table(const Dataset& ds, std::size_t pad_len) {
  MrcpTable t;
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    const Eigen::VectorXd f = extract_mrcp(ds.trials[i], ds.sample_rate, pad_len).flattened();
    if (i == 0) t.rows.resize(static_cast<Eigen::Index>(ds.trials.size()), f.size());
    t.rows.row(static_cast<Eigen::Index>(i)) = f.transpose();
  }
  return t;
}

namespace detail {

inline Eigen::MatrixXd mrcp_rows(const MrcpTable& table, const ScenarioView& view,
                                 std::span<const std::size_t> rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), table.rows.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x.row(static_cast<Eigen::Index>(r)) = table.rows.row(static_cast<Eigen::Index>(view.trials[rows[r]]));
  }
  return x;
}

}  // namespace detail

inline CvReport kfold_cv_mrcp(const Dataset& ds, const MrcpTable& table, const Scenario& scenario,
                              const CvOptions& options) {
  const ScenarioView view = scenario_view(ds, scenario);
  FoldFeaturizer featurize = [&](const FoldSplit& split) {
    FoldFeatures ff;
    ff.train_x = detail::mrcp_rows(table, view, split.train);
    ff.validation_x = detail::mrcp_rows(table, view, split.validation);
    ff.train_y = detail::pick(view.y, split.train);
    ff.validation_y = detail::pick(view.y, split.validation);
    return ff;
  };
  return cross_validate(view.strata, featurize, options);
}

// ---------------------------------------------------------------------------
// Fitted classifiers
// ---------------------------------------------------------------------------

enum class FeatureKind { fbcsp, mrcp };

inline std::string_view feature_kind_name(FeatureKind k) { return k == FeatureKind::fbcsp ? "fbcsp" : "mrcp"; }

struct BinaryClassifier {
  FeatureKind kind = FeatureKind::fbcsp;
  Scenario scenario;
  TrialWindow window = TrialWindow::of(Phase::planning);  // FBCSP only
  std::vector<BandSpec> bands;                           // FBCSP only, canonical order
  std::vector<CspModel> csp;                             // one per band
  LinearSvmModel svm;
  CvReport cv;

  Eigen::VectorXd features(const Trial& trial, double fs, std::size_t pad_len) const {
    if (kind == FeatureKind::mrcp) return extract_mrcp(trial, fs, pad_len).flattened();
    std::map<BandName, CspModel> models;
    for (const auto& m : csp) models.emplace(m.band, m);
    return extract_fbcsp(trial, window, models, bands, fs, pad_len).broadband;
  }

  double decision_value(const Trial& trial, double fs, std::size_t pad_len) const {
    return svm.decision_value(features(trial, fs, pad_len));
  }
};

// Cross-validates over the C grid, then refits CSP, standardizer and SVM on
// all scenario trials with the chosen C.
inline BinaryClassifier train_fbcsp_binary(const Dataset& ds, const StatsTable& table, const Scenario& scenario,
                                           const CvOptions& options) {
  BinaryClassifier clf;
  clf.kind = FeatureKind::fbcsp;
  clf.scenario = scenario;
  clf.window = table.window;
  clf.bands = table.bands;
  clf.cv = kfold_cv_fbcsp(ds, table, scenario, options);

  const ScenarioView view = scenario_view(ds, scenario);
  const auto rows = detail::all_rows(view.trials.size());
  clf.csp = fit_band_models(table, view, rows, scenario, ds.montage.hash());
  clf.svm = train_linear_svm(fbcsp_feature_rows(table, clf.csp, view, rows), view.y, clf.cv.chosen_c);
  return clf;
}

inline BinaryClassifier train_mrcp_binary(const Dataset& ds, const MrcpTable& table, const Scenario& scenario,
                                          const CvOptions& options) {
  BinaryClassifier clf;
  clf.kind = FeatureKind::mrcp;
  clf.scenario = scenario;
  clf.cv = kfold_cv_mrcp(ds, table, scenario, options);
  const ScenarioView view = scenario_view(ds, scenario);
  clf.svm = train_linear_svm(detail::mrcp_rows(table, view, detail::all_rows(view.trials.size())), view.y,
                             clf.cv.chosen_c);
  return clf;
}

struct OvrModel {
  std::vector<Label> classes;
  std::vector<BinaryClassifier> members;  // members[k] separates classes[k] from the rest

  std::vector<double> scores(const Trial& trial, double fs, std::size_t pad_len) const {
    std::vector<double> s;
    for (const auto& m : members) s.push_back(m.decision_value(trial, fs, pad_len));
    return s;
  }
};

inline OvrModel train_ovr(const Dataset& ds, FeatureKind kind, const StatsTable* fbcsp_table,
                          const MrcpTable* mrcp_table, const CvOptions& options) {
  OvrModel m;
  m.classes = ds.present_labels();
  if (m.classes.size() < 2) throw ConfigError("one-vs-rest needs at least two classes");
  for (auto target : m.classes) {
    const Scenario s = Scenario::one_vs_rest(target, m.classes);
    m.members.push_back(kind == FeatureKind::fbcsp ? train_fbcsp_binary(ds, *fbcsp_table, s, options)
                                                   : train_mrcp_binary(ds, *mrcp_table, s, options));
  }
  return m;
}

inline OvrModel train_ovr_fbcsp(const Dataset& ds, const StatsTable& table, const CvOptions& options) {
  return train_ovr(ds, FeatureKind::fbcsp, &table, nullptr, options);
}

inline OvrModel train_ovr_mrcp(const Dataset& ds, const MrcpTable& table, const CvOptions& options) {
  return train_ovr(ds, FeatureKind::mrcp, nullptr, &table, options);
}

// Class with the highest member score; ties go to the lowest class index.
inline Label predict_from_scores(const std::vector<Label>& classes, std::span<const double> scores) {
  return classes.at(argmax_lowest(scores));
}

inline Label predict_ovr(const OvrModel& m, const Trial& trial, double fs, std::size_t pad_len) {
  return predict_from_scores(m.classes, m.scores(trial, fs, pad_len));
}

// ---------------------------------------------------------------------------
// Model bundles
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const BinaryClassifier& c) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : c.bands) {
    bands.push_back({{"name", std::string(band_name(b.name))}, {"low_hz", b.low_hz}, {"high_hz", b.high_hz}});
  }
  nlohmann::json csp = nlohmann::json::array();
  for (const auto& m : c.csp) csp.push_back(to_json(m));
  return {{"kind", std::string(feature_kind_name(c.kind))},
          {"scenario", to_json(c.scenario)},
          {"window", c.kind == FeatureKind::fbcsp ? c.window.tag() : "mrcp_woi"},
          {"bands", bands},
          {"csp", csp},
          {"svm", to_json(c.svm)},
          {"cv", to_json(c.cv)}};
}

inline BinaryClassifier classifier_from_json(const nlohmann::json& j) {
  try {
    BinaryClassifier c;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "fbcsp" && kind != "mrcp") throw DataError("unknown classifier kind '" + kind + "'");
    c.kind = kind == "fbcsp" ? FeatureKind::fbcsp : FeatureKind::mrcp;
    c.scenario = scenario_from_json(j.at("scenario"));
    if (c.kind == FeatureKind::fbcsp) c.window = TrialWindow::from_tag(j.at("window").get<std::string>());
    for (const auto& b : j.at("bands")) {
      c.bands.push_back({band_from_name(b.at("name").get<std::string>()), b.at("low_hz").get<double>(),
                         b.at("high_hz").get<double>()});
    }
    for (const auto& m : j.at("csp")) c.csp.push_back(csp_from_json(m));
    if (c.kind == FeatureKind::fbcsp && c.csp.size() != c.bands.size()) {
      throw DataError("classifier has " + std::to_string(c.csp.size()) + " CSP models for " +
                      std::to_string(c.bands.size()) + " bands");
    }
    c.svm = svm_from_json(j.at("svm"));
    const auto& cv = j.at("cv");
    c.cv.fold_accuracy = cv.at("fold_accuracy").get<std::vector<double>>();
    c.cv.mean_accuracy = cv.at("mean_accuracy").get<double>();
    c.cv.std_accuracy = cv.at("std_accuracy").get<double>();
    c.cv.chosen_c = cv.at("chosen_C").get<double>();
    c.cv.c_grid = cv.at("C_grid").get<std::vector<double>>();
    c.cv.grid_mean_accuracy = cv.at("grid_mean_accuracy").get<std::vector<double>>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed classifier: ") + e.what());
  }
}

// A bundle is either one binary classifier or a one-vs-rest set.
struct ModelBundle {
  bool one_vs_rest = false;
  std::vector<Label> classes;
  std::vector<BinaryClassifier> members;

  static ModelBundle binary(BinaryClassifier c) {
    ModelBundle b;
    for (auto l : c.scenario.class_a) b.classes.push_back(l);
    for (auto l : c.scenario.class_b) b.classes.push_back(l);
    b.members.push_back(std::move(c));
    return b;
  }

  static ModelBundle ovr(OvrModel m) {
    ModelBundle b;
    b.one_vs_rest = true;
    b.classes = std::move(m.classes);
    b.members = std::move(m.members);
    return b;
  }

  OvrModel as_ovr() const {
    if (!one_vs_rest) throw DataError("bundle is not one-vs-rest");
    return {classes, members};
  }
};

inline nlohmann::json to_json(const ModelBundle& b) {
  nlohmann::json classes = nlohmann::json::array(), members = nlohmann::json::array();
  for (auto l : b.classes) classes.push_back(index_of(l));
  for (const auto& m : b.members) members.push_back(to_json(m));
  return {{"version", kBundleVersion},
          {"type", b.one_vs_rest ? "one-vs-rest" : "binary"},
          {"classes", classes},
          {"members", members}};
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("version")) throw DataError("model bundle without version");
    if (j.at("version").get<int>() != kBundleVersion) {
      throw DataError("unknown model bundle version " + j.at("version").dump());
    }
    ModelBundle b;
    const auto type = j.at("type").get<std::string>();
    if (type != "binary" && type != "one-vs-rest") throw DataError("unknown bundle type '" + type + "'");
    b.one_vs_rest = type == "one-vs-rest";
    for (const auto& l : j.at("classes")) b.classes.push_back(label_from_int(l.get<int>()));
    for (const auto& m : j.at("members")) b.members.push_back(classifier_from_json(m));
    if (b.members.empty()) throw DataError("model bundle without members");
    if (b.one_vs_rest && b.members.size() != b.classes.size()) {
      throw DataError("one-vs-rest bundle: member count does not match class count");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model bundle: ") + e.what());
  }
}

}  // namespace graspdec
