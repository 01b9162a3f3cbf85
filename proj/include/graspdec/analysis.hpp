#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graspdec/classify.hpp"
#include "graspdec/core.hpp"
#include "graspdec/csp.hpp"
#include "graspdec/dsp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/io.hpp"
#include "graspdec/ml.hpp"
#include "graspdec/parallel.hpp"
#include "graspdec/stats.hpp"
#include "graspdec/svg.hpp"

namespace graspdec {

// ---------------------------------------------------------------------------
// Expanding-window classification
// ---------------------------------------------------------------------------

inline constexpr double kMinWindowS = 0.25;

struct TemporalCurve {
  std::vector<double> time_s;                      // window end, seconds from trial start
  std::vector<double> mean_accuracy;
  std::vector<double> std_accuracy;
  std::vector<std::vector<double>> fold_accuracy;  // [point][fold]
  std::string band;                                // band name or "broadband"
  std::string scenario;
};

// step, 2 step, ... up to the trial length, plus the full trial when the
// length is not a whole number of steps.
inline std::vector<std::size_t> expanding_endpoints(std::size_t trial_samples, double fs, double step_s) {
  if (!(step_s > 0.0)) throw ConfigError("step must be positive");
  if (step_s < kMinWindowS) {
    throw ConfigError("window shorter than 0.25 s (step " + io::format_double(step_s) + " s)");
  }
  std::vector<std::size_t> ends;
  for (int k = 1;; ++k) {
    const auto e = static_cast<std::size_t>(std::lround(k * step_s * fs));
    if (e > trial_samples) break;
    ends.push_back(e);
  }
  if (ends.empty() || ends.back() != trial_samples) {
    if (static_cast<double>(trial_samples) < kMinWindowS * fs) throw ConfigError("window shorter than 0.25 s");
    ends.push_back(trial_samples);
  }
  return ends;
}

// For each endpoint t the features come from [0, t) and the whole CV pipeline
// is rerun. All trials must share one length.
inline TemporalCurve temporal_evolution(const Dataset& ds, std::vector<BandSpec> bands, const Scenario& scenario,
                                        double step_s, const CvOptions& options, std::size_t pad_len,
                                        std::size_t jobs = 1) {
  if (ds.trials.empty()) throw DataError("empty dataset");
  const std::size_t length = ds.trials.front().samples();
  for (const auto& t : ds.trials) {
    if (t.samples() != length) throw DataError("temporal evolution needs equal-length trials");
  }
  const auto ends = expanding_endpoints(length, ds.sample_rate, step_s);
  std::vector<TrialWindow> windows;
  for (auto e : ends) windows.push_back(TrialWindow::span(0, e));

  sort_canonical(bands);
  std::vector<std::vector<BandTrialStats>> per_band(bands.size());
  parallel_for(bands.size(), jobs, [&](std::size_t b) {
    per_band[b] = compute_band_stats(ds.trials, bands[b], windows, ds.sample_rate, pad_len);
  });

  TemporalCurve curve;
  curve.band = bands.size() == 1 ? std::string(band_name(bands.front().name)) : "broadband";
  curve.scenario = scenario.name();
  std::vector<CvReport> reports(ends.size());
  parallel_for(ends.size(), jobs, [&](std::size_t w) {
    StatsTable table{bands, windows[w], {}};
    for (auto& pb : per_band) table.per_band.push_back(pb[w]);
    reports[w] = kfold_cv_fbcsp(ds, table, scenario, options);
  });
  for (std::size_t w = 0; w < ends.size(); ++w) {
    curve.time_s.push_back(static_cast<double>(ends[w]) / ds.sample_rate);
    curve.mean_accuracy.push_back(reports[w].mean_accuracy);
    curve.std_accuracy.push_back(reports[w].std_accuracy);
    curve.fold_accuracy.push_back(reports[w].fold_accuracy);
  }
  return curve;
}

struct PhaseContrast {
  double pre_mean = 0.0;   // mean accuracy of endpoints at or before onset
  double post_mean = 0.0;  // mean accuracy of endpoints after onset
  TTestResult test;        // paired over folds, post minus pre
};

// Per fold, averages the curve points before and after movement onset and
// compares the two with a paired t-test across folds.
inline PhaseContrast phase_contrast(const TemporalCurve& curve, double onset_s) {
  std::vector<std::size_t> pre, post;
  for (std::size_t i = 0; i < curve.time_s.size(); ++i) {
    (curve.time_s[i] <= onset_s + 1e-9 ? pre : post).push_back(i);
  }
  if (pre.empty() || post.empty()) throw DataError("curve does not straddle the onset");
  const std::size_t folds = curve.fold_accuracy.front().size();
  std::vector<double> a(folds, 0.0), b(folds, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    for (auto i : post) a[f] += curve.fold_accuracy[i][f] / static_cast<double>(post.size());
    for (auto i : pre) b[f] += curve.fold_accuracy[i][f] / static_cast<double>(pre.size());
  }
  return {mean_of(b), mean_of(a), paired_t_test(a, b)};
}

inline std::string temporal_curve_csv(const TemporalCurve& c) {
  std::string out = "t,mean_acc,std_acc\n";
  for (std::size_t i = 0; i < c.time_s.size(); ++i) {
    out += io::format_double(c.time_s[i]) + "," + io::format_double(c.mean_accuracy[i]) + "," +
           io::format_double(c.std_accuracy[i]) + "\n";
  }
  return out;
}

inline std::string temporal_curve_svg(const TemporalCurve& c, double onset_s, double chance) {
  return svg::line_chart(c.band + " " + c.scenario, "window end (s)", c.time_s, {{"accuracy", c.mean_accuracy}},
                         {onset_s}, {chance});
}

// ---------------------------------------------------------------------------
// Feature importance
// ---------------------------------------------------------------------------

struct ImportanceProfile {
  std::vector<BandSpec> bands;
  std::size_t per_band = 0;
  Eigen::VectorXd values;     // mean |w|, band-major
  Eigen::VectorXd band_mean;  // one per band
};

inline ImportanceProfile feature_importance(std::span<const LinearSvmModel> models, std::vector<BandSpec> bands) {
  if (models.empty()) throw DataError("no models for feature importance");
  if (bands.empty()) throw ConfigError("filter bank is empty");
  sort_canonical(bands);
  const Eigen::Index n = models.front().w.size();
  if (n == 0 || n % static_cast<Eigen::Index>(bands.size()) != 0) {
    throw DataError("coefficient vector of length " + std::to_string(n) + " does not split into " +
                    std::to_string(bands.size()) + " bands");
  }
  ImportanceProfile p;
  p.bands = bands;
  p.per_band = static_cast<std::size_t>(n) / bands.size();
  p.values = Eigen::VectorXd::Zero(n);
  for (const auto& m : models) {
    if (m.w.size() != n) throw DataError("models differ in feature count");
    p.values += m.w.cwiseAbs();
  }
  p.values /= static_cast<double>(models.size());
  p.band_mean.resize(static_cast<Eigen::Index>(bands.size()));
  const auto k = static_cast<Eigen::Index>(p.per_band);
  for (Eigen::Index b = 0; b < p.band_mean.size(); ++b) p.band_mean(b) = p.values.segment(b * k, k).mean();
  return p;
}

inline std::string importance_csv(const ImportanceProfile& p) {
  std::string out = "band,csp_index,mean_abs_coef\n";
  for (std::size_t b = 0; b < p.bands.size(); ++b) {
    for (std::size_t i = 0; i < p.per_band; ++i) {
      out += std::string(band_name(p.bands[b].name)) + "," + std::to_string(i + 1) + "," +
             io::format_double(p.values(static_cast<Eigen::Index>(b * p.per_band + i))) + "\n";
    }
  }
  return out;
}

inline std::string importance_svg(const ImportanceProfile& p) {
  constexpr double W = 640, H = 320, L = 50, R = 20, T = 40, B = 50;
  svg::Document doc(W, H);
  doc.rect(0, 0, W, H, "#ffffff");
  const auto n = static_cast<std::size_t>(p.values.size());
  const double top = std::max(p.values.maxCoeff(), 1e-300);
  const double bw = (W - L - R) / static_cast<double>(n);
  auto py = [&](double v) { return H - B - v / top * (H - T - B); };
  for (std::size_t i = 0; i < n; ++i) {
    const double v = p.values(static_cast<Eigen::Index>(i));
    doc.rect(L + bw * static_cast<double>(i), py(v), bw * 0.8, H - B - py(v),
             svg::palette()[(i / p.per_band) % svg::palette().size()]);
  }
  for (std::size_t b = 0; b < p.bands.size(); ++b) {
    const double x0 = L + bw * static_cast<double>(b * p.per_band);
    const double x1 = x0 + bw * static_cast<double>(p.per_band);
    doc.line(x0, py(p.band_mean(static_cast<Eigen::Index>(b))), x1, py(p.band_mean(static_cast<Eigen::Index>(b))),
             "#000000", 1.0, "stroke-dasharray=\"4,3\"");
    doc.text((x0 + x1) / 2, H - B + 16, band_name(p.bands[b].name), 11, "middle");
  }
  doc.line(L, H - B, W - R, H - B, "#000000");
  doc.text(W / 2, 22, "mean |SVM coefficient|", 14, "middle");
  return doc.str();
}

// ---------------------------------------------------------------------------
// Topographic maps
// ---------------------------------------------------------------------------

inline constexpr int kTopomapGrid = 64;

// Inverse-distance-weighted (power 2) interpolation on an n x n grid covering
// [-1, 1]^2, row 0 at the front of the head. Cells outside the unit circle are
// NaN; a cell centre that coincides with an electrode takes its value.
inline Eigen::MatrixXd topomap_grid(const Eigen::VectorXd& pattern, const ChannelMontage& montage,
                                    int n = kTopomapGrid) {
  if (pattern.size() != static_cast<Eigen::Index>(montage.size())) {
    throw DataError("pattern length " + std::to_string(pattern.size()) + " does not match " +
                    std::to_string(montage.size()) + " channels");
  }
  Eigen::MatrixXd grid(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double x = -1.0 + (c + 0.5) * 2.0 / n;
      const double y = 1.0 - (r + 0.5) * 2.0 / n;
      if (x * x + y * y > 1.0) {
        grid(r, c) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      double num = 0.0, den = 0.0;
      bool exact = false;
      for (std::size_t i = 0; i < montage.size(); ++i) {
        const double dx = x - montage.positions[i].x, dy = y - montage.positions[i].y;
        const double d2 = dx * dx + dy * dy;
        if (d2 < 1e-24) {
          grid(r, c) = pattern(static_cast<Eigen::Index>(i));
          exact = true;
          break;
        }
        num += pattern(static_cast<Eigen::Index>(i)) / d2;
        den += 1.0 / d2;
      }
      if (!exact) grid(r, c) = num / den;
    }
  }
  return grid;
}

inline std::string topomap_svg(const Eigen::VectorXd& pattern, const ChannelMontage& montage,
                               std::string_view title = "") {
  const Eigen::MatrixXd grid = topomap_grid(pattern, montage);
  const double scale = pattern.size() ? pattern.cwiseAbs().maxCoeff() : 0.0;
  auto norm = [&](double v) { return scale > 0.0 ? v / scale : 0.0; };
  constexpr double S = 400, M = 40;
  const double radius = (S - 2 * M) / 2, cx = S / 2, cy = S / 2 + 10;
  const double cell = 2 * radius / kTopomapGrid;
  svg::Document doc(S, S + 20);
  doc.rect(0, 0, S, S + 20, "#ffffff");
  for (int r = 0; r < kTopomapGrid; ++r) {
    for (int c = 0; c < kTopomapGrid; ++c) {
      if (std::isnan(grid(r, c))) continue;
      doc.rect(cx - radius + c * cell, cy - radius + r * cell, cell + 0.05, cell + 0.05,
               svg::hex(svg::diverging(norm(grid(r, c)))));
    }
  }
  doc.circle(cx, cy, radius, "none", "#000000", 2.0);
  doc.path("M " + svg::num(cx - 12) + " " + svg::num(cy - radius + 1) + " L " + svg::num(cx) + " " +
               svg::num(cy - radius - 14) + " L " + svg::num(cx + 12) + " " + svg::num(cy - radius + 1),
           "none", "#000000", 2.0);
  for (std::size_t i = 0; i < montage.size(); ++i) {
    const double x = cx + montage.positions[i].x * radius, y = cy - montage.positions[i].y * radius;
    doc.circle(x, y, 4, svg::hex(svg::diverging(norm(pattern(static_cast<Eigen::Index>(i))))), "#000000");
    doc.text(x, y - 6, montage.names[i], 9, "middle");
  }
  if (!title.empty()) doc.text(S / 2, 18, title, 14, "middle");
  return doc.str();
}

inline std::string topomap_csv(const Eigen::VectorXd& pattern, const ChannelMontage& montage) {
  if (pattern.size() != static_cast<Eigen::Index>(montage.size())) {
    throw DataError("pattern length does not match the montage");
  }
  std::string out = "channel,value\n";
  for (std::size_t i = 0; i < montage.size(); ++i) {
    out += montage.names[i] + "," + io::format_double(pattern(static_cast<Eigen::Index>(i))) + "\n";
  }
  return out;
}

inline std::pair<std::vector<std::string>, Eigen::VectorXd> read_topomap_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "channel,value") throw DataError("topomap CSV: bad header");
  std::vector<std::string> names;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("topomap CSV: malformed row");
    names.push_back(line.substr(0, comma));
    values.push_back(io::parse_double(line.substr(comma + 1)));
  }
  return {names, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

// Writes <stem>.svg and <stem>.csv; returns both paths.
inline std::vector<std::filesystem::path> export_topomap(const Eigen::VectorXd& pattern, const ChannelMontage& montage,
                                                         const std::filesystem::path& stem,
                                                         std::string_view title = "") {
  const auto svg_path = std::filesystem::path(stem.string() + ".svg");
  const auto csv_path = std::filesystem::path(stem.string() + ".csv");
  const std::string csv = topomap_csv(pattern, montage);
  io::write_file_atomic(svg_path, topomap_svg(pattern, montage, title));
  io::write_file_atomic(csv_path, csv);
  return {svg_path, csv_path};
}

// ---------------------------------------------------------------------------
// CSP-space trajectories
// ---------------------------------------------------------------------------

// Columns of `filters` (CSP filters) chosen by `components`, applied to a band-filtered block;
// shifted to start at the origin and scaled so the farthest point has norm 1.
inline Eigen::MatrixXd trajectory_from_block(const Eigen::MatrixXd& filters, const Eigen::MatrixXd& block,
                                             std::span<const std::size_t> components) {
  if (block.cols() == 0) throw DataError("empty phase");
  Eigen::MatrixXd path(static_cast<Eigen::Index>(components.size()), block.cols());
  for (std::size_t k = 0; k < components.size(); ++k) {
    if (static_cast<Eigen::Index>(components[k]) >= filters.cols()) throw ConfigError("CSP component out of range");
    path.row(static_cast<Eigen::Index>(k)) = filters.col(static_cast<Eigen::Index>(components[k])).transpose() * block;
  }
  const Eigen::VectorXd origin = path.col(0);
  path.colwise() -= origin;
  const double reach = path.colwise().norm().maxCoeff();
  const double magnitude = (path.colwise() + origin).cwiseAbs().maxCoeff();
  if (!(reach > 1e-12 * magnitude) || reach == 0.0) return Eigen::MatrixXd::Zero(path.rows(), path.cols());
  return path / reach;
}

struct Trajectory {
  Label label = Label::pen;
  Eigen::MatrixXd path;  // components x samples
};

// Per class: grand-average the class's trials, band-filter the average with the
// model's band, cut the window, project onto that class's one-vs-rest CSP.
inline std::vector<Trajectory> csp_trajectory(const Dataset& ds, const OvrModel& model, BandName band,
                                              const TrialWindow& window, std::span<const std::size_t> components,
                                              std::size_t pad_len) {
  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < model.classes.size(); ++k) {
    const auto& member = model.members[k];
    const CspModel* csp = nullptr;
    const BandSpec* spec = nullptr;
    for (std::size_t b = 0; b < member.csp.size(); ++b) {
      if (member.csp[b].band == band) csp = &member.csp[b], spec = &member.bands[b];
    }
    if (csp == nullptr) throw ConfigError("model has no CSP filters for band " + std::string(band_name(band)));

    Eigen::MatrixXd sum;
    std::size_t count = 0;
    SampleRange range;
    for (const auto& t : ds.trials) {
      if (t.label != model.classes[k]) continue;
      const SampleRange r = window.resolve(t);
      if (count == 0) {
        sum = Eigen::MatrixXd::Zero(t.data.rows(), t.data.cols());
        range = r;
      } else if (t.data.cols() != sum.cols() || !(r == range)) {
        throw DataError("grand average needs aligned trials");
      }
      sum += t.data.cast<double>();
      ++count;
    }
    if (count == 0) throw DataError("no trials of class " + std::string(label_name(model.classes[k])));
    const Eigen::MatrixXd filtered = filter_trial(sum / static_cast<double>(count), design_filter(*spec, ds.sample_rate), pad_len);
    const Eigen::MatrixXd block =
        filtered.middleCols(static_cast<Eigen::Index>(range.begin), static_cast<Eigen::Index>(range.size()));
    out.push_back({model.classes[k], trajectory_from_block(csp->filters, block, components)});
  }
  return out;
}

inline std::string trajectory_csv(const std::vector<Trajectory>& paths, double fs) {
  std::string out = "class,sample,t";
  const Eigen::Index dims = paths.empty() ? 0 : paths.front().path.rows();
  for (Eigen::Index d = 0; d < dims; ++d) out += ",c" + std::to_string(d + 1);
  out += "\n";
  for (const auto& p : paths) {
    for (Eigen::Index s = 0; s < p.path.cols(); ++s) {
      out += std::string(label_name(p.label)) + "," + std::to_string(s) + "," +
             io::format_double(static_cast<double>(s) / fs);
      for (Eigen::Index d = 0; d < dims; ++d) out += "," + io::format_double(p.path(d, s));
      out += "\n";
    }
  }
  return out;
}

// Three 2-D projections (c1-c2, c1-c3, c2-c3) side by side.
inline std::string trajectory_svg(const std::vector<Trajectory>& paths) {
  constexpr double P = 260, M = 30;
  const Eigen::Index dims = paths.empty() ? 0 : paths.front().path.rows();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> planes;
  for (Eigen::Index a = 0; a < dims; ++a)
    for (Eigen::Index b = a + 1; b < dims; ++b) planes.emplace_back(a, b);
  if (planes.empty()) planes.emplace_back(0, 0);
  svg::Document doc(P * static_cast<double>(planes.size()), P + 40);
  doc.rect(0, 0, P * static_cast<double>(planes.size()), P + 40, "#ffffff");
  for (std::size_t pi = 0; pi < planes.size(); ++pi) {
    const double ox = P * static_cast<double>(pi) + P / 2, oy = P / 2 + 30, r = P / 2 - M;
    doc.line(ox - r, oy, ox + r, oy, "#bbbbbb");
    doc.line(ox, oy - r, ox, oy + r, "#bbbbbb");
    const auto [a, b] = planes[pi];
    doc.text(ox, 22, "c" + std::to_string(a + 1) + " vs c" + std::to_string(b + 1), 12, "middle");
    for (std::size_t k = 0; k < paths.size(); ++k) {
      if (dims < 2) break;
      std::vector<std::pair<double, double>> pts;
      for (Eigen::Index s = 0; s < paths[k].path.cols(); ++s) {
        pts.emplace_back(ox + r * paths[k].path(a, s), oy - r * paths[k].path(b, s));
      }
      doc.polyline(pts, svg::palette()[k % svg::palette().size()], 1.2);
      if (pi == 0) doc.text(8, P + 30 - 14.0 * static_cast<double>(paths.size() - 1 - k), label_name(paths[k].label), 11);
    }
  }
  return doc.str();
}

// ---------------------------------------------------------------------------
// MRCP waveforms
// ---------------------------------------------------------------------------

inline std::string mrcp_waveform_svg(std::string_view channel, double fs, std::size_t onset,
                                     const std::vector<std::pair<Label, Eigen::VectorXd>>& waves) {
  std::vector<double> t;
  std::vector<svg::Series> series;
  if (!waves.empty()) {
    for (Eigen::Index i = 0; i < waves.front().second.size(); ++i) {
      t.push_back((static_cast<double>(i) - static_cast<double>(onset)) / fs);
    }
  }
  for (const auto& [label, w] : waves) series.push_back({std::string(label_name(label)), {w.data(), w.data() + w.size()}});
  return svg::line_chart("MRCP " + std::string(channel), "time from movement onset (s)", t, series, {0.0}, {0.0});
}

}  // namespace graspdec
