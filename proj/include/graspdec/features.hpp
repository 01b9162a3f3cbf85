#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "graspdec/core.hpp"
#include "graspdec/csp.hpp"
#include "graspdec/dsp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/io.hpp"

namespace graspdec {

// ---------------------------------------------------------------------------
// FBCSP
// ---------------------------------------------------------------------------

struct FbcspFeatureSet {
  std::map<BandName, Eigen::VectorXd> per_band;  // iteration order delta -> gamma
  Eigen::VectorXd broadband;
};

// Second-order statistics of every trial in one band and window. The trial is
// filtered over its full length and the window is cut afterwards.
struct BandTrialStats {
  BandName band = BandName::theta;
  std::vector<Eigen::MatrixXd> covariance;  // trace-normalized E E^T, CSP input
  std::vector<Eigen::MatrixXd> scatter;     // centered (E - mean)(E - mean)^T / T'
};

namespace detail {

inline void accumulate_stats(const Eigen::MatrixXd& block, BandTrialStats& out) {
  if (block.cols() == 0) throw DataError("empty phase");
  const Eigen::MatrixXd raw = block * block.transpose();
  const double tr = raw.trace();
  if (!(tr > 0.0)) throw NumericalError("zero-energy trial");
  const Eigen::VectorXd mean = block.rowwise().mean();
  out.covariance.push_back(raw / tr);
  out.scatter.push_back(raw / static_cast<double>(block.cols()) - mean * mean.transpose());
}

}  // namespace detail

// Statistics for several windows at once; the band filter runs once per trial.
inline std::vector<BandTrialStats> compute_band_stats(std::span<const Trial> trials, const BandSpec& band,
                                                      std::span<const TrialWindow> windows, double fs,
                                                      std::size_t pad_len) {
  const IirFilter filter = design_filter(band, fs);
  std::vector<BandTrialStats> out(windows.size());
  for (auto& s : out) {
    s.band = band.name;
    s.covariance.reserve(trials.size());
    s.scatter.reserve(trials.size());
  }
  for (const auto& trial : trials) {
    const Eigen::MatrixXd filtered = filter_trial(trial.as_double(), filter, pad_len);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      const SampleRange r = windows[w].resolve(trial);
      if (r.empty() || r.end > trial.samples()) throw DataError("empty phase");
      detail::accumulate_stats(
          filtered.middleCols(static_cast<Eigen::Index>(r.begin), static_cast<Eigen::Index>(r.size())),
          out[w]);
    }
  }
  return out;
}

inline BandTrialStats compute_band_stats(std::span<const Trial> trials, const BandSpec& band,
                                         const TrialWindow& window, double fs, std::size_t pad_len) {
  return std::move(compute_band_stats(trials, band, std::span<const TrialWindow>(&window, 1), fs, pad_len)
                       .front());
}

// Filter, segment, project, log-variance for each band; broadband is the
// concatenation in canonical band order.
inline FbcspFeatureSet extract_fbcsp(const Trial& trial, const TrialWindow& window,
                                     const std::map<BandName, CspModel>& models,
                                     std::span<const BandSpec> bank, double fs, std::size_t pad_len) {
  if (bank.size() != models.size()) throw DataError("filter bank does not match the CSP model set");
  std::map<BandName, const BandSpec*> by_name;
  for (const auto& b : bank) {
    if (!models.contains(b.name)) {
      throw DataError("no CSP model for band " + std::string(band_name(b.name)));
    }
    by_name[b.name] = &b;
  }
  if (by_name.size() != bank.size()) throw DataError("filter bank lists a band twice");

  const SampleRange range = window.resolve(trial);
  if (range.empty()) throw DataError("empty phase");
  const Eigen::MatrixXd data = trial.as_double();

  FbcspFeatureSet out;
  Eigen::Index total = 0;
  for (const auto& [name, model] : models) {
    const Eigen::MatrixXd filtered = filter_trial(data, design_filter(*by_name.at(name), fs), pad_len);
    const Eigen::MatrixXd block =
        filtered.middleCols(static_cast<Eigen::Index>(range.begin), static_cast<Eigen::Index>(range.size()));
    out.per_band[name] = log_variance_features(project(model, block));
    total += out.per_band[name].size();
  }
  out.broadband.resize(total);
  Eigen::Index offset = 0;
  for (const auto& [name, v] : out.per_band) {
    out.broadband.segment(offset, v.size()) = v;
    offset += v.size();
  }
  return out;
}

inline std::string fbcsp_feature_label(BandName band, std::size_t component) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_csp%02zu", std::string(band_name(band)).c_str(), component + 1);
  return buf;
}

// ---------------------------------------------------------------------------
// MRCP
// ---------------------------------------------------------------------------

inline constexpr int kMrcpWindows = 7;
inline constexpr double kMrcpPreOnsetS = 0.6;
inline constexpr double kMrcpPostOnsetS = 1.0;
inline constexpr double kMrcpWindowS = 0.2;

// Absolute sample indices. bounds[k] = start + round(k * 0.2 * fs) with
// start = movement_onset - round(0.6 * fs); window k is [bounds[k], bounds[k+1]).
// `woi` is the nominal -600..+1000 ms interval, which must lie in the trial.
struct MrcpWindows {
  std::array<std::size_t, kMrcpWindows + 1> bounds{};
  SampleRange woi;
};

inline MrcpWindows mrcp_windows(const Trial& trial, double fs) {
  const auto pre = static_cast<std::size_t>(std::lround(kMrcpPreOnsetS * fs));
  const auto post = static_cast<std::size_t>(std::lround(kMrcpPostOnsetS * fs));
  if (trial.movement_onset < pre || trial.movement_onset + post > trial.samples()) {
    throw DataError("WOI out of trial bounds");
  }
  MrcpWindows w;
  w.woi = {trial.movement_onset - pre, trial.movement_onset + post};
  for (int k = 0; k <= kMrcpWindows; ++k) {
    w.bounds[static_cast<std::size_t>(k)] =
        w.woi.begin + static_cast<std::size_t>(std::lround(k * kMrcpWindowS * fs));
  }
  return w;
}

struct MrcpFeatureMatrix {
  Eigen::MatrixXd values;  // C x 7
  MrcpWindows windows;

  // Channel-major: channel 0 windows 1..7, then channel 1, ...
  Eigen::VectorXd flattened() const {
    Eigen::VectorXd out(values.size());
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < values.rows(); ++c)
      for (Eigen::Index w = 0; w < values.cols(); ++w) out(k++) = values(c, w);
    return out;
  }
};

inline Eigen::MatrixXd mrcp_window_means(const Eigen::MatrixXd& lowpassed, const MrcpWindows& w) {
  Eigen::MatrixXd out(lowpassed.rows(), kMrcpWindows);
  for (int k = 0; k < kMrcpWindows; ++k) {
    const auto b = static_cast<Eigen::Index>(w.bounds[static_cast<std::size_t>(k)]);
    const auto e = static_cast<Eigen::Index>(w.bounds[static_cast<std::size_t>(k) + 1]);
    out.col(k) = lowpassed.middleCols(b, e - b).rowwise().mean();
  }
  return out;
}

// Global z-score over all entries. A matrix whose spread is below 1e-6 of its
// largest magnitude is treated as constant and maps to zeros.
inline Eigen::MatrixXd zscore_matrix(const Eigen::MatrixXd& m) {
  const double mean = m.mean();
  const double sd = std::sqrt((m.array() - mean).square().mean());
  const double scale = m.cwiseAbs().maxCoeff();
  if (!(sd > 1e-6 * scale)) return Eigen::MatrixXd::Zero(m.rows(), m.cols());
  return ((m.array() - mean) / sd).matrix();
}

inline MrcpFeatureMatrix extract_mrcp(const Trial& trial, double fs, std::size_t pad_len) {
  const MrcpWindows w = mrcp_windows(trial, fs);
  const Eigen::MatrixXd lowpassed =
      filter_trial(trial.as_double(), design_filter(default_band(BandName::mrcp_lowpass), fs), pad_len);
  return {zscore_matrix(mrcp_window_means(lowpassed, w)), w};
}

inline std::string mrcp_feature_label(const ChannelMontage& montage, std::size_t channel, int window) {
  return montage.names.at(channel) + "_w" + std::to_string(window + 1);
}

// Per-sample mean of the 6 Hz lowpassed channel, scaled to max |value| = 1.
inline Eigen::VectorXd grand_average_mrcp(std::span<const Trial> trials, std::size_t channel, double fs,
                                          std::size_t pad_len) {
  if (trials.empty()) throw DataError("grand average of no trials");
  const std::size_t length = trials.front().samples();
  const IirFilter lowpass = design_filter(default_band(BandName::mrcp_lowpass), fs);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(length));
  std::vector<double> row(length);
  for (const auto& t : trials) {
    if (t.samples() != length) throw DataError("inconsistent trial lengths in grand average");
    if (channel >= t.channels()) throw DataError("channel index out of range");
    for (std::size_t i = 0; i < length; ++i) {
      row[i] = t.data(static_cast<Eigen::Index>(channel), static_cast<Eigen::Index>(i));
    }
    const auto y = filtfilt(row, lowpass, pad_len);
    for (std::size_t i = 0; i < length; ++i) sum(static_cast<Eigen::Index>(i)) += y[i];
  }
  Eigen::VectorXd avg = sum / static_cast<double>(trials.size());
  const double peak = avg.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) return Eigen::VectorXd::Zero(avg.size());
  return avg / peak;
}

// ---------------------------------------------------------------------------
// CSV export: rows = trials, columns = features.
// ---------------------------------------------------------------------------

inline std::string feature_table_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& rows,
                                     std::span<const Label> labels) {
  std::string out = "label";
  for (const auto& h : header) out += "," + h;
  out += "\n";
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out += std::to_string(index_of(labels[static_cast<std::size_t>(r)]));
    for (Eigen::Index c = 0; c < rows.cols(); ++c) out += "," + io::format_double(rows(r, c));
    out += "\n";
  }
  return out;
}

}  // namespace graspdec
