#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "graspdec/error.hpp"
#include "graspdec/rng.hpp"

namespace graspdec {

// Stored samples: channel-major float32, the on-disk representation.
using SampleMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Label : int { pen = 0, bottle = 1, empty = 2 };

inline constexpr int kNumLabels = 3;

inline std::string_view label_name(Label label) {
  switch (label) {
    case Label::pen: return "pen";
    case Label::bottle: return "bottle";
    case Label::empty: return "empty";
  }
  return "?";
}

inline Label label_from_int(long long value) {
  if (value < 0 || value >= kNumLabels) {
    throw DataError("invalid label " + std::to_string(value));
  }
  return static_cast<Label>(value);
}

inline Label label_from_name(std::string_view name) {
  for (int i = 0; i < kNumLabels; ++i) {
    if (label_name(static_cast<Label>(i)) == name) return static_cast<Label>(i);
  }
  throw ConfigError("unknown class name '" + std::string(name) + "'");
}

inline int index_of(Label label) { return static_cast<int>(label); }

enum class Phase { planning, movement };

inline std::string_view phase_name(Phase phase) {
  return phase == Phase::planning ? "planning" : "movement";
}

inline Phase phase_from_name(std::string_view name) {
  if (name == "planning") return Phase::planning;
  if (name == "movement") return Phase::movement;
  throw ConfigError("unknown phase '" + std::string(name) + "'");
}

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

struct ChannelMontage {
  std::vector<std::string> names;
  std::vector<Point2> positions;

  std::size_t size() const { return names.size(); }

  bool operator==(const ChannelMontage&) const = default;

  void validate() const {
    if (names.size() != positions.size()) {
      throw DataError("montage: " + std::to_string(names.size()) + " names but " +
                      std::to_string(positions.size()) + " positions");
    }
    if (names.empty()) throw DataError("montage: no channels");
    std::set<std::string> seen;
    for (const auto& name : names) {
      if (!seen.insert(name).second) throw DataError("montage: duplicate channel '" + name + "'");
    }
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const auto& p = positions[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::hypot(p.x, p.y) > 1.05) {
        throw DataError("montage: channel '" + names[i] + "' lies outside the head circle");
      }
    }
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    return std::nullopt;
  }

  std::size_t index_of(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ConfigError("unknown channel '" + std::string(name) + "'");
  }

  // Identifies the channel set a model was fitted on.
  std::string hash() const {
    std::string joined;
    for (const auto& name : names) {
      joined += name;
      joined += ',';
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(joined)));
    return buf;
  }

  // 16-channel 10-20 layout; nose at +y, ear level at radius 1.
  static ChannelMontage standard16() {
    struct Entry {
      const char* name;
      double azimuth_deg;  // clockwise from the nose
      double radius;
    };
    static constexpr std::array<Entry, 16> entries{{
        {"FP1", -18.0, 1.022}, {"FP2", 18.0, 1.022}, {"F3", -39.9, 0.689}, {"Fz", 0.0, 0.511},
        {"F4", 39.9, 0.689},   {"C3", -90.0, 0.511}, {"Cz", 0.0, 0.0},     {"C4", 90.0, 0.511},
        {"P3", -140.1, 0.689}, {"Pz", 180.0, 0.511}, {"P4", 140.1, 0.689}, {"PO7", -144.0, 1.022},
        {"PO8", 144.0, 1.022}, {"Oz", 180.0, 1.022}, {"O1", -162.0, 1.022}, {"O2", 162.0, 1.022},
    }};
    ChannelMontage montage;
    for (const auto& e : entries) {
      const double a = e.azimuth_deg * std::numbers::pi / 180.0;
      montage.names.emplace_back(e.name);
      montage.positions.push_back({e.radius * std::sin(a), e.radius * std::cos(a)});
    }
    return montage;
  }
};

// Half-open sample interval [begin, end).
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  bool operator==(const SampleRange&) const = default;
};

struct Trial {
  SampleMatrix data;  // C x T, microvolts
  Label label = Label::pen;
  std::size_t planning_onset = 0;
  std::size_t movement_onset = 0;
  std::string subject_id;

  std::size_t channels() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t samples() const { return static_cast<std::size_t>(data.cols()); }

  bool operator==(const Trial& other) const {
    return label == other.label && planning_onset == other.planning_onset &&
           movement_onset == other.movement_onset && subject_id == other.subject_id &&
           data.rows() == other.data.rows() && data.cols() == other.data.cols() &&
           data == other.data;
  }

  SampleRange range(Phase phase) const {
    return phase == Phase::planning ? SampleRange{planning_onset, movement_onset}
                                    : SampleRange{movement_onset, samples()};
  }

  void validate() const {
    if (!(planning_onset < movement_onset && movement_onset <= samples())) {
      throw DataError("trial onsets out of order: planning " + std::to_string(planning_onset) +
                      ", movement " + std::to_string(movement_onset) + ", length " +
                      std::to_string(samples()));
    }
    if (!data.allFinite()) throw DataError("non-finite sample in trial");
  }

  Eigen::MatrixXd as_double() const { return data.cast<double>(); }
};

// Which part of a trial a feature is computed on: a task phase, or an explicit
// sample interval (used by the expanding-window analysis).
class TrialWindow {
 public:
  static TrialWindow of(Phase phase) { return TrialWindow(phase); }
  static TrialWindow span(std::size_t begin, std::size_t end) { return TrialWindow({begin, end}); }

  SampleRange resolve(const Trial& trial) const {
    if (phase_) return trial.range(*phase_);
    if (range_.end > trial.samples()) {
      throw DataError("window [" + std::to_string(range_.begin) + ", " +
                      std::to_string(range_.end) + ") exceeds trial length " +
                      std::to_string(trial.samples()));
    }
    return range_;
  }

  static TrialWindow from_tag(std::string_view tag) {
    if (tag == "planning" || tag == "movement") return of(phase_from_name(tag));
    constexpr std::string_view prefix = "samples_";
    if (tag.starts_with(prefix)) {
      const auto rest = tag.substr(prefix.size());
      const auto sep = rest.find('_');
      if (sep != std::string_view::npos) {
        const auto begin = std::stoull(std::string(rest.substr(0, sep)));
        const auto end = std::stoull(std::string(rest.substr(sep + 1)));
        if (begin < end) return span(begin, end);
      }
    }
    throw DataError("unrecognized window tag '" + std::string(tag) + "'");
  }

  std::optional<Phase> phase() const { return phase_; }
  SampleRange explicit_range() const { return range_; }

  std::string tag() const {
    if (phase_) return std::string(phase_name(*phase_));
    return "samples_" + std::to_string(range_.begin) + "_" + std::to_string(range_.end);
  }

 private:
  explicit TrialWindow(Phase phase) : phase_(phase) {}
  explicit TrialWindow(SampleRange range) : range_(range) {}

  std::optional<Phase> phase_;
  SampleRange range_;
};

struct Dataset {
  ChannelMontage montage = ChannelMontage::standard16();
  double sample_rate = 256.0;
  std::vector<Trial> trials;

  bool operator==(const Dataset&) const = default;

  void validate() const {
    montage.validate();
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
      throw DataError("sample rate must be positive");
    }
    for (std::size_t i = 0; i < trials.size(); ++i) {
      if (trials[i].channels() != montage.size()) {
        throw DataError("channel-count mismatch in trial " + std::to_string(i) + ": " +
                        std::to_string(trials[i].channels()) + " rows, montage has " +
                        std::to_string(montage.size()));
      }
      trials[i].validate();
    }
  }

  std::array<std::size_t, kNumLabels> class_counts() const {
    std::array<std::size_t, kNumLabels> counts{};
    for (const auto& t : trials) ++counts[static_cast<std::size_t>(index_of(t.label))];
    return counts;
  }

  std::vector<Label> present_labels() const {
    std::vector<Label> out;
    const auto counts = class_counts();
    for (int i = 0; i < kNumLabels; ++i) {
      if (counts[static_cast<std::size_t>(i)] > 0) out.push_back(static_cast<Label>(i));
    }
    return out;
  }

  Dataset subset(const std::vector<std::size_t>& indices) const {
    Dataset out{montage, sample_rate, {}};
    out.trials.reserve(indices.size());
    for (auto i : indices) out.trials.push_back(trials.at(i));
    return out;
  }
};

inline Eigen::MatrixXd segment(const Trial& trial, SampleRange range) {
  if (range.empty()) throw DataError("empty phase");
  if (range.end > trial.samples()) throw DataError("segment exceeds trial length");
  return trial.data.middleCols(static_cast<Eigen::Index>(range.begin),
                               static_cast<Eigen::Index>(range.size()))
      .cast<double>();
}

inline Eigen::MatrixXd segment_phase(const Trial& trial, Phase phase) {
  return segment(trial, trial.range(phase));
}

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Holds out `test_per_class` trials of every class present. Per class, the
// trial indices (in dataset order) are permuted with Rng::shuffle seeded by
// derive_seed(seed, "split/<class>") and the first `test_per_class` are held
// out. Both halves keep the original trial order.
inline TrainTestSplit split_train_test(const Dataset& ds, std::size_t test_per_class,
                                       std::uint64_t seed) {
  std::vector<bool> is_test(ds.trials.size(), false);
  for (Label label : ds.present_labels()) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.trials.size(); ++i) {
      if (ds.trials[i].label == label) members.push_back(i);
    }
    if (members.size() <= test_per_class) {
      throw DataError("insufficient trials for class " + std::string(label_name(label)) + ": " +
                      std::to_string(members.size()) + " available, " +
                      std::to_string(test_per_class) + " requested for test");
    }
    Rng rng(derive_seed(seed, "split/" + std::string(label_name(label))));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t k = 0; k < test_per_class; ++k) is_test[members[k]] = true;
  }
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    (is_test[i] ? test_idx : train_idx).push_back(i);
  }
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

}  // namespace graspdec
