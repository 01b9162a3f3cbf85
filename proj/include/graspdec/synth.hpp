#pragma once

// Synthetic EEG from a linear forward model with known sources. Every trial is
//   x(t) = sum_s a_s[class] * p_s * src_s(t) * gate_s(t) + noise(t)
// where p_s is a mixing column with |p_s|^2 = C, so a_s is the per-channel RMS
// of the source contribution while it is active.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "graspdec/core.hpp"
#include "graspdec/dsp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/io.hpp"
#include "graspdec/parallel.hpp"
#include "graspdec/rng.hpp"

namespace graspdec {

enum class SourceKind { oscillatory, slow_potential };

struct SourceSpec {
  SourceKind kind = SourceKind::oscillatory;
  BandName band = BandName::theta;     // oscillatory only
  std::optional<Phase> phase;          // nullopt: active over the whole trial
  std::array<double, kNumLabels> amplitude{};  // per class, microvolts
  Eigen::VectorXd pattern;             // length C, any non-zero scale
  double latency_jitter_s = 0.0;       // slow potential only
};

struct SynthConfig {
  ChannelMontage montage = ChannelMontage::standard16();
  double sample_rate = 256.0;
  std::size_t trials_per_class = 75;
  std::vector<Label> classes{Label::pen, Label::bottle, Label::empty};
  double planning_s = 3.0;
  double movement_s = 2.75;
  std::vector<SourceSpec> sources;
  double noise_rms = 1.0;
  double pink_fraction = 0.5;
  int source_filter_order = 8;
  std::string subject_id = "S01";
  std::uint64_t seed = 0;

  std::size_t planning_samples() const { return static_cast<std::size_t>(std::lround(planning_s * sample_rate)); }
  std::size_t movement_samples() const { return static_cast<std::size_t>(std::lround(movement_s * sample_rate)); }
  std::size_t trial_samples() const { return planning_samples() + movement_samples(); }

  void validate() const {
    montage.validate();
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be positive");
    if (trials_per_class < 1) throw ConfigError("trials_per_class must be at least 1");
    if (classes.empty()) throw ConfigError("no classes requested");
    if (!(noise_rms > 0.0)) throw ConfigError("noise_rms must be positive");
    if (!(pink_fraction >= 0.0 && pink_fraction <= 1.0)) throw ConfigError("pink_fraction must lie in [0, 1]");
    if (planning_samples() == 0 || movement_samples() == 0) throw ConfigError("empty task phase");
    if (source_filter_order < 2 || source_filter_order % 2 != 0) {
      throw ConfigError("source_filter_order must be a positive even number");
    }
    for (const auto& s : sources) {
      if (s.pattern.size() != static_cast<Eigen::Index>(montage.size())) {
        throw ConfigError("source pattern length " + std::to_string(s.pattern.size()) + " does not match " +
                          std::to_string(montage.size()) + " channels");
      }
      if (!s.pattern.allFinite() || s.pattern.squaredNorm() == 0.0) throw ConfigError("source pattern is zero");
      for (double a : s.amplitude) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("source amplitudes must be non-negative");
      }
      if (s.kind == SourceKind::oscillatory) {
        const BandSpec b = default_band(s.band);
        if (b.is_lowpass() || b.high_hz >= sample_rate / 2.0) throw ConfigError("invalid band");
      }
      if (s.latency_jitter_s < 0.0) throw ConfigError("latency jitter must be non-negative");
    }
  }
};

// Mixing column with a Gaussian fall-off around one electrode.
inline Eigen::VectorXd focal_pattern(const ChannelMontage& montage, std::string_view focus, double width) {
  if (!(width > 0.0)) throw ConfigError("pattern width must be positive");
  const Point2 c = montage.positions[montage.index_of(focus)];
  Eigen::VectorXd p(static_cast<Eigen::Index>(montage.size()));
  for (std::size_t i = 0; i < montage.size(); ++i) {
    const double dx = montage.positions[i].x - c.x, dy = montage.positions[i].y - c.y;
    p(static_cast<Eigen::Index>(i)) = std::exp(-0.5 * (dx * dx + dy * dy) / (width * width));
  }
  return p;
}

// Scaled so that |p|^2 equals the channel count.
inline Eigen::VectorXd normalized_pattern(const Eigen::VectorXd& p) {
  return p * std::sqrt(static_cast<double>(p.size()) / p.squaredNorm());
}

// Movement-related slow potential: a negative deflection peaking 50 ms before
// onset followed by a positive rebound, scaled to unit peak magnitude.
// tau is seconds relative to movement onset.
inline double mrcp_template(double tau) {
  auto g = [](double x, double mu, double sd) { return std::exp(-0.5 * (x - mu) * (x - mu) / (sd * sd)); };
  return -g(tau, -0.05, 0.25) + 0.6 * g(tau, 0.45, 0.2);
}

struct GroundTruthSource {
  SourceSpec spec;           // pattern stored normalized
  std::vector<std::vector<float>> realization;  // per trial: src(t) * gate(t) at unit active-window RMS, or the template
};

struct GroundTruth {
  std::uint64_t seed = 0;
  double noise_rms = 0.0;
  double pink_fraction = 0.0;
  std::vector<GroundTruthSource> sources;
};

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
};

namespace detail {

// Raised-cosine gate for [begin, end) with `ramp` samples of fade at each end.
inline std::vector<double> phase_gate(std::size_t length, SampleRange active, std::size_t ramp) {
  std::vector<double> g(length, 0.0);
  const std::size_t n = active.size();
  ramp = std::min(ramp, n / 2);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (i < ramp) w = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(ramp));
    const std::size_t from_end = n - 1 - i;
    if (from_end < ramp) {
      w = std::min(w, 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(from_end) + 0.5) /
                                             static_cast<double>(ramp)));
    }
    g[active.begin + i] = w;
  }
  return g;
}

inline void normalize_rms(std::vector<double>& x) {
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double rms = std::sqrt(ss / static_cast<double>(x.size()));
  if (rms > 0.0) {
    for (double& v : x) v /= rms;
  }
}

// Band-limited Gaussian process with unit RMS. Generated with one second of
// margin on either side so the kept stretch is free of filter start-up.
inline std::vector<double> band_limited_noise(Rng& rng, std::size_t length, const IirFilter& filter,
                                              std::size_t margin) {
  std::vector<double> white(length + 2 * margin);
  for (double& v : white) v = rng.gaussian();
  const auto filtered = filtfilt(white, filter, margin);
  std::vector<double> out(filtered.begin() + static_cast<std::ptrdiff_t>(margin),
                          filtered.begin() + static_cast<std::ptrdiff_t>(margin + length));
  normalize_rms(out);
  return out;
}

// 1/f noise from Paul Kellet's three-pole approximation, unit RMS.
inline std::vector<double> pink_noise(Rng& rng, std::size_t length) {
  constexpr std::size_t burn_in = 2048;
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  std::vector<double> out;
  out.reserve(length);
  for (std::size_t i = 0; i < burn_in + length; ++i) {
    const double w = rng.gaussian();
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    if (i >= burn_in) out.push_back(b0 + b1 + b2 + w * 0.1848);
  }
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(length);
  for (double& v : out) v -= mean;
  normalize_rms(out);
  return out;
}

}  // namespace detail

inline SynthResult generate_dataset(const SynthConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  const std::size_t channels = cfg.montage.size();
  const std::size_t length = cfg.trial_samples();
  const std::size_t onset = cfg.planning_samples();
  const auto fs = cfg.sample_rate;
  const auto ramp = static_cast<std::size_t>(std::lround(0.1 * fs));
  const auto margin = static_cast<std::size_t>(std::lround(fs));

  std::vector<IirFilter> filters;
  std::vector<Eigen::VectorXd> patterns;
  std::vector<std::vector<double>> gates;
  std::vector<SampleRange> actives;
  for (const auto& s : cfg.sources) {
    patterns.push_back(normalized_pattern(s.pattern));
    if (s.kind == SourceKind::oscillatory) {
      const BandSpec b = default_band(s.band);
      filters.push_back(design_butterworth_bandpass(b.low_hz, b.high_hz, fs, cfg.source_filter_order));
    } else {
      filters.emplace_back();
    }
    SampleRange active{0, length};
    if (s.phase) active = *s.phase == Phase::planning ? SampleRange{0, onset} : SampleRange{onset, length};
    gates.push_back(detail::phase_gate(length, active, s.phase ? ramp : 0));
    actives.push_back(active);
  }

  std::vector<Label> labels;
  for (auto c : cfg.classes) {
    for (std::size_t i = 0; i < cfg.trials_per_class; ++i) labels.push_back(c);
  }

  SynthResult result;
  result.dataset.montage = cfg.montage;
  result.dataset.sample_rate = fs;
  result.dataset.trials.resize(labels.size());
  result.truth.seed = cfg.seed;
  result.truth.noise_rms = cfg.noise_rms;
  result.truth.pink_fraction = cfg.pink_fraction;
  for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
    GroundTruthSource gt{cfg.sources[s], std::vector<std::vector<float>>(labels.size())};
    gt.spec.pattern = patterns[s];
    result.truth.sources.push_back(std::move(gt));
  }

  parallel_for(labels.size(), jobs, [&](std::size_t i) {
    Rng rng(derive_seed(cfg.seed, "synth/trial/" + std::to_string(i)));
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(length));
    const auto cls = static_cast<std::size_t>(index_of(labels[i]));

    for (std::size_t s = 0; s < cfg.sources.size(); ++s) {
      const auto& spec = cfg.sources[s];
      std::vector<double> wave(length);
      if (spec.kind == SourceKind::oscillatory) {
        const auto src = detail::band_limited_noise(rng, length, filters[s], margin);
        for (std::size_t t = 0; t < length; ++t) wave[t] = src[t] * gates[s][t];
        // unit RMS over the active window, so the amplitude is the realized RMS there
        double ss = 0.0;
        for (std::size_t t = actives[s].begin; t < actives[s].end; ++t) ss += wave[t] * wave[t];
        const double scale = std::sqrt(static_cast<double>(actives[s].size()) / ss);
        for (double& v : wave) v *= scale;
      } else {
        const double jitter = spec.latency_jitter_s > 0.0 ? spec.latency_jitter_s * rng.gaussian() : 0.0;
        for (std::size_t t = 0; t < length; ++t) {
          wave[t] = mrcp_template((static_cast<double>(t) - static_cast<double>(onset)) / fs - jitter);
        }
      }
      auto& stored = result.truth.sources[s].realization[i];
      stored.assign(wave.begin(), wave.end());
      const double a = spec.amplitude[cls];
      if (a == 0.0) continue;
      const Eigen::Map<const Eigen::RowVectorXd> w(wave.data(), static_cast<Eigen::Index>(length));
      x.noalias() += (a * patterns[s]) * w;
    }

    const double white_w = cfg.noise_rms * std::sqrt(1.0 - cfg.pink_fraction);
    const double pink_w = cfg.noise_rms * std::sqrt(cfg.pink_fraction);
    for (std::size_t c = 0; c < channels; ++c) {
      const auto pink = detail::pink_noise(rng, length);
      for (std::size_t t = 0; t < length; ++t) {
        x(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) += white_w * rng.gaussian() + pink_w * pink[t];
      }
    }

    Trial& trial = result.dataset.trials[i];
    trial.data = x.cast<float>();
    trial.label = labels[i];
    trial.planning_onset = 0;
    trial.movement_onset = onset;
    trial.subject_id = cfg.subject_id;
  });
  return result;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SourceSpec& s) {
  nlohmann::json amps = nlohmann::json::object();
  for (int c = 0; c < kNumLabels; ++c) {
    amps[std::string(label_name(static_cast<Label>(c)))] = s.amplitude[static_cast<std::size_t>(c)];
  }
  nlohmann::json j = {{"kind", s.kind == SourceKind::oscillatory ? "oscillatory" : "slow_potential"},
                      {"phase", s.phase ? std::string(phase_name(*s.phase)) : "both"},
                      {"amplitudes", amps},
                      {"pattern", std::vector<double>(s.pattern.data(), s.pattern.data() + s.pattern.size())}};
  if (s.kind == SourceKind::oscillatory) j["band"] = std::string(band_name(s.band));
  if (s.latency_jitter_s > 0.0) j["latency_jitter_s"] = s.latency_jitter_s;
  return j;
}

inline SourceSpec source_from_json(const nlohmann::json& j, const ChannelMontage& montage) {
  SourceSpec s;
  const auto kind = j.value("kind", std::string("oscillatory"));
  if (kind == "oscillatory") {
    s.kind = SourceKind::oscillatory;
    s.band = band_from_name(j.at("band").get<std::string>());
  } else if (kind == "slow_potential") {
    s.kind = SourceKind::slow_potential;
  } else {
    throw ConfigError("unknown source kind '" + kind + "'");
  }
  const auto phase = j.value("phase", std::string("both"));
  if (phase != "both") s.phase = phase_from_name(phase);

  const auto& amps = j.at("amplitudes");
  if (amps.is_array()) {
    if (amps.size() != kNumLabels) throw ConfigError("amplitudes array needs one entry per class");
    for (std::size_t c = 0; c < kNumLabels; ++c) s.amplitude[c] = amps[c].get<double>();
  } else {
    for (const auto& [name, value] : amps.items()) {
      s.amplitude[static_cast<std::size_t>(index_of(label_from_name(name)))] = value.get<double>();
    }
  }

  const auto& p = j.at("pattern");
  if (p.is_array()) {
    const auto v = p.get<std::vector<double>>();
    s.pattern = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } else {
    s.pattern = focal_pattern(montage, p.at("focus").get<std::string>(), p.value("width", 0.5));
  }
  s.latency_jitter_s = j.value("latency_jitter_s", 0.0);
  return s;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  try {
    SynthConfig cfg;
    if (j.contains("channels")) {
      cfg.montage = {};
      for (const auto& ch : j.at("channels")) {
        cfg.montage.names.push_back(ch.at("name").get<std::string>());
        cfg.montage.positions.push_back({ch.at("x").get<double>(), ch.at("y").get<double>()});
      }
    }
    cfg.sample_rate = j.value("sample_rate", cfg.sample_rate);
    const long long per_class = j.value("trials_per_class", static_cast<long long>(cfg.trials_per_class));
    if (per_class < 1) throw ConfigError("trials_per_class must be at least 1");
    cfg.trials_per_class = static_cast<std::size_t>(per_class);
    if (j.contains("classes")) {
      cfg.classes.clear();
      for (const auto& c : j.at("classes")) cfg.classes.push_back(label_from_name(c.get<std::string>()));
    }
    cfg.planning_s = j.value("planning_s", cfg.planning_s);
    cfg.movement_s = j.value("movement_s", cfg.movement_s);
    cfg.noise_rms = j.value("noise_rms", cfg.noise_rms);
    cfg.pink_fraction = j.value("pink_fraction", cfg.pink_fraction);
    cfg.source_filter_order = j.value("source_filter_order", cfg.source_filter_order);
    cfg.subject_id = j.value("subject", cfg.subject_id);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("sources")) {
      for (const auto& s : j.at("sources")) cfg.sources.push_back(source_from_json(s, cfg.montage));
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad synth config: ") + e.what());
  }
}

// Default dataset: 75 trials per class with a planning theta source that
// separates pen from bottle, a movement beta source present in both grasp
// classes, and a slow potential around movement onset in the grasp classes.
inline nlohmann::json default_synth_config_json() {
  return {{"trials_per_class", 75},
          {"noise_rms", 1.0},
          {"pink_fraction", 0.5},
          {"sources",
           {{{"kind", "oscillatory"}, {"band", "theta"}, {"phase", "planning"},
             {"amplitudes", {{"pen", 1.0}, {"bottle", 0.0}, {"empty", 0.3}}},
             {"pattern", {{"focus", "Fz"}, {"width", 0.5}}}},
            {{"kind", "oscillatory"}, {"band", "beta"}, {"phase", "movement"},
             {"amplitudes", {{"pen", 1.0}, {"bottle", 1.0}, {"empty", 0.0}}},
             {"pattern", {{"focus", "C3"}, {"width", 0.5}}}},
            {{"kind", "slow_potential"}, {"phase", "both"},
             {"amplitudes", {{"pen", 1.0}, {"bottle", 1.0}, {"empty", 0.0}}},
             {"pattern", {{"focus", "Cz"}, {"width", 0.6}}},
             {"latency_jitter_s", 0.05}}}}};
}

inline nlohmann::json to_json(const SynthConfig& cfg) {
  nlohmann::json channels = nlohmann::json::array(), classes = nlohmann::json::array(),
                 sources = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.montage.size(); ++i) {
    channels.push_back(
        {{"name", cfg.montage.names[i]}, {"x", cfg.montage.positions[i].x}, {"y", cfg.montage.positions[i].y}});
  }
  for (auto c : cfg.classes) classes.push_back(std::string(label_name(c)));
  for (const auto& s : cfg.sources) sources.push_back(to_json(s));
  return {{"channels", channels},           {"sample_rate", cfg.sample_rate},
          {"trials_per_class", cfg.trials_per_class}, {"classes", classes},
          {"planning_s", cfg.planning_s},   {"movement_s", cfg.movement_s},
          {"noise_rms", cfg.noise_rms},     {"pink_fraction", cfg.pink_fraction},
          {"source_filter_order", cfg.source_filter_order},
          {"subject", cfg.subject_id},      {"seed", cfg.seed},
          {"sources", sources}};
}

inline nlohmann::json to_json(const GroundTruth& gt) {
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& s : gt.sources) {
    nlohmann::json real = nlohmann::json::array();
    for (const auto& r : s.realization) {
      std::string bytes;
      bytes.reserve(r.size() * 4);
      for (float v : r) io::append_f32_le(bytes, v);
      real.push_back(io::base64_encode(
          std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size())));
    }
    sources.push_back({{"spec", to_json(s.spec)}, {"realizations_f32_b64", real}});
  }
  return {{"seed", gt.seed}, {"noise_rms", gt.noise_rms}, {"pink_fraction", gt.pink_fraction}, {"sources", sources}};
}

}  // namespace graspdec
