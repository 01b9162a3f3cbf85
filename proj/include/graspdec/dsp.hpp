#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "graspdec/error.hpp"

namespace graspdec {

enum class BandName { delta, theta, alpha, beta, gamma, broad_preproc, mrcp_lowpass };

inline std::string_view band_name(BandName band) {
  switch (band) {
    case BandName::delta: return "delta";
    case BandName::theta: return "theta";
    case BandName::alpha: return "alpha";
    case BandName::beta: return "beta";
    case BandName::gamma: return "gamma";
    case BandName::broad_preproc: return "broad_preproc";
    case BandName::mrcp_lowpass: return "mrcp_lowpass";
  }
  return "?";
}

inline BandName band_from_name(std::string_view name) {
  for (auto b : {BandName::delta, BandName::theta, BandName::alpha, BandName::beta, BandName::gamma,
                 BandName::broad_preproc, BandName::mrcp_lowpass}) {
    if (band_name(b) == name) return b;
  }
  throw ConfigError("unknown band '" + std::string(name) + "'");
}

struct BandSpec {
  BandName name = BandName::theta;
  double low_hz = 0.0;  // unused for the lowpass band
  double high_hz = 0.0;

  bool is_lowpass() const { return name == BandName::mrcp_lowpass; }
  bool operator==(const BandSpec&) const = default;
};

inline BandSpec default_band(BandName name) {
  switch (name) {
    case BandName::delta: return {name, 0.5, 4.0};
    case BandName::theta: return {name, 4.0, 8.0};
    case BandName::alpha: return {name, 8.0, 13.0};
    case BandName::beta: return {name, 13.0, 30.0};
    case BandName::gamma: return {name, 30.0, 40.0};
    case BandName::broad_preproc: return {name, 0.5, 40.0};
    case BandName::mrcp_lowpass: return {name, 0.0, 6.0};
  }
  return {};
}

inline constexpr std::array<BandName, 5> kFilterBankBands{BandName::delta, BandName::theta,
                                                          BandName::alpha, BandName::beta,
                                                          BandName::gamma};

inline std::vector<BandSpec> default_filter_bank() {
  std::vector<BandSpec> bank;
  for (auto b : kFilterBankBands) bank.push_back(default_band(b));
  return bank;
}

// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> z_inv) const {
    const auto z_inv2 = z_inv * z_inv;
    return (b0 + b1 * z_inv + b2 * z_inv2) / (1.0 + a1 * z_inv + a2 * z_inv2);
  }

  double max_pole_radius() const {
    // roots of z^2 + a1 z + a2
    const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2));
    return std::max(std::abs((-a1 + disc) / 2.0), std::abs((-a1 - disc) / 2.0));
  }
};

struct IirFilter {
  std::vector<Biquad> sections;
  int order = 0;
  double low_hz = 0.0;  // 0 for lowpass designs
  double high_hz = 0.0;
  double fs = 0.0;

  std::complex<double> response(double freq_hz) const {
    const auto z_inv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= s.response(z_inv);
    return h;
  }

  double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }

  bool stable() const {
    return std::all_of(sections.begin(), sections.end(),
                       [](const Biquad& s) { return s.max_pole_radius() < 1.0; });
  }
};

namespace detail {

inline std::complex<double> bilinear(std::complex<double> s, double fs) {
  return (2.0 * fs + s) / (2.0 * fs - s);
}

inline double prewarp(double freq_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * freq_hz / fs);
}

// Normalized Butterworth poles (cutoff 1 rad/s), left half plane.
inline std::vector<std::complex<double>> butterworth_prototype(int order) {
  std::vector<std::complex<double>> poles;
  for (int k = 0; k < order; ++k) {
    const double angle = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.push_back(std::polar(1.0, angle));
  }
  return poles;
}

// Pairs z-plane poles into denominators: conjugate pairs first (upper member
// kept), then remaining real poles two at a time, or one for a trailing pole.
inline std::vector<std::array<double, 2>> pole_sections(std::vector<std::complex<double>> poles) {
  constexpr double kImagTol = 1e-12;
  std::vector<std::array<double, 2>> out;
  std::vector<double> reals;
  std::sort(poles.begin(), poles.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  for (const auto& p : poles) {
    if (p.imag() > kImagTol) {
      out.push_back({-2.0 * p.real(), std::norm(p)});
    } else if (std::abs(p.imag()) <= kImagTol) {
      reals.push_back(p.real());
    }
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    out.push_back({-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
  }
  if (reals.size() % 2 == 1) out.push_back({-reals.back(), 0.0});
  return out;
}

inline void check_edge(double freq_hz, double fs, const char* what) {
  if (!(fs > 0.0) || !(freq_hz > 0.0) || !(freq_hz < fs / 2.0)) {
    throw ConfigError(std::string("invalid band: ") + what + " " + std::to_string(freq_hz) +
                      " Hz must lie in (0, " + std::to_string(fs / 2.0) + ")");
  }
}

}  // namespace detail

// Bilinear transform with prewarped edges, so |H| = 1/sqrt(2) exactly at both
// edges. `order` is the total filter order (even); the lowpass prototype has
// order/2 poles and the cascade has order/2 biquads.
inline IirFilter design_butterworth_bandpass(double low_hz, double high_hz, double fs, int order = 4) {
  if (order <= 0) throw ConfigError("filter order must be positive");
  if (order % 2 != 0) throw ConfigError("bandpass order must be even");
  if (!(low_hz < high_hz)) throw ConfigError("invalid band: low edge must be below high edge");
  detail::check_edge(low_hz, fs, "low edge");
  detail::check_edge(high_hz, fs, "high edge");

  const double w1 = detail::prewarp(low_hz, fs);
  const double w2 = detail::prewarp(high_hz, fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  std::vector<std::complex<double>> z_poles;
  for (const auto& p : detail::butterworth_prototype(order / 2)) {
    const auto pb = p * bw;
    const auto root = std::sqrt(pb * pb - 4.0 * w0sq);
    z_poles.push_back(detail::bilinear((pb + root) / 2.0, fs));
    z_poles.push_back(detail::bilinear((pb - root) / 2.0, fs));
  }

  IirFilter f;
  f.order = order;
  f.low_hz = low_hz;
  f.high_hz = high_hz;
  f.fs = fs;
  const double center_rad = 2.0 * std::atan(std::sqrt(w0sq) / (2.0 * fs));
  const auto z_inv = std::polar(1.0, -center_rad);
  for (const auto& [a1, a2] : detail::pole_sections(z_poles)) {
    Biquad s{1.0, 0.0, -1.0, a1, a2};  // zeros at z = +1 and z = -1
    const double gain = 1.0 / std::abs(s.response(z_inv));
    s.b0 *= gain;
    s.b2 *= gain;
    f.sections.push_back(s);
  }
  return f;
}

inline IirFilter design_butterworth_lowpass(double cut_hz, double fs, int order = 4) {
  if (order <= 0) throw ConfigError("filter order must be positive");
  detail::check_edge(cut_hz, fs, "cutoff");
  const double wc = detail::prewarp(cut_hz, fs);

  std::vector<std::complex<double>> z_poles;
  for (const auto& p : detail::butterworth_prototype(order)) {
    z_poles.push_back(detail::bilinear(p * wc, fs));
  }

  IirFilter f;
  f.order = order;
  f.high_hz = cut_hz;
  f.fs = fs;
  for (const auto& [a1, a2] : detail::pole_sections(z_poles)) {
    // Zeros at z = -1; unity gain at DC per section.
    Biquad s = a2 == 0.0 ? Biquad{1.0, 1.0, 0.0, a1, 0.0} : Biquad{1.0, 2.0, 1.0, a1, a2};
    const double gain = (1.0 + s.a1 + s.a2) / (s.b0 + s.b1 + s.b2);
    s.b0 *= gain;
    s.b1 *= gain;
    s.b2 *= gain;
    f.sections.push_back(s);
  }
  return f;
}

inline IirFilter design_filter(const BandSpec& band, double fs, int order = 4) {
  return band.is_lowpass() ? design_butterworth_lowpass(band.high_hz, fs, order)
                           : design_butterworth_bandpass(band.low_hz, band.high_hz, fs, order);
}

// One second of zero padding on each side.
inline std::size_t default_pad_len(double fs) { return static_cast<std::size_t>(std::lround(fs)); }

// Causal cascade, transposed direct form II, zero initial state.
inline void sosfilt_inplace(const IirFilter& f, std::span<double> x) {
  for (const auto& s : f.sections) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

// Zero-phase forward-backward filtering. The input is embedded in `pad_len`
// zeros on each side, filtered forward, reversed, filtered again, reversed
// and trimmed back to its original extent.
inline std::vector<double> filtfilt(std::span<const double> signal, const IirFilter& f,
                                    std::size_t pad_len) {
  std::vector<double> buf(signal.size() + 2 * pad_len, 0.0);
  std::copy(signal.begin(), signal.end(), buf.begin() + static_cast<std::ptrdiff_t>(pad_len));
  sosfilt_inplace(f, buf);
  std::reverse(buf.begin(), buf.end());
  sosfilt_inplace(f, buf);
  std::reverse(buf.begin(), buf.end());
  return {buf.begin() + static_cast<std::ptrdiff_t>(pad_len),
          buf.begin() + static_cast<std::ptrdiff_t>(pad_len + signal.size())};
}

inline Eigen::MatrixXd filter_trial(const Eigen::MatrixXd& data, const IirFilter& f,
                                    std::size_t pad_len) {
  Eigen::MatrixXd out(data.rows(), data.cols());
  std::vector<double> row(static_cast<std::size_t>(data.cols()));
  for (Eigen::Index c = 0; c < data.rows(); ++c) {
    for (Eigen::Index t = 0; t < data.cols(); ++t) row[static_cast<std::size_t>(t)] = data(c, t);
    const auto y = filtfilt(row, f, pad_len);
    for (Eigen::Index t = 0; t < data.cols(); ++t) out(c, t) = y[static_cast<std::size_t>(t)];
  }
  return out;
}

inline std::vector<Eigen::MatrixXd> decompose_filter_bank(const Eigen::MatrixXd& data,
                                                          std::span<const BandSpec> bank, double fs,
                                                          std::size_t pad_len) {
  if (bank.empty()) throw ConfigError("filter bank is empty");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(bank.size());
  for (const auto& band : bank) out.push_back(filter_trial(data, design_filter(band, fs), pad_len));
  return out;
}

}  // namespace graspdec
