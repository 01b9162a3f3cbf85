#pragma once

// On-disk dataset layout:
//
//   <dir>/manifest.json    format_version, sample_rate, channels, trial records
//   <dir>/trial_0000.f32   C x T float32, little-endian, channel-major
//
// A trial record's "file" may instead name a CSV file (header = channel
// names, one row per sample); such trials are read through import_csv_trial.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "graspdec/core.hpp"
#include "graspdec/error.hpp"
#include "graspdec/io.hpp"

namespace graspdec {

inline constexpr int kDatasetFormatVersion = 1;

inline std::string encode_payload(const SampleMatrix& data) {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(data.size()) * 4);
  for (Eigen::Index c = 0; c < data.rows(); ++c) {
    for (Eigen::Index t = 0; t < data.cols(); ++t) io::append_f32_le(bytes, data(c, t));
  }
  return bytes;
}

inline SampleMatrix decode_payload(const std::string& bytes, std::size_t channels,
                                   std::size_t samples) {
  if (bytes.size() != channels * samples * 4) {
    throw DataError("channel-count mismatch: payload has " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(channels) + "x" +
                    std::to_string(samples) + " float32");
  }
  SampleMatrix data(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(samples));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < samples; ++t, p += 4) {
      const float v = io::read_f32_le(p);
      if (!std::isfinite(v)) {
        throw DataError("non-finite sample at channel " + std::to_string(c) + ", sample " +
                        std::to_string(t));
      }
      data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = v;
    }
  }
  return data;
}

// One CSV file per trial: header row of channel names, then one row per sample.
inline Trial import_csv_trial(const std::filesystem::path& path, const ChannelMontage& montage,
                              Label label, std::size_t planning_onset,
                              std::size_t movement_onset, std::string subject_id) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) header.push_back(cell);
  }
  if (header != montage.names) {
    throw DataError(path.string() + ": channel-count mismatch, CSV header does not match montage");
  }

  std::vector<std::vector<float>> columns;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<float> row;
    std::stringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw DataError(path.string() + ": unparsable value '" + cell + "'");
      if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite sample");
      row.push_back(static_cast<float>(v));
    }
    if (row.size() != header.size()) {
      throw DataError(path.string() + ": channel-count mismatch in row " +
                      std::to_string(columns.size() + 1));
    }
    columns.push_back(std::move(row));
  }

  Trial trial;
  trial.data.resize(static_cast<Eigen::Index>(header.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t t = 0; t < columns.size(); ++t) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      trial.data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = columns[t][c];
    }
  }
  trial.label = label;
  trial.planning_onset = planning_onset;
  trial.movement_onset = movement_onset;
  trial.subject_id = std::move(subject_id);
  trial.validate();
  return trial;
}

inline std::string payload_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%04zu.f32", index);
  return buf;
}

inline nlohmann::json manifest_json(const Dataset& ds) {
  nlohmann::json channels = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.montage.size(); ++i) {
    channels.push_back({{"name", ds.montage.names[i]},
                        {"x", ds.montage.positions[i].x},
                        {"y", ds.montage.positions[i].y}});
  }
  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    const auto& t = ds.trials[i];
    trials.push_back({{"file", payload_name(i)},
                      {"label", index_of(t.label)},
                      {"planning_onset", t.planning_onset},
                      {"movement_onset", t.movement_onset},
                      {"n_samples", t.samples()},
                      {"subject_id", t.subject_id}});
  }
  return {{"format_version", kDatasetFormatVersion},
          {"sample_rate", ds.sample_rate},
          {"channels", channels},
          {"trials", trials}};
}

// Returns the files written, relative to `dir`, in write order.
inline std::vector<std::string> save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  for (std::size_t i = 0; i < ds.trials.size(); ++i) {
    io::write_file_atomic(dir / payload_name(i), encode_payload(ds.trials[i].data));
    written.push_back(payload_name(i));
  }
  io::write_json(dir / "manifest.json", manifest_json(ds));
  written.emplace_back("manifest.json");
  return written;
}

namespace detail {

template <typename T>
T manifest_field(const nlohmann::json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw DataError(std::string("malformed manifest: missing '") + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(std::string("malformed manifest: bad type for '") + key + "'");
  }
}

}  // namespace detail

// `path` is the dataset directory or its manifest.json.
inline Dataset load_dataset(const std::filesystem::path& path) {
  const auto dir = std::filesystem::is_directory(path) ? path : path.parent_path();
  const auto manifest_path = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  if (!std::filesystem::exists(manifest_path)) {
    throw DataError("no manifest at " + manifest_path.string());
  }
  const auto doc = io::read_json(manifest_path);

  const int version = detail::manifest_field<int>(doc, "format_version");
  if (version != kDatasetFormatVersion) {
    throw DataError("unknown format version " + std::to_string(version));
  }

  Dataset ds;
  ds.sample_rate = detail::manifest_field<double>(doc, "sample_rate");
  ds.montage = {};
  const auto channels = detail::manifest_field<nlohmann::json>(doc, "channels");
  if (!channels.is_array()) throw DataError("malformed manifest: 'channels' must be an array");
  for (const auto& ch : channels) {
    ds.montage.names.push_back(detail::manifest_field<std::string>(ch, "name"));
    ds.montage.positions.push_back(
        {detail::manifest_field<double>(ch, "x"), detail::manifest_field<double>(ch, "y")});
  }
  ds.montage.validate();

  const auto trials = detail::manifest_field<nlohmann::json>(doc, "trials");
  if (!trials.is_array()) throw DataError("malformed manifest: 'trials' must be an array");
  for (const auto& rec : trials) {
    const auto file = detail::manifest_field<std::string>(rec, "file");
    const auto label = label_from_int(detail::manifest_field<long long>(rec, "label"));
    const auto planning = detail::manifest_field<std::size_t>(rec, "planning_onset");
    const auto movement = detail::manifest_field<std::size_t>(rec, "movement_onset");
    const auto subject = detail::manifest_field<std::string>(rec, "subject_id");

    Trial trial;
    if (std::filesystem::path(file).extension() == ".csv") {
      trial = import_csv_trial(dir / file, ds.montage, label, planning, movement, subject);
    } else {
      const auto samples = detail::manifest_field<std::size_t>(rec, "n_samples");
      trial.data = decode_payload(io::read_file(dir / file), ds.montage.size(), samples);
      trial.label = label;
      trial.planning_onset = planning;
      trial.movement_onset = movement;
      trial.subject_id = subject;
    }
    ds.trials.push_back(std::move(trial));
  }
  ds.validate();
  return ds;
}

}  // namespace graspdec
