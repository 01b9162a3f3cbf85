#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "graspdec/core.hpp"
#include "graspdec/rng.hpp"

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("graspdec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline graspdec::Trial random_trial(graspdec::Rng& rng, std::size_t channels, std::size_t samples,
                                    graspdec::Label label, std::size_t planning, std::size_t movement) {
  graspdec::Trial t;
  t.data.resize(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(samples));
  for (Eigen::Index c = 0; c < t.data.rows(); ++c)
    for (Eigen::Index s = 0; s < t.data.cols(); ++s) t.data(c, s) = static_cast<float>(rng.gaussian());
  t.label = label;
  t.planning_onset = planning;
  t.movement_onset = movement;
  t.subject_id = "S01";
  return t;
}

// Gaussian-noise dataset with the standard montage, `per_class` trials of each label.
inline graspdec::Dataset noise_dataset(std::uint64_t seed, std::size_t per_class, std::size_t samples = 1472,
                                       std::size_t movement = 768) {
  graspdec::Rng rng(seed);
  graspdec::Dataset ds;
  for (int l = 0; l < graspdec::kNumLabels; ++l)
    for (std::size_t i = 0; i < per_class; ++i)
      ds.trials.push_back(random_trial(rng, ds.montage.size(), samples, static_cast<graspdec::Label>(l), 0, movement));
  return ds;
}

}  // namespace testutil
