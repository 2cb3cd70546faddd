#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "changeblind/synthetic.hpp"

namespace fixture {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("cbtest_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path synthetic_dir(const std::string& tag, std::size_t pairs,
                                           std::size_t observers, std::uint64_t seed) {
  changeblind::data::SyntheticOptions o;
  o.n_pairs = pairs;
  o.n_observers = observers;
  o.seed = seed;
  const auto dir = temp_dir(tag);
  changeblind::data::write_synthetic(dir, changeblind::data::make_synthetic(o));
  return dir;
}

}  // namespace fixture
