#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "changeblind/dataset.hpp"
#include "changeblind/features.hpp"
#include "changeblind/observer_stats.hpp"
#include "changeblind/sequence.hpp"

namespace changeblind::data {

/// Cartoon-scene benchmark with simulated observers. Each pair recolours a
/// single shape; "easy" pairs use a large shape and a strong colour shift,
/// "hard" pairs a small shape and a subtle one. Every changed pixel differs
/// by at least kMinChangeMagnitude.
struct SyntheticOptions {
  std::size_t n_pairs = 10;
  std::size_t n_observers = 12;
  std::size_t width = 128;
  std::size_t height = 96;
  std::uint64_t seed = 1;
  std::string name = "synthetic";
};

struct SyntheticDataset {
  Manifest manifest;
  std::vector<features::ImagePair> pairs;
  std::vector<stats::DetectionRecord> records;
  SequencePlan plan;
  std::map<std::string, double> latent_mode;  // simulated typical detection time
  std::map<std::string, bool> hard;
};

SyntheticDataset make_synthetic(const SyntheticOptions& options);

/// Writes images/, manifest.json, records.jsonl and plan.json under root.
void write_synthetic(const std::filesystem::path& root, const SyntheticDataset& ds);

}  // namespace changeblind::data
