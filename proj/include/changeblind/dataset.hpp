#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "changeblind/features.hpp"
#include "changeblind/observer_stats.hpp"

namespace changeblind::data {

inline constexpr const char* kManifestFile = "manifest.json";
/// Smallest mean change magnitude (LAB2000HL units) a stimulus should have.
inline constexpr double kMinChangeMagnitude = 1.2;

struct PairEntry {
  std::string id;
  std::string original;  // relative to the dataset root
  std::string changed;
  std::string description;
  std::optional<std::size_t> width;
  std::optional<std::size_t> height;
};

struct ObserverEntry {
  std::string id;
  std::optional<double> age;
  std::string site;
};

/// The dataset's JSON manifest: pairs, observers and the record store path.
struct Manifest {
  std::string name;
  std::vector<PairEntry> pairs;
  std::vector<ObserverEntry> observers;
  std::string records = "records.jsonl";
};

/// Canonical serialisation (two-space indent, trailing newline); parsing and
/// re-serialising a canonical manifest reproduces it byte for byte.
std::string manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const std::string& text);

struct Issue {
  std::string subject;  // pair id, or "record:<line>"
  std::string message;
};

struct BenchmarkDataset {
  std::filesystem::path root;
  Manifest manifest;
  std::vector<features::ImagePair> pairs;  // valid pairs, manifest order
  std::vector<stats::DetectionRecord> records;
  std::vector<stats::ObserverProfile> observers;
  std::map<std::string, features::ChangeMagnitudeSummary> change;
  std::vector<Issue> errors;
  std::vector<Issue> warnings;

  const features::ImagePair* find_pair(const std::string& id) const;
  /// Records per pair id (all observers).
  std::map<std::string, std::size_t> record_counts() const;
};

struct LoadOptions {
  bool load_images = true;
};

/// Reads <root>/manifest.json, the referenced images and the record store.
/// Per-pair and per-record problems are collected in `errors` and loading
/// continues; a missing or unparsable manifest throws.
BenchmarkDataset load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

/// Writes the manifest and the records (JSON lines) under root.
void save_dataset_metadata(const std::filesystem::path& root, const Manifest& manifest,
                           std::span<const stats::DetectionRecord> records);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace changeblind::data
