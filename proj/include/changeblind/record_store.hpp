#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "changeblind/observer_stats.hpp"

namespace changeblind::data {

/// Append-only JSON-lines store of detection records.
///
/// Each append takes an exclusive flock on the file, picks up lines written
/// by other writers since the last append, and writes the new line with a
/// single write() followed by fdatasync(). A trailing partial line (left by a
/// crash mid-append) is truncated away when the store is opened.
class RecordStore {
 public:
  struct Options {
    std::optional<std::set<std::string>> known_pairs;
    std::optional<std::set<std::string>> known_observers;
  };

  explicit RecordStore(std::filesystem::path path, Options options = {});

  const std::filesystem::path& path() const { return path_; }

  /// Validates and appends. ValidationError for schema problems or unknown
  /// ids, ConflictError when (observer_id, pair_id) is already stored.
  void append(const stats::DetectionRecord& record,
              std::optional<std::size_t> width = std::nullopt,
              std::optional<std::size_t> height = std::nullopt);

  bool contains(const std::string& observer_id, const std::string& pair_id) const;
  std::size_t size() const;

  /// Every complete record currently in the file.
  std::vector<stats::DetectionRecord> read_all() const;

  /// Bytes dropped by the open-time repair (0 when the file was clean).
  std::size_t repaired_bytes() const { return repaired_bytes_; }

 private:
  void ingest(const std::string& text);

  std::filesystem::path path_;
  Options options_;
  mutable std::mutex mutex_;
  std::set<std::pair<std::string, std::string>> keys_;
  std::size_t offset_ = 0;
  std::size_t repaired_bytes_ = 0;
};

}  // namespace changeblind::data
