#include "changeblind/dataset.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "changeblind/csv.hpp"
#include "changeblind/error.hpp"
#include "changeblind/png_io.hpp"
#include "json.hpp"

namespace changeblind::data {

using nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string manifest_to_json(const Manifest& m) {
  ordered_json j;
  j["name"] = m.name;
  ordered_json pairs = ordered_json::array();
  for (const PairEntry& p : m.pairs) {
    ordered_json e;
    e["id"] = p.id;
    e["original"] = p.original;
    e["changed"] = p.changed;
    if (!p.description.empty()) e["description"] = p.description;
    if (p.width) e["width"] = *p.width;
    if (p.height) e["height"] = *p.height;
    pairs.push_back(std::move(e));
  }
  j["pairs"] = std::move(pairs);
  ordered_json observers = ordered_json::array();
  for (const ObserverEntry& o : m.observers) {
    ordered_json e;
    e["id"] = o.id;
    if (o.age) e["age"] = *o.age;
    if (!o.site.empty()) e["site"] = o.site;
    observers.push_back(std::move(e));
  }
  j["observers"] = std::move(observers);
  j["records"] = m.records;
  return j.dump(2) + "\n";
}

Manifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    Manifest m;
    m.name = j.value("name", std::string());
    if (j.contains("pairs")) {
      for (const auto& e : j.at("pairs")) {
        PairEntry p;
        p.id = e.at("id").get<std::string>();
        p.original = e.at("original").get<std::string>();
        p.changed = e.at("changed").get<std::string>();
        p.description = e.value("description", std::string());
        if (e.contains("width")) p.width = e["width"].get<std::size_t>();
        if (e.contains("height")) p.height = e["height"].get<std::size_t>();
        if (!csv::valid_identifier(p.id)) throw ValidationError("invalid pair id '" + p.id + "'");
        m.pairs.push_back(std::move(p));
      }
    }
    if (j.contains("observers")) {
      for (const auto& e : j.at("observers")) {
        ObserverEntry o;
        o.id = e.at("id").get<std::string>();
        if (e.contains("age") && !e["age"].is_null()) o.age = e["age"].get<double>();
        o.site = e.value("site", std::string());
        if (!csv::valid_identifier(o.id)) {
          throw ValidationError("invalid observer id '" + o.id + "'");
        }
        m.observers.push_back(std::move(o));
      }
    }
    m.records = j.value("records", std::string("records.jsonl"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest schema mismatch: ") + e.what());
  }
}

const features::ImagePair* BenchmarkDataset::find_pair(const std::string& id) const {
  for (const auto& p : pairs) {
    if (p.pair_id == id) return &p;
  }
  return nullptr;
}

std::map<std::string, std::size_t> BenchmarkDataset::record_counts() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.pair_id];
  return counts;
}

BenchmarkDataset load_dataset(const std::filesystem::path& root, const LoadOptions& options) {
  BenchmarkDataset ds;
  ds.root = root;
  ds.manifest = manifest_from_json(read_text_file(root / kManifestFile));

  std::set<std::string> pair_ids;
  std::map<std::string, std::pair<std::size_t, std::size_t>> dims;
  for (const PairEntry& entry : ds.manifest.pairs) {
    if (!pair_ids.insert(entry.id).second) {
      ds.errors.push_back({entry.id, "duplicate pair id"});
      continue;
    }
    if (!options.load_images) continue;
    try {
      features::ImagePair pair = features::make_image_pair(
          entry.id, read_png(root / entry.original), read_png(root / entry.changed));
      if ((entry.width && *entry.width != pair.original.width()) ||
          (entry.height && *entry.height != pair.original.height())) {
        ds.warnings.push_back({entry.id, "manifest size does not match image size"});
      }
      const features::ChangeMagnitudeSummary s = features::summarize_change(pair);
      if (s.min < kMinChangeMagnitude) {
        ds.warnings.push_back({entry.id, "smallest per-pixel change " + csv::format_double(s.min) +
                                             " is below " + csv::format_double(kMinChangeMagnitude) +
                                             " LAB2000HL units"});
      }
      ds.change[entry.id] = s;
      dims[entry.id] = {pair.original.width(), pair.original.height()};
      ds.pairs.push_back(std::move(pair));
    } catch (const Error& e) {
      ds.errors.push_back({entry.id, e.what()});
    }
  }

  std::set<std::string> observer_ids;
  for (const ObserverEntry& o : ds.manifest.observers) observer_ids.insert(o.id);

  const std::filesystem::path records_path = root / ds.manifest.records;
  if (!ds.manifest.records.empty() && std::filesystem::exists(records_path)) {
    std::ifstream in(records_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string subject = "record:" + std::to_string(line_no);
      try {
        stats::DetectionRecord r = stats::record_from_json_line(line);
        if (!pair_ids.contains(r.pair_id)) throw ValidationError("unknown pair id " + r.pair_id);
        if (!observer_ids.contains(r.observer_id)) {
          throw ValidationError("unknown observer id " + r.observer_id);
        }
        const auto d = dims.find(r.pair_id);
        if (d != dims.end()) {
          stats::validate_record(r, d->second.first, d->second.second);
        } else {
          stats::validate_record(r);
        }
        ds.records.push_back(std::move(r));
      } catch (const Error& e) {
        ds.errors.push_back({subject, e.what()});
      }
    }
  }

  std::map<std::string, std::array<std::size_t, 3>> tallies;
  for (const auto& r : ds.records) {
    auto& t = tallies[r.observer_id];
    ++t[0];
    if (r.outcome == stats::Outcome::false_positive) ++t[1];
    if (r.outcome == stats::Outcome::timeout) ++t[2];
  }
  for (const ObserverEntry& o : ds.manifest.observers) {
    stats::ObserverProfile p;
    p.observer_id = o.id;
    p.age = o.age;
    p.site = o.site;
    const auto it = tallies.find(o.id);
    if (it != tallies.end() && it->second[0] > 0) {
      p.n_records = it->second[0];
      p.false_positive_rate = static_cast<double>(it->second[1]) / static_cast<double>(p.n_records);
      p.non_detection_rate = static_cast<double>(it->second[2]) / static_cast<double>(p.n_records);
    }
    ds.observers.push_back(std::move(p));
  }
  return ds;
}

void save_dataset_metadata(const std::filesystem::path& root, const Manifest& manifest,
                           std::span<const stats::DetectionRecord> records) {
  std::filesystem::create_directories(root);
  write_text_file(root / kManifestFile, manifest_to_json(manifest));
  if (manifest.records.empty()) return;
  std::ostringstream out;
  stats::write_records_jsonl(out, records);
  write_text_file(root / manifest.records, out.str());
}

}  // namespace changeblind::data
