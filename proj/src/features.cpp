#include "changeblind/features.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>

#include "changeblind/colour.hpp"
#include "changeblind/csv.hpp"
#include "json.hpp"

namespace changeblind::features {

ChangeMask::ChangeMask(std::size_t width, std::size_t height, std::vector<PixelCoord> coords)
    : width_(width), height_(height), coords_(std::move(coords)), bits_(width * height, 0) {
  for (const PixelCoord& c : coords_) {
    if (c.x >= width_ || c.y >= height_) {
      throw StructuralError("mask coordinate (" + std::to_string(c.x) + ", " +
                            std::to_string(c.y) + ") outside image bounds");
    }
    bits_[c.y * width_ + c.x] = 1;
  }
  std::sort(coords_.begin(), coords_.end(), [](const PixelCoord& a, const PixelCoord& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  coords_.erase(std::unique(coords_.begin(), coords_.end()), coords_.end());
}

bool ChangeMask::contains(std::size_t x, std::size_t y) const {
  return x < width_ && y < height_ && bits_[y * width_ + x] != 0;
}

std::size_t ChangeMask::chebyshev_distance(long x, long y) const {
  if (coords_.empty()) throw ValidationError("distance to an empty mask");
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (const PixelCoord& c : coords_) {
    const auto dx = static_cast<std::size_t>(std::labs(static_cast<long>(c.x) - x));
    const auto dy = static_cast<std::size_t>(std::labs(static_cast<long>(c.y) - y));
    best = std::min(best, std::max(dx, dy));
    if (best == 0) break;
  }
  return best;
}

std::vector<std::uint8_t> ChangeMask::bitmap() const {
  std::vector<std::uint8_t> out(bits_.size());
  std::transform(bits_.begin(), bits_.end(), out.begin(),
                 [](std::uint8_t b) { return b ? std::uint8_t{255} : std::uint8_t{0}; });
  return out;
}

ChangeMask compute_change_mask(const ImageRGB& original, const ImageRGB& changed) {
  if (!original.same_shape(changed)) {
    throw StructuralError("pair images differ in size: " + std::to_string(original.width()) +
                          "x" + std::to_string(original.height()) + " vs " +
                          std::to_string(changed.width()) + "x" +
                          std::to_string(changed.height()));
  }
  std::vector<PixelCoord> coords;
  for (std::size_t y = 0; y < original.height(); ++y) {
    for (std::size_t x = 0; x < original.width(); ++x) {
      if (original.at(x, y) != changed.at(x, y)) coords.push_back({x, y});
    }
  }
  if (coords.empty()) throw ValidationError("identical pair: no pixel differs");
  return ChangeMask(original.width(), original.height(), std::move(coords));
}

ImagePair make_image_pair(std::string pair_id, ImageRGB original, ImageRGB changed) {
  validate_rgb(original);
  validate_rgb(changed);
  ChangeMask mask = compute_change_mask(original, changed);
  return {std::move(pair_id), std::move(original), std::move(changed), std::move(mask)};
}

double change_magnitude(const ImageLab& original, const ImageLab& changed,
                        const ChangeMask& mask) {
  if (!original.same_shape(changed)) throw StructuralError("LAB images differ in size");
  if (mask.empty()) throw ValidationError("change magnitude over an empty mask");
  if (mask.width() != original.width() || mask.height() != original.height()) {
    throw StructuralError("mask does not match image size");
  }
  double sum = 0.0;
  for (const PixelCoord& c : mask.coords()) {
    sum += colour::delta_e_00hl(original.at(c.x, c.y), changed.at(c.x, c.y));
  }
  return sum / static_cast<double>(mask.size());
}

double change_magnitude(const ImagePair& pair) {
  return change_magnitude(colour::rgb_to_lab2000hl(pair.original),
                          colour::rgb_to_lab2000hl(pair.changed), pair.mask);
}

ChangeMagnitudeSummary summarize_change(const ImagePair& pair) {
  const ImageLab a = colour::rgb_to_lab2000hl(pair.original);
  const ImageLab b = colour::rgb_to_lab2000hl(pair.changed);
  ChangeMagnitudeSummary s{0.0, std::numeric_limits<double>::infinity(), 0.0};
  for (const PixelCoord& c : pair.mask.coords()) {
    const double d = colour::delta_e_00hl(a.at(c.x, c.y), b.at(c.x, c.y));
    s.mean += d;
    s.min = std::min(s.min, d);
    s.max = std::max(s.max, d);
  }
  s.mean /= static_cast<double>(pair.mask.size());
  return s;
}

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> channel_of(const ImageLab& img, int k) {
  std::vector<double> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = k == 0 ? img[i].l : (k == 1 ? img[i].a : img[i].b);
  }
  return out;
}

}  // namespace

std::vector<double> dct2(std::span<const double> channel, std::size_t width,
                         std::size_t height) {
  if (channel.size() != width * height || channel.empty()) {
    throw StructuralError("dct2: buffer size does not match dimensions");
  }
  std::vector<double> in(channel.begin(), channel.end());
  std::vector<double> out(in.size());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_r2r_2d(static_cast<int>(height), static_cast<int>(width), in.data(),
                            out.data(), FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

bool negative_sign(double coefficient, double magnitude_bound) {
  return coefficient < -kSignZeroTolerance * magnitude_bound;
}

std::vector<bool> dct_sign_bits(std::span<const double> channel, std::size_t width,
                                std::size_t height) {
  double bound = 0.0;
  for (double v : channel) bound += std::abs(v);
  bound *= 4.0;
  const std::vector<double> coef = dct2(channel, width, height);
  std::vector<bool> bits(coef.size());
  for (std::size_t i = 0; i < coef.size(); ++i) bits[i] = negative_sign(coef[i], bound);
  return bits;
}

double salience_imbalance(const ImageLab& original, const ImageLab& changed) {
  if (!original.same_shape(changed)) {
    throw StructuralError("salience imbalance: pair images differ in size");
  }
  std::size_t mismatches = 0;
  for (int k = 0; k < 3; ++k) {
    const std::vector<bool> a =
        dct_sign_bits(channel_of(original, k), original.width(), original.height());
    const std::vector<bool> b =
        dct_sign_bits(channel_of(changed, k), changed.width(), changed.height());
    for (std::size_t i = 0; i < a.size(); ++i) mismatches += a[i] != b[i] ? 1 : 0;
  }
  return static_cast<double>(mismatches) / (3.0 * static_cast<double>(original.size()));
}

double salience_imbalance(const ImageRGB& original, const ImageRGB& changed) {
  if (!original.same_shape(changed)) {
    throw StructuralError("salience imbalance: pair images differ in size");
  }
  return salience_imbalance(colour::rgb_to_lab2000hl(original),
                            colour::rgb_to_lab2000hl(changed));
}

double salience_imbalance(const ImagePair& pair) {
  return salience_imbalance(pair.original, pair.changed);
}

double user_experience(std::span<const int> indices) {
  if (indices.empty()) throw ValidationError("user experience needs at least one index");
  double sum = 0.0;
  for (int id : indices) {
    if (id < 1) {
      throw InputDomainError("sequence index must be >= 1, got " + std::to_string(id));
    }
    sum += id;
  }
  const double mean = sum / static_cast<double>(indices.size());
  return mean * mean;
}

// Feature table I/O.

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string();
}

nlohmann::ordered_json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::optional<double> opt_from_json(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void write_feature_csv(std::ostream& out, std::span<const FeatureVector> rows) {
  bool first = true;
  for (const char* col : kFeatureColumns) {
    out << (first ? "" : ",") << col;
    first = false;
  }
  out << '\n';
  for (const FeatureVector& r : rows) {
    out << r.pair_id << ',' << csv::format_double(r.f_cm) << ',' << csv::format_double(r.f_si)
        << ',' << opt_field(r.f_ue) << ',' << opt_field(r.se_global) << ','
        << opt_field(r.se_local) << ',' << opt_field(r.ed_global) << ','
        << opt_field(r.ed_local) << '\n';
  }
}

std::vector<FeatureVector> read_feature_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("feature table is empty (no header)");
  const std::vector<std::string> header = csv::split_line(line);
  const std::size_t n_cols = std::size(kFeatureColumns);
  if (header.size() != n_cols ||
      !std::equal(header.begin(), header.end(), std::begin(kFeatureColumns))) {
    throw ValidationError("feature table header does not match expected columns "
                          "pair_id,f_cm,f_si,f_ue,se_global,se_local,ed_global,ed_local");
  }
  std::vector<FeatureVector> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = csv::split_line(line);
    if (f.size() != n_cols) {
      throw ValidationError("feature table line " + std::to_string(line_no) + " has " +
                            std::to_string(f.size()) + " fields, expected " +
                            std::to_string(n_cols));
    }
    FeatureVector v;
    v.pair_id = f[0];
    v.f_cm = csv::parse_double(f[1], "f_cm");
    v.f_si = csv::parse_double(f[2], "f_si");
    v.f_ue = csv::parse_optional_double(f[3], "f_ue");
    v.se_global = csv::parse_optional_double(f[4], "se_global");
    v.se_local = csv::parse_optional_double(f[5], "se_local");
    v.ed_global = csv::parse_optional_double(f[6], "ed_global");
    v.ed_local = csv::parse_optional_double(f[7], "ed_local");
    rows.push_back(std::move(v));
  }
  return rows;
}

std::string features_to_json(std::span<const FeatureVector> rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const FeatureVector& r : rows) {
    nlohmann::ordered_json j;
    j["pair_id"] = r.pair_id;
    j["f_cm"] = r.f_cm;
    j["f_si"] = r.f_si;
    j["f_ue"] = opt_json(r.f_ue);
    j["se_global"] = opt_json(r.se_global);
    j["se_local"] = opt_json(r.se_local);
    j["ed_global"] = opt_json(r.ed_global);
    j["ed_local"] = opt_json(r.ed_local);
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

std::vector<FeatureVector> features_from_json(const std::string& text) {
  const nlohmann::json arr = nlohmann::json::parse(text);
  if (!arr.is_array()) throw ValidationError("feature JSON must be an array");
  std::vector<FeatureVector> rows;
  for (const auto& j : arr) {
    FeatureVector v;
    v.pair_id = j.at("pair_id").get<std::string>();
    v.f_cm = j.at("f_cm").get<double>();
    v.f_si = j.at("f_si").get<double>();
    v.f_ue = opt_from_json(j, "f_ue");
    v.se_global = opt_from_json(j, "se_global");
    v.se_local = opt_from_json(j, "se_local");
    v.ed_global = opt_from_json(j, "ed_global");
    v.ed_local = opt_from_json(j, "ed_local");
    rows.push_back(std::move(v));
  }
  return rows;
}

}  // namespace changeblind::features
