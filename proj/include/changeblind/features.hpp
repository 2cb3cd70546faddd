#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "changeblind/image.hpp"

namespace changeblind::features {

struct PixelCoord {
  std::size_t x = 0;
  std::size_t y = 0;

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// The set D of pixels whose RGB values differ between the two scenes.
/// Coordinates are kept in row-major order.
class ChangeMask {
 public:
  ChangeMask() = default;
  ChangeMask(std::size_t width, std::size_t height, std::vector<PixelCoord> coords);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return coords_.size(); }
  bool empty() const { return coords_.empty(); }
  const std::vector<PixelCoord>& coords() const { return coords_; }
  bool contains(std::size_t x, std::size_t y) const;

  /// Chebyshev distance from (x, y) to the nearest masked pixel.
  std::size_t chebyshev_distance(long x, long y) const;

  /// 0/255 bitmap, row-major.
  std::vector<std::uint8_t> bitmap() const;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<PixelCoord> coords_;
  std::vector<std::uint8_t> bits_;
};

/// Exact per-channel comparison. Throws StructuralError on dimension
/// mismatch and ValidationError ("identical pair") when nothing differs.
ChangeMask compute_change_mask(const ImageRGB& original, const ImageRGB& changed);

struct ImagePair {
  std::string pair_id;
  ImageRGB original;
  ImageRGB changed;
  ChangeMask mask;
};

/// Validates the pair and derives its mask.
ImagePair make_image_pair(std::string pair_id, ImageRGB original, ImageRGB changed);

/// Mean LAB2000HL difference over the changed pixels (f_CM).
double change_magnitude(const ImagePair& pair);
double change_magnitude(const ImageLab& original, const ImageLab& changed, const ChangeMask& mask);

struct ChangeMagnitudeSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};
ChangeMagnitudeSummary summarize_change(const ImagePair& pair);

/// Unnormalised 2-D DCT-II of a row-major single-channel grid.
std::vector<double> dct2(std::span<const double> channel, std::size_t width, std::size_t height);

/// Coefficients whose magnitude is at most this fraction of the bound
/// 4 * sum|x| are treated as exact zeros, and sign(0) = +1.
inline constexpr double kSignZeroTolerance = 1e-11;

/// Sign bits (true = negative) of the DCT-II coefficients.
std::vector<bool> dct_sign_bits(std::span<const double> channel, std::size_t width,
                                std::size_t height);
bool negative_sign(double coefficient, double magnitude_bound);

/// Normalised Hamming distance between DCT sign grids of the three
/// LAB2000HL channels (f_SI).
double salience_imbalance(const ImagePair& pair);
double salience_imbalance(const ImageRGB& original, const ImageRGB& changed);
double salience_imbalance(const ImageLab& original, const ImageLab& changed);

/// Squared mean presentation index (f_UE). Indices are 1-based.
double user_experience(std::span<const int> indices);

struct FeatureVector {
  std::string pair_id;
  double f_cm = 0.0;
  double f_si = 0.0;
  std::optional<double> f_ue;
  std::optional<double> se_global;
  std::optional<double> se_local;
  std::optional<double> ed_global;
  std::optional<double> ed_local;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline constexpr const char* kFeatureColumns[] = {"pair_id",   "f_cm",     "f_si",
                                                  "f_ue",      "se_global", "se_local",
                                                  "ed_global", "ed_local"};

/// Flat CSV with the stable header above; missing optionals are empty fields.
void write_feature_csv(std::ostream& out, std::span<const FeatureVector> rows);
std::vector<FeatureVector> read_feature_csv(std::istream& in);

std::string features_to_json(std::span<const FeatureVector> rows);
std::vector<FeatureVector> features_from_json(const std::string& text);

}  // namespace changeblind::features
