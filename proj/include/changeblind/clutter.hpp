#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "changeblind/features.hpp"
#include "changeblind/image.hpp"

namespace changeblind::features {

/// Visual-clutter baseline parameters.
struct ClutterConfig {
  /// Haar decomposition depth; three detail sub-bands per level.
  int wavelet_levels = 3;
  /// Equal-width histogram bins per sub-band.
  int entropy_bins = 8;
  /// Channel weights for (L*, a*, b*).
  std::array<double, 3> channel_weights = {0.84, 0.08, 0.08};
  /// Sub-bands whose coefficient range is below this are treated as flat.
  double flat_band_range = 1e-6;
  /// Hysteresis thresholds on the Sobel magnitude of L*/100, divided by 4
  /// so that a unit step yields magnitude 1.
  double edge_low = 0.1;
  double edge_high = 0.2;
  /// Chebyshev radius of the local neighbourhood around the change.
  std::size_t local_radius = 20;
};

/// Binary pixel selection over an image.
class PixelRegion {
 public:
  PixelRegion(std::size_t width, std::size_t height, bool value = false);

  static PixelRegion full(std::size_t width, std::size_t height) {
    return PixelRegion(width, height, true);
  }
  /// Mask pixels plus everything within Chebyshev distance `radius`.
  static PixelRegion dilate(const ChangeMask& mask, std::size_t radius);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  bool contains(std::size_t x, std::size_t y) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool v) { bits_[y * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> bits_;
};

/// Entropy (bits) of quantised Haar detail coefficients, averaged over
/// sub-bands and combined across CIELAB channels with the configured
/// weights. With a region, only coefficients whose support touches the
/// region contribute. Throws ValidationError on an empty region.
double subband_entropy(const ImageRGB& img, const PixelRegion* region = nullptr,
                       const ClutterConfig& config = {});

/// Edge map: Sobel gradient magnitude with hysteresis thresholding
/// (8-connected), replicate borders.
std::vector<std::uint8_t> edge_map(const ImageRGB& img, const ClutterConfig& config = {});

/// Fraction of region pixels marked as edges.
double edge_density(const ImageRGB& img, const PixelRegion* region = nullptr,
                    const ClutterConfig& config = {});

}  // namespace changeblind::features
