#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "changeblind/image.hpp"

namespace changeblind::colour {

/// Pure-power decoding exponent of the calibrated displays.
inline constexpr double kDisplayGamma = 2.2;

/// sRGB primaries, D65 white. Rows map linear RGB to XYZ (Y of white = 1).
inline constexpr std::array<std::array<double, 3>, 3> kRgbToXyz = {{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

struct Xyz {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

Xyz display_rgb_to_xyz(const Rgb& rgb);
Lab xyz_to_cielab(const Xyz& xyz);
Lab display_rgb_to_cielab(const Rgb& rgb);

/// Lookup-table transform from CIELAB to LAB2000HL.
///
/// Lightness is a 1-D table over L* in [0, 100]; the chromatic plane is a
/// 2-D table over (a*, b*) in [-128, 128]^2 with unit node spacing, both
/// interpolated (linear / bilinear). Table nodes are generated by integrating
/// the CIEDE2000 line element: lightness through 1/S_L, chroma through
/// 1/S_C, and hue angles are re-spaced so that equal CIEDE2000 hue steps
/// occupy equal angles at every chroma.
class Lab2000hlTable {
 public:
  static constexpr double kLightnessStep = 0.25;
  static constexpr double kChromaLimit = 128.0;
  static constexpr std::size_t kChromaNodes = 257;

  /// Process-wide table, built on first use (thread safe).
  static const Lab2000hlTable& instance();

  /// Converts one CIELAB triplet. Sets *clamped when the input lies outside
  /// the table hull and had to be projected onto it.
  Lab convert(const Lab& cielab, bool* clamped = nullptr) const;

  /// Node values, exposed for tests.
  double lightness_node(std::size_t i) const { return lightness_[i]; }
  std::size_t lightness_node_count() const { return lightness_.size(); }
  Lab chroma_node(std::size_t ia, std::size_t ib) const;

  /// Evaluates the generating mapping directly (no table interpolation).
  static double lightness_exact(double l_star);
  static std::array<double, 2> chroma_plane_exact(double a_star, double b_star);

 private:
  Lab2000hlTable();

  std::vector<double> lightness_;
  std::vector<double> plane_a_;
  std::vector<double> plane_b_;
};

struct ConversionReport {
  /// Pixels whose CIELAB value fell outside the table hull.
  std::size_t clamped_pixels = 0;
};

Lab display_rgb_to_lab2000hl(const Rgb& rgb, bool* clamped = nullptr);

/// display RGB -> XYZ (D65) -> CIELAB -> LAB2000HL, per pixel.
/// Throws InputDomainError naming the first out-of-range pixel.
ImageLab rgb_to_lab2000hl(const ImageRGB& img, ConversionReport* report = nullptr);

/// display RGB -> CIELAB, per pixel.
ImageLab rgb_to_cielab(const ImageRGB& img);

/// Euclidean distance in LAB2000HL. Throws InputDomainError on non-finite input.
double delta_e_00hl(const Lab& p, const Lab& q);

}  // namespace changeblind::colour
