#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "changeblind/error.hpp"

namespace changeblind {

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Lab {
  double l = 0.0;
  double a = 0.0;
  double b = 0.0;

  friend bool operator==(const Lab&, const Lab&) = default;
};

/// Row-major pixel grid. Pixel (x, y) lives at index y * width + x.
template <typename Pixel>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t width, std::size_t height, Pixel fill = Pixel{})
      : width_(width), height_(height), data_(width * height, fill) {
    if (width == 0 || height == 0) {
      throw StructuralError("image dimensions must be at least 1x1");
    }
  }
  Grid(std::size_t width, std::size_t height, std::vector<Pixel> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width == 0 || height == 0) {
      throw StructuralError("image dimensions must be at least 1x1");
    }
    if (data_.size() != width * height) {
      throw StructuralError("pixel buffer size does not match dimensions");
    }
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Pixel& at(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const Pixel& at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }
  Pixel& operator[](std::size_t i) { return data_[i]; }
  const Pixel& operator[](std::size_t i) const { return data_[i]; }

  std::span<Pixel> pixels() { return data_; }
  std::span<const Pixel> pixels() const { return data_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<Pixel> data_;
};

/// Display-referred RGB, every channel in [0, 1].
using ImageRGB = Grid<Rgb>;
/// LAB2000HL (or CIELAB, depending on the producer) triplets.
using ImageLab = Grid<Lab>;
using ImageGray = Grid<double>;

/// Throws InputDomainError naming the first pixel with a channel outside [0, 1].
void validate_rgb(const ImageRGB& img);

/// Builds an ImageRGB from interleaved 8-bit RGB samples (value / 255).
ImageRGB rgb_from_8bit(std::size_t width, std::size_t height,
                       std::span<const std::uint8_t> interleaved);

/// Inverse of rgb_from_8bit with rounding to nearest.
std::vector<std::uint8_t> rgb_to_8bit(const ImageRGB& img);

}  // namespace changeblind
