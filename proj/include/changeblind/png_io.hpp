#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "changeblind/image.hpp"

namespace changeblind {

/// Decodes an 8-bit RGB or RGBA PNG. RGBA input must be fully opaque.
/// Throws IoError on read/decode failure and InputDomainError on
/// unsupported formats or translucent pixels.
ImageRGB read_png(const std::filesystem::path& path);
ImageRGB decode_png(const std::vector<std::uint8_t>& bytes);

/// Encodes as 8-bit RGB.
std::vector<std::uint8_t> encode_png(const ImageRGB& img);
void write_png(const std::filesystem::path& path, const ImageRGB& img);

/// Encodes a single-channel 8-bit image (used for solution masks).
std::vector<std::uint8_t> encode_png_gray(std::size_t width, std::size_t height,
                                          const std::vector<std::uint8_t>& values);

}  // namespace changeblind
