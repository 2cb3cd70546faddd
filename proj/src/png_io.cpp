#include "changeblind/png_io.hpp"

#include <png.h>

#include <fstream>
#include <iterator>
#include <memory>

namespace changeblind {
namespace {

struct ImageGuard {
  png_image* image;
  ~ImageGuard() { png_image_free(image); }
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageRGB decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  ImageGuard guard{&image};
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  if ((image.format & PNG_FORMAT_FLAG_COLOR) == 0) {
    throw InputDomainError("PNG must be RGB or RGBA (greyscale given)");
  }
  if ((image.format & PNG_FORMAT_FLAG_LINEAR) != 0) {
    throw InputDomainError("PNG must have 8 bits per channel");
  }
  image.format = PNG_FORMAT_RGBA;
  std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, rgba.data(), 0, nullptr)) {
    throw IoError(std::string("PNG decode failed: ") + image.message);
  }
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  std::vector<std::uint8_t> rgb(w * h * 3);
  for (std::size_t i = 0; i < w * h; ++i) {
    if (rgba[4 * i + 3] != 255) {
      throw InputDomainError("PNG has non-opaque pixel at (" + std::to_string(i % w) + ", " +
                             std::to_string(i / w) + ")");
    }
    rgb[3 * i] = rgba[4 * i];
    rgb[3 * i + 1] = rgba[4 * i + 1];
    rgb[3 * i + 2] = rgba[4 * i + 2];
  }
  return rgb_from_8bit(w, h, rgb);
}

ImageRGB read_png(const std::filesystem::path& path) {
  try {
    return decode_png(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  } catch (const InputDomainError& e) {
    throw InputDomainError(path.string() + ": " + e.what());
  }
}

namespace {

std::vector<std::uint8_t> encode(std::size_t width, std::size_t height, png_uint_32 format,
                                 const std::uint8_t* pixels) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  ImageGuard guard{&image};
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageRGB& img) {
  const std::vector<std::uint8_t> rgb = rgb_to_8bit(img);
  return encode(img.width(), img.height(), PNG_FORMAT_RGB, rgb.data());
}

std::vector<std::uint8_t> encode_png_gray(std::size_t width, std::size_t height,
                                          const std::vector<std::uint8_t>& values) {
  if (values.size() != width * height) throw StructuralError("mask buffer size mismatch");
  return encode(width, height, PNG_FORMAT_GRAY, values.data());
}

void write_png(const std::filesystem::path& path, const ImageRGB& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace changeblind
