#include "changeblind/clutter.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "changeblind/colour.hpp"

namespace changeblind::features {

PixelRegion::PixelRegion(std::size_t width, std::size_t height, bool value)
    : width_(width), height_(height), bits_(width * height, value ? 1 : 0) {
  if (width == 0 || height == 0) throw StructuralError("region dimensions must be at least 1x1");
}

std::size_t PixelRegion::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

// Sliding-window "any" along one axis via prefix counts.
std::vector<std::uint8_t> dilate_1d(const std::vector<std::uint8_t>& in, std::size_t width,
                                    std::size_t height, std::size_t radius, bool along_x) {
  std::vector<std::uint8_t> out(in.size(), 0);
  const std::size_t lines = along_x ? height : width;
  const std::size_t len = along_x ? width : height;
  std::vector<std::size_t> prefix(len + 1);
  for (std::size_t line = 0; line < lines; ++line) {
    auto idx = [&](std::size_t k) { return along_x ? line * width + k : k * width + line; };
    prefix[0] = 0;
    for (std::size_t k = 0; k < len; ++k) prefix[k + 1] = prefix[k] + in[idx(k)];
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t lo = k >= radius ? k - radius : 0;
      const std::size_t hi = std::min(len, k + radius + 1);
      out[idx(k)] = prefix[hi] - prefix[lo] > 0 ? 1 : 0;
    }
  }
  return out;
}

double entropy_bits(const std::vector<double>& values, int bins, double flat_range) {
  if (values.empty()) return 0.0;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (range <= flat_range) return 0.0;
  std::vector<std::size_t> hist(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>((v - lo) / range * bins);
    hist[std::min(b, hist.size() - 1)]++;
  }
  double h = 0.0;
  const double n = static_cast<double>(values.size());
  for (std::size_t c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

struct Plane {
  std::size_t w = 0;
  std::size_t h = 0;
  std::vector<double> v;
  double at(std::size_t x, std::size_t y) const { return v[y * w + x]; }
};

void check_region(const ImageRGB& img, const PixelRegion* region) {
  if (!region) return;
  if (region->width() != img.width() || region->height() != img.height()) {
    throw StructuralError("region does not match image size");
  }
  if (region->count() == 0) throw ValidationError("clutter measure over an empty region");
}

}  // namespace

PixelRegion PixelRegion::dilate(const ChangeMask& mask, std::size_t radius) {
  if (mask.empty()) throw ValidationError("cannot dilate an empty mask");
  std::vector<std::uint8_t> bits(mask.width() * mask.height(), 0);
  for (const PixelCoord& c : mask.coords()) bits[c.y * mask.width() + c.x] = 1;
  bits = dilate_1d(bits, mask.width(), mask.height(), radius, true);
  bits = dilate_1d(bits, mask.width(), mask.height(), radius, false);
  PixelRegion region(mask.width(), mask.height());
  region.bits_ = std::move(bits);
  return region;
}

double subband_entropy(const ImageRGB& img, const PixelRegion* region,
                       const ClutterConfig& config) {
  check_region(img, region);
  if (config.wavelet_levels < 1 || config.entropy_bins < 2) {
    throw ValidationError("sub-band entropy needs >= 1 level and >= 2 bins");
  }
  const ImageLab lab = colour::rgb_to_cielab(img);
  const std::size_t block = std::size_t{1} << config.wavelet_levels;
  const std::size_t pw = (img.width() + block - 1) / block * block;
  const std::size_t ph = (img.height() + block - 1) / block * block;

  // Coverage pyramid: level-0 is the region on the padded grid.
  std::vector<std::vector<std::uint8_t>> coverage(1, std::vector<std::uint8_t>(pw * ph, 0));
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      coverage[0][y * pw + x] = (!region || region->contains(x, y)) ? 1 : 0;
    }
  }
  for (int l = 1; l <= config.wavelet_levels; ++l) {
    const std::size_t w = pw >> l;
    const std::size_t h = ph >> l;
    const std::vector<std::uint8_t>& prev = coverage.back();
    std::vector<std::uint8_t> cur(w * h, 0);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t pwl = w * 2;
        cur[y * w + x] = prev[2 * y * pwl + 2 * x] | prev[2 * y * pwl + 2 * x + 1] |
                         prev[(2 * y + 1) * pwl + 2 * x] | prev[(2 * y + 1) * pwl + 2 * x + 1];
      }
    }
    coverage.push_back(std::move(cur));
  }

  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    Plane approx{pw, ph, std::vector<double>(pw * ph)};
    for (std::size_t y = 0; y < ph; ++y) {
      const std::size_t sy = std::min(y, img.height() - 1);
      for (std::size_t x = 0; x < pw; ++x) {
        const Lab& p = lab.at(std::min(x, img.width() - 1), sy);
        approx.v[y * pw + x] = k == 0 ? p.l : (k == 1 ? p.a : p.b);
      }
    }
    double band_sum = 0.0;
    int band_count = 0;
    for (int l = 1; l <= config.wavelet_levels; ++l) {
      const std::size_t w = approx.w / 2;
      const std::size_t h = approx.h / 2;
      Plane next{w, h, std::vector<double>(w * h)};
      std::vector<double> bands[3];
      const std::vector<std::uint8_t>& cov = coverage[static_cast<std::size_t>(l)];
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const double a = approx.at(2 * x, 2 * y);
          const double b = approx.at(2 * x + 1, 2 * y);
          const double c = approx.at(2 * x, 2 * y + 1);
          const double d = approx.at(2 * x + 1, 2 * y + 1);
          next.v[y * w + x] = (a + b + c + d) / 2.0;
          if (!cov[y * w + x]) continue;
          bands[0].push_back((a - b + c - d) / 2.0);
          bands[1].push_back((a + b - c - d) / 2.0);
          bands[2].push_back((a - b - c + d) / 2.0);
        }
      }
      for (const auto& band : bands) {
        if (band.empty()) continue;
        band_sum += entropy_bits(band, config.entropy_bins, config.flat_band_range);
        ++band_count;
      }
      approx = std::move(next);
    }
    const double channel_entropy = band_count ? band_sum / band_count : 0.0;
    total += config.channel_weights[static_cast<std::size_t>(k)] * channel_entropy;
  }
  return total;
}

std::vector<std::uint8_t> edge_map(const ImageRGB& img, const ClutterConfig& config) {
  const ImageLab lab = colour::rgb_to_cielab(img);
  const std::size_t w = img.width();
  const std::size_t h = img.height();
  auto gray = [&](long x, long y) {
    x = std::clamp(x, 0L, static_cast<long>(w) - 1);
    y = std::clamp(y, 0L, static_cast<long>(h) - 1);
    return lab.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)).l / 100.0;
  };
  std::vector<double> mag(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const long xi = static_cast<long>(x);
      const long yi = static_cast<long>(y);
      const double gx = (gray(xi + 1, yi - 1) + 2.0 * gray(xi + 1, yi) + gray(xi + 1, yi + 1)) -
                        (gray(xi - 1, yi - 1) + 2.0 * gray(xi - 1, yi) + gray(xi - 1, yi + 1));
      const double gy = (gray(xi - 1, yi + 1) + 2.0 * gray(xi, yi + 1) + gray(xi + 1, yi + 1)) -
                        (gray(xi - 1, yi - 1) + 2.0 * gray(xi, yi - 1) + gray(xi + 1, yi - 1));
      mag[y * w + x] = std::hypot(gx, gy) / 4.0;
    }
  }
  std::vector<std::uint8_t> edges(w * h, 0);
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    if (mag[i] >= config.edge_high) {
      edges[i] = 1;
      frontier.push_back(i);
    }
  }
  while (!frontier.empty()) {
    const std::size_t i = frontier.front();
    frontier.pop_front();
    const long x = static_cast<long>(i % w);
    const long y = static_cast<long>(i / w);
    for (long dy = -1; dy <= 1; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        const long nx = x + dx;
        const long ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) continue;
        const auto j = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
        if (!edges[j] && mag[j] >= config.edge_low) {
          edges[j] = 1;
          frontier.push_back(j);
        }
      }
    }
  }
  return edges;
}

double edge_density(const ImageRGB& img, const PixelRegion* region, const ClutterConfig& config) {
  check_region(img, region);
  const std::vector<std::uint8_t> edges = edge_map(img, config);
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      if (region && !region->contains(x, y)) continue;
      ++total;
      hits += edges[y * img.width() + x];
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace changeblind::features
