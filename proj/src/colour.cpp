#include "changeblind/colour.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace changeblind {

void validate_rgb(const ImageRGB& img) {
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < img.width(); ++x) {
      const Rgb& p = img.at(x, y);
      for (double v : {p.r, p.g, p.b}) {
        if (!(v >= 0.0 && v <= 1.0)) {
          std::ostringstream msg;
          msg << "pixel (" << x << ", " << y << ") has channel value " << v
              << " outside [0, 1]";
          throw InputDomainError(msg.str());
        }
      }
    }
  }
}

ImageRGB rgb_from_8bit(std::size_t width, std::size_t height,
                       std::span<const std::uint8_t> interleaved) {
  if (interleaved.size() != width * height * 3) {
    throw StructuralError("8-bit buffer size does not match dimensions");
  }
  std::vector<Rgb> px(width * height);
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = {interleaved[3 * i] / 255.0, interleaved[3 * i + 1] / 255.0,
             interleaved[3 * i + 2] / 255.0};
  }
  return ImageRGB(width, height, std::move(px));
}

std::vector<std::uint8_t> rgb_to_8bit(const ImageRGB& img) {
  std::vector<std::uint8_t> out;
  out.reserve(img.size() * 3);
  auto q = [](double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (const Rgb& p : img.pixels()) {
    out.push_back(q(p.r));
    out.push_back(q(p.g));
    out.push_back(q(p.b));
  }
  return out;
}

namespace colour {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double white_component(std::size_t row) {
  return kRgbToXyz[row][0] + kRgbToXyz[row][1] + kRgbToXyz[row][2];
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  if (t > delta * delta * delta) return std::cbrt(t);
  return t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// CIEDE2000 lightness weighting.
double lightness_weight(double l) {
  const double d = (l - 50.0) * (l - 50.0);
  return 1.0 + 0.015 * d / std::sqrt(20.0 + d);
}

// CIEDE2000 hue weighting function T(h), h in radians.
double hue_t(double h) {
  const double hd = h / kDeg;
  return 1.0 - 0.17 * std::cos((hd - 30.0) * kDeg) + 0.24 * std::cos(2.0 * hd * kDeg) +
         0.32 * std::cos((3.0 * hd + 6.0) * kDeg) - 0.20 * std::cos((4.0 * hd - 63.0) * kDeg);
}

double hue_integrand(double chroma, double h) {
  return 1.0 / (1.0 + 0.015 * chroma * hue_t(h));
}

// Chroma compensation factor of CIEDE2000 evaluated at a single colour.
double a_axis_gain(double chroma) {
  const double c7 = std::pow(chroma, 7.0);
  return 1.0 + 0.5 * (1.0 - std::sqrt(c7 / (c7 + std::pow(25.0, 7.0))));
}

double simpson(auto&& f, double lo, double hi, int intervals) {
  if (intervals % 2 != 0) ++intervals;
  const double step = (hi - lo) / intervals;
  double sum = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * step);
  }
  return sum * step / 3.0;
}

double raw_lightness_integral(double l) {
  return simpson([](double t) { return 1.0 / lightness_weight(t); }, 0.0, l, 4000);
}

struct PolarPrime {
  double chroma;
  double hue;  // [0, 2pi)
};

PolarPrime to_prime_polar(double a, double b) {
  const double ap = a * a_axis_gain(std::hypot(a, b));
  const double c = std::hypot(ap, b);
  double h = (c == 0.0) ? 0.0 : std::atan2(b, ap);
  if (h < 0.0) h += 2.0 * std::numbers::pi;
  return {c, h};
}

double compressed_chroma(double chroma_prime) {
  return std::log1p(0.045 * chroma_prime) / 0.045;
}

// Cumulative hue integral W(C', h) sampled on a (C', h) grid.
class HueWarp {
 public:
  static constexpr double kChromaStep = 0.5;
  static constexpr std::size_t kHueSamples = 1440;

  explicit HueWarp(double max_chroma)
      : rows_(static_cast<std::size_t>(std::ceil(max_chroma / kChromaStep)) + 2),
        table_(rows_ * (kHueSamples + 1)) {
    const double dh = 2.0 * std::numbers::pi / kHueSamples;
    std::vector<double> t(kHueSamples + 1);
    for (std::size_t k = 0; k <= kHueSamples; ++k) t[k] = hue_t(k * dh);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double c = r * kChromaStep;
      double* row = &table_[r * (kHueSamples + 1)];
      row[0] = 0.0;
      double prev = 1.0 / (1.0 + 0.015 * c * t[0]);
      for (std::size_t k = 1; k <= kHueSamples; ++k) {
        const double cur = 1.0 / (1.0 + 0.015 * c * t[k]);
        row[k] = row[k - 1] + 0.5 * (prev + cur) * dh;
        prev = cur;
      }
    }
  }

  // Fraction of the full hue circle swept up to angle h at chroma c.
  double fraction(double c, double h) const {
    const double rf = std::min(c / kChromaStep, static_cast<double>(rows_ - 1) - 1e-9);
    const auto r0 = static_cast<std::size_t>(rf);
    const double tr = rf - r0;
    const double hf = h / (2.0 * std::numbers::pi) * kHueSamples;
    const auto k0 = std::min(static_cast<std::size_t>(hf), kHueSamples - 1);
    const double tk = hf - k0;
    auto frac_at = [&](std::size_t r) {
      const double* row = &table_[r * (kHueSamples + 1)];
      const double w = row[k0] + tk * (row[k0 + 1] - row[k0]);
      return w / row[kHueSamples];
    };
    return (1.0 - tr) * frac_at(r0) + tr * frac_at(r0 + 1);
  }

 private:
  std::size_t rows_;
  std::vector<double> table_;
};

}  // namespace

Xyz display_rgb_to_xyz(const Rgb& rgb) {
  const double lin[3] = {std::pow(rgb.r, kDisplayGamma), std::pow(rgb.g, kDisplayGamma),
                         std::pow(rgb.b, kDisplayGamma)};
  double out[3];
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] + kRgbToXyz[i][2] * lin[2];
  }
  return {out[0], out[1], out[2]};
}

Lab xyz_to_cielab(const Xyz& xyz) {
  const double fx = lab_f(xyz.x / white_component(0));
  const double fy = lab_f(xyz.y / white_component(1));
  const double fz = lab_f(xyz.z / white_component(2));
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Lab display_rgb_to_cielab(const Rgb& rgb) { return xyz_to_cielab(display_rgb_to_xyz(rgb)); }

double Lab2000hlTable::lightness_exact(double l_star) {
  static const double full = raw_lightness_integral(100.0);
  return 100.0 * raw_lightness_integral(l_star) / full;
}

std::array<double, 2> Lab2000hlTable::chroma_plane_exact(double a_star, double b_star) {
  const PolarPrime p = to_prime_polar(a_star, b_star);
  const double total = simpson([&](double h) { return hue_integrand(p.chroma, h); }, 0.0,
                               2.0 * std::numbers::pi, 4096);
  const double part = simpson([&](double h) { return hue_integrand(p.chroma, h); }, 0.0,
                              p.hue, 4096);
  const double hue = 2.0 * std::numbers::pi * part / total;
  const double c = compressed_chroma(p.chroma);
  return {c * std::cos(hue), c * std::sin(hue)};
}

Lab2000hlTable::Lab2000hlTable() {
  const auto n_light = static_cast<std::size_t>(100.0 / kLightnessStep) + 1;
  lightness_.resize(n_light);
  // Cumulative Simpson over sub-intervals of each node step.
  constexpr int kSub = 16;
  const double h = kLightnessStep / kSub;
  auto w = [](double t) { return 1.0 / lightness_weight(t); };
  std::vector<double> raw(n_light, 0.0);
  for (std::size_t i = 1; i < n_light; ++i) {
    double acc = 0.0;
    for (int s = 0; s < kSub; ++s) {
      const double lo = (i - 1) * kLightnessStep + s * h;
      acc += (w(lo) + 4.0 * w(lo + 0.5 * h) + w(lo + h)) * h / 6.0;
    }
    raw[i] = raw[i - 1] + acc;
  }
  for (std::size_t i = 0; i < n_light; ++i) lightness_[i] = 100.0 * raw[i] / raw.back();

  const double max_prime = kChromaLimit * std::numbers::sqrt2 * 1.5;
  const HueWarp warp(max_prime);
  plane_a_.resize(kChromaNodes * kChromaNodes);
  plane_b_.resize(kChromaNodes * kChromaNodes);
  for (std::size_t ib = 0; ib < kChromaNodes; ++ib) {
    for (std::size_t ia = 0; ia < kChromaNodes; ++ia) {
      const double a = static_cast<double>(ia) - kChromaLimit;
      const double b = static_cast<double>(ib) - kChromaLimit;
      const PolarPrime p = to_prime_polar(a, b);
      const double hue = 2.0 * std::numbers::pi * warp.fraction(p.chroma, p.hue);
      const double c = compressed_chroma(p.chroma);
      plane_a_[ib * kChromaNodes + ia] = c * std::cos(hue);
      plane_b_[ib * kChromaNodes + ia] = c * std::sin(hue);
    }
  }
}

const Lab2000hlTable& Lab2000hlTable::instance() {
  static const Lab2000hlTable table;
  return table;
}

Lab Lab2000hlTable::chroma_node(std::size_t ia, std::size_t ib) const {
  const std::size_t i = ib * kChromaNodes + ia;
  return {0.0, plane_a_[i], plane_b_[i]};
}

Lab Lab2000hlTable::convert(const Lab& cielab, bool* clamped) const {
  constexpr double kSlack = 1e-9;
  bool outside = cielab.l < -kSlack || cielab.l > 100.0 + kSlack ||
                 std::abs(cielab.a) > kChromaLimit || std::abs(cielab.b) > kChromaLimit;
  if (clamped) *clamped = outside;

  const double l = std::clamp(cielab.l, 0.0, 100.0);
  const double lf = l / kLightnessStep;
  const auto l0 = std::min(static_cast<std::size_t>(lf), lightness_.size() - 2);
  const double tl = lf - l0;
  const double l_out = lightness_[l0] + tl * (lightness_[l0 + 1] - lightness_[l0]);

  const double af = std::clamp(cielab.a, -kChromaLimit, kChromaLimit) + kChromaLimit;
  const double bf = std::clamp(cielab.b, -kChromaLimit, kChromaLimit) + kChromaLimit;
  const auto a0 = std::min(static_cast<std::size_t>(af), kChromaNodes - 2);
  const auto b0 = std::min(static_cast<std::size_t>(bf), kChromaNodes - 2);
  const double ta = af - a0;
  const double tb = bf - b0;
  auto bilinear = [&](const std::vector<double>& t) {
    const std::size_t i = b0 * kChromaNodes + a0;
    const double top = t[i] + ta * (t[i + 1] - t[i]);
    const double bottom = t[i + kChromaNodes] + ta * (t[i + kChromaNodes + 1] - t[i + kChromaNodes]);
    return top + tb * (bottom - top);
  };
  return {l_out, bilinear(plane_a_), bilinear(plane_b_)};
}

Lab display_rgb_to_lab2000hl(const Rgb& rgb, bool* clamped) {
  return Lab2000hlTable::instance().convert(display_rgb_to_cielab(rgb), clamped);
}

ImageLab rgb_to_lab2000hl(const ImageRGB& img, ConversionReport* report) {
  validate_rgb(img);
  const Lab2000hlTable& table = Lab2000hlTable::instance();
  std::vector<Lab> out(img.size());
  std::size_t clamped_count = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    bool clamped = false;
    out[i] = table.convert(display_rgb_to_cielab(img[i]), &clamped);
    clamped_count += clamped ? 1 : 0;
  }
  if (report) report->clamped_pixels = clamped_count;
  return ImageLab(img.width(), img.height(), std::move(out));
}

ImageLab rgb_to_cielab(const ImageRGB& img) {
  validate_rgb(img);
  std::vector<Lab> out(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = display_rgb_to_cielab(img[i]);
  return ImageLab(img.width(), img.height(), std::move(out));
}

double delta_e_00hl(const Lab& p, const Lab& q) {
  for (double v : {p.l, p.a, p.b, q.l, q.a, q.b}) {
    if (!std::isfinite(v)) throw InputDomainError("delta_e_00hl: non-finite colour component");
  }
  const double dl = p.l - q.l;
  const double da = p.a - q.a;
  const double db = p.b - q.b;
  return std::sqrt(dl * dl + da * da + db * db);
}

}  // namespace colour
}  // namespace changeblind
