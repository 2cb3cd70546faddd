#include "changeblind/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "changeblind/colour.hpp"
#include "changeblind/error.hpp"
#include "changeblind/png_io.hpp"
#include "changeblind/rng.hpp"

namespace changeblind::data {

namespace {

using Rgb8 = std::array<int, 3>;

struct Shape {
  bool ellipse = false;
  long x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive box
  Rgb8 colour{};
};

long uniform_between(Rng& rng, long lo, long hi) {
  return lo + static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

Rgb8 random_colour(Rng& rng, int lo, int hi) {
  return {static_cast<int>(uniform_between(rng, lo, hi)),
          static_cast<int>(uniform_between(rng, lo, hi)),
          static_cast<int>(uniform_between(rng, lo, hi))};
}

bool covers(const Shape& s, long x, long y) {
  if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) return false;
  if (!s.ellipse) return true;
  const double cx = 0.5 * static_cast<double>(s.x0 + s.x1);
  const double cy = 0.5 * static_cast<double>(s.y0 + s.y1);
  const double rx = 0.5 * static_cast<double>(s.x1 - s.x0 + 1);
  const double ry = 0.5 * static_cast<double>(s.y1 - s.y0 + 1);
  const double dx = (static_cast<double>(x) - cx) / rx;
  const double dy = (static_cast<double>(y) - cy) / ry;
  return dx * dx + dy * dy <= 1.0;
}

ImageRGB render(std::size_t w, std::size_t h, const Rgb8& top, const Rgb8& bottom,
                const std::vector<Shape>& shapes) {
  std::vector<std::uint8_t> px(w * h * 3);
  for (std::size_t y = 0; y < h; ++y) {
    const double t = h > 1 ? static_cast<double>(y) / static_cast<double>(h - 1) : 0.0;
    for (std::size_t x = 0; x < w; ++x) {
      Rgb8 c;
      for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(top[k] + t * (bottom[k] - top[k])));
      for (const Shape& s : shapes) {
        if (covers(s, static_cast<long>(x), static_cast<long>(y))) c = s.colour;
      }
      for (int k = 0; k < 3; ++k) px[(y * w + x) * 3 + k] = static_cast<std::uint8_t>(c[k]);
    }
  }
  return rgb_from_8bit(w, h, px);
}

Lab to_lab(const Rgb8& c) {
  return colour::display_rgb_to_lab2000hl({c[0] / 255.0, c[1] / 255.0, c[2] / 255.0});
}

std::string numbered(const char* prefix, std::size_t i, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, digits, i);
  return buf;
}

}  // namespace

SyntheticDataset make_synthetic(const SyntheticOptions& opt) {
  if (opt.width < 96 || opt.height < 48) {
    throw ValidationError("synthetic images must be at least 96x48 pixels");
  }
  SyntheticDataset ds;
  ds.manifest.name = opt.name;
  const long w = static_cast<long>(opt.width);
  const long h = static_cast<long>(opt.height);
  const int digits = opt.n_pairs >= 1000 ? 4 : 3;

  // The plan comes first: pairs shown later on average are detected later.
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < opt.n_pairs; ++k) ids.push_back(numbered("pair", k + 1, digits));
  ds.plan = generate_sequences(opt.n_observers, ids, derive_seed(opt.seed, {3}));
  const auto mean_rank = average_ranks(ds.plan);

  for (std::size_t k = 0; k < opt.n_pairs; ++k) {
    Rng rng(derive_seed(opt.seed, {2, k}));
    const std::string& id = ids[k];
    const bool hard = uniform_real(rng) < 0.5;
    const Rgb8 top = random_colour(rng, 30, 225);
    const Rgb8 bottom = random_colour(rng, 30, 225);

    std::vector<Shape> shapes;
    const long n_shapes = uniform_between(rng, 6, 12);
    for (long s = 0; s < n_shapes; ++s) {
      Shape sh;
      sh.ellipse = uniform_real(rng) < 0.5;
      const long sw = uniform_between(rng, 6, w / 3);
      const long shh = uniform_between(rng, 6, h / 3);
      sh.x0 = uniform_between(rng, 0, w - sw);
      sh.y0 = uniform_between(rng, 0, h - shh);
      sh.x1 = sh.x0 + sw - 1;
      sh.y1 = sh.y0 + shh - 1;
      sh.colour = random_colour(rng, 0, 255);
      shapes.push_back(sh);
    }

    // The changed shape sits in the left or right third so that clicks more
    // than the hit radius away from it exist.
    Shape target;
    target.ellipse = uniform_real(rng) < 0.5;
    const long size_lo = hard ? 6 : 24, size_hi = hard ? 12 : 40;
    const long tw = uniform_between(rng, size_lo, size_hi);
    const long th = uniform_between(rng, size_lo, std::min(size_hi, h - 8));
    const bool left = uniform_real(rng) < 0.5;
    const long band = std::max<long>(1, w / 3 - tw);
    target.x0 = left ? uniform_between(rng, 2, 2 + band) : w - 3 - tw - uniform_between(rng, 0, band);
    target.y0 = uniform_between(rng, 2, h - th - 2);
    target.x1 = target.x0 + tw - 1;
    target.y1 = target.y0 + th - 1;
    target.colour = random_colour(rng, 50, 205);

    Rgb8 changed_colour = target.colour;
    const int channel = static_cast<int>(uniform_index(rng, 3));
    const int sign = uniform_real(rng) < 0.5 ? -1 : 1;
    const int first_step = hard ? static_cast<int>(uniform_between(rng, 4, 10))
                                : static_cast<int>(uniform_between(rng, 35, 45));
    double de = 0.0;
    bool found = false;
    // A channel pushed into its limit may saturate first; fall back to the
    // opposite direction, then to the other channels.
    for (int attempt = 0; attempt < 6 && !found; ++attempt) {
      const int ch = (channel + attempt / 2) % 3;
      const int sg = attempt % 2 == 0 ? sign : -sign;
      for (int step = first_step; step <= 255; ++step) {
        changed_colour = target.colour;
        changed_colour[ch] = std::clamp(target.colour[ch] + sg * step, 0, 255);
        de = colour::delta_e_00hl(to_lab(target.colour), to_lab(changed_colour));
        if (de >= 2.0 * kMinChangeMagnitude) {
          found = true;
          break;
        }
      }
    }
    if (!found) throw ValidationError("cannot build a visible change");

    shapes.push_back(target);
    ImageRGB original = render(opt.width, opt.height, top, bottom, shapes);
    shapes.back().colour = changed_colour;
    ImageRGB changed = render(opt.width, opt.height, top, bottom, shapes);

    const double u = uniform_real(rng);
    const auto rank = mean_rank.find(id);
    const double r = rank == mean_rank.end() ? 0.0 : rank->second;
    const double mode = (hard ? 24.0 + 10.0 * u - 0.1 * de : 3.0 + 6.0 * u + 60.0 / (10.0 + de)) +
                        0.003 * r * r;
    ds.latent_mode[id] = mode;
    ds.hard[id] = hard;

    PairEntry entry;
    entry.id = id;
    entry.original = "images/" + id + "_original.png";
    entry.changed = "images/" + id + "_changed.png";
    entry.description = std::string(hard ? "small" : "large") + " " +
                        (target.ellipse ? "ellipse" : "rectangle") + " recoloured";
    entry.width = opt.width;
    entry.height = opt.height;
    ds.manifest.pairs.push_back(entry);
    ds.pairs.push_back(features::make_image_pair(id, std::move(original), std::move(changed)));
  }

  for (std::size_t o = 0; o < opt.n_observers; ++o) {
    Rng rng(derive_seed(opt.seed, {4, o}));
    ObserverEntry obs;
    obs.id = numbered("obs", o + 1, 3);
    obs.age = static_cast<double>(uniform_between(rng, 18, 65));
    obs.site = "synthetic";
    ds.manifest.observers.push_back(obs);

    const double speed = std::exp(0.15 * normal(rng));
    // The last observer of a larger panel is careless, for screening.
    const double fp_rate = (opt.n_observers >= 5 && o + 1 == opt.n_observers) ? 0.4 : 0.02;
    const auto& seq = ds.plan.sequences[o];
    for (std::size_t r = 0; r < seq.size(); ++r) {
      const features::ImagePair& pair = *std::find_if(
          ds.pairs.begin(), ds.pairs.end(), [&](const auto& p) { return p.pair_id == seq[r]; });
      stats::DetectionRecord rec;
      rec.observer_id = obs.id;
      rec.pair_id = seq[r];
      rec.sequence_index = static_cast<int>(r + 1);
      double t = ds.latent_mode[seq[r]] * speed * std::exp(0.2 * normal(rng)) *
                 (1.0 - 0.002 * static_cast<double>(r));
      t = std::max(0.3, std::round(t * 1000.0) / 1000.0);
      const auto& coords = pair.mask.coords();
      if (uniform_real(rng) < fp_rate) {
        const auto& c = coords[coords.size() / 2];
        const long far_x = static_cast<long>(c.x) < w / 2 ? w - 1 : 0;
        const long y = uniform_between(rng, 0, h - 1);
        if (pair.mask.chebyshev_distance(far_x, y) > stats::kHitRadiusPx) {
          rec.outcome = stats::Outcome::false_positive;
          rec.time_s = std::clamp(std::round(0.5 * t * 1000.0) / 1000.0, 0.3, 59.0);
          rec.click = stats::Click{static_cast<int>(far_x), static_cast<int>(y)};
          ds.records.push_back(rec);
          continue;
        }
      }
      if (t >= stats::kTimeoutSeconds) {
        rec.outcome = stats::Outcome::timeout;
        rec.time_s = stats::kTimeoutSeconds;
      } else {
        const auto& c = coords[uniform_index(rng, coords.size())];
        const long cx = std::clamp<long>(static_cast<long>(c.x) + uniform_between(rng, -4, 4), 0, w - 1);
        const long cy = std::clamp<long>(static_cast<long>(c.y) + uniform_between(rng, -4, 4), 0, h - 1);
        rec.outcome = stats::Outcome::hit;
        rec.time_s = t;
        rec.click = stats::Click{static_cast<int>(cx), static_cast<int>(cy)};
      }
      ds.records.push_back(rec);
    }
  }
  return ds;
}

void write_synthetic(const std::filesystem::path& root, const SyntheticDataset& ds) {
  std::filesystem::create_directories(root / "images");
  for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
    write_png(root / ds.manifest.pairs[i].original, ds.pairs[i].original);
    write_png(root / ds.manifest.pairs[i].changed, ds.pairs[i].changed);
  }
  save_dataset_metadata(root, ds.manifest, ds.records);
  write_text_file(root / "plan.json", plan_to_json(ds.plan));
}

}  // namespace changeblind::data
