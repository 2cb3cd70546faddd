#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "changeblind/colour.hpp"
#include "changeblind/error.hpp"
#include "changeblind/features.hpp"
#include "changeblind/png_io.hpp"
#include "oracles.hpp"

using namespace changeblind;
using namespace changeblind::features;

namespace {

ImageRGB random_image(std::size_t w, std::size_t h, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, 255);
  std::vector<std::uint8_t> px(w * h * 3);
  for (auto& v : px) v = static_cast<std::uint8_t>(u(rng));
  return rgb_from_8bit(w, h, px);
}

std::vector<std::vector<double>> channels(const ImageLab& img) {
  std::vector<std::vector<double>> c(3);
  for (const Lab& p : img.pixels()) {
    c[0].push_back(p.l);
    c[1].push_back(p.a);
    c[2].push_back(p.b);
  }
  return c;
}

double oracle_fsi(const ImageRGB& a, const ImageRGB& b) {
  return oracle::salience_imbalance(channels(colour::rgb_to_lab2000hl(a)),
                                    channels(colour::rgb_to_lab2000hl(b)), a.width(), a.height());
}

}  // namespace

TEST(ChangeMask, IdenticalImagesAreRejected) {
  const ImageRGB a(4, 4, Rgb{0.2, 0.3, 0.4});
  EXPECT_THROW(compute_change_mask(a, a), ValidationError);
}

TEST(ChangeMask, SinglePixelDifference) {
  const ImageRGB a(5, 3, Rgb{0.2, 0.3, 0.4});
  ImageRGB b = a;
  b.at(3, 2).g = 0.5;
  const ChangeMask m = compute_change_mask(a, b);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.coords()[0], (PixelCoord{3, 2}));
}

TEST(ChangeMask, BlockMatchesExhaustiveScan) {
  std::mt19937_64 rng(1);
  const ImageRGB a = random_image(4, 4, rng);
  ImageRGB b = a;
  for (std::size_t y = 1; y < 3; ++y)
    for (std::size_t x = 2; x < 4; ++x) b.at(x, y) = {1.0 - a.at(x, y).r, a.at(x, y).g, a.at(x, y).b};
  std::vector<PixelCoord> expected;
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      if (!(a.at(x, y) == b.at(x, y))) expected.push_back({x, y});
  const ChangeMask m = compute_change_mask(a, b);
  EXPECT_EQ(m.coords(), expected);
  EXPECT_EQ(m.size(), 4u);
}

TEST(ChangeMask, DimensionMismatchIsStructural) {
  EXPECT_THROW(compute_change_mask(ImageRGB(3, 3, Rgb{}), ImageRGB(3, 4, Rgb{})), StructuralError);
}

TEST(ChangeMask, ChebyshevDistance) {
  ChangeMask m(10, 10, {{2, 2}, {3, 2}});
  EXPECT_EQ(m.chebyshev_distance(2, 2), 0u);
  EXPECT_EQ(m.chebyshev_distance(6, 4), 3u);
  EXPECT_EQ(m.chebyshev_distance(-1, 9), 7u);
}

TEST(ChangeMagnitude, ConstantChangeOfFive) {
  ImageLab a(3, 3, Lab{50, 0, 0});
  ImageLab b = a;
  const std::vector<PixelCoord> c = {{0, 0}, {1, 1}, {2, 2}};
  for (auto p : c) b.at(p.x, p.y) = {53, 4, 0};
  EXPECT_DOUBLE_EQ(change_magnitude(a, b, ChangeMask(3, 3, c)), 5.0);
}

TEST(ChangeMagnitude, MeanOfOneTwoSix) {
  ImageLab a(3, 1, Lab{50, 0, 0});
  ImageLab b = a;
  b.at(0, 0).l = 51;
  b.at(1, 0).a = 2;
  b.at(2, 0).b = -6;
  EXPECT_DOUBLE_EQ(change_magnitude(a, b, ChangeMask(3, 1, {{0, 0}, {1, 0}, {2, 0}})), 3.0);
}

TEST(ChangeMagnitude, EmptyMaskIsRejected) {
  const ImageLab a(2, 2, Lab{});
  EXPECT_THROW(change_magnitude(a, a, ChangeMask(2, 2, {})), ValidationError);
}

TEST(ChangeMagnitude, InvariantUnderIdenticalPaddingAndPermutation) {
  std::mt19937_64 rng(9);
  const ImageRGB a = random_image(6, 5, rng);
  ImageRGB b = a;
  b.at(2, 3) = {0.9, 0.1, 0.4};
  b.at(4, 1) = {0.2, 0.8, 0.3};
  const double base = change_magnitude(make_image_pair("p", a, b));

  ImageRGB pa(10, 9, Rgb{0.5, 0.2, 0.7}), pb = pa;
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 6; ++x) {
      pa.at(x + 2, y + 3) = a.at(x, y);
      pb.at(x + 2, y + 3) = b.at(x, y);
    }
  EXPECT_NEAR(change_magnitude(make_image_pair("p", pa, pb)), base, 1e-12);

  // Swap two unchanged pixels in both images.
  ImageRGB qa = a, qb = b;
  std::swap(qa.at(0, 0), qa.at(5, 4));
  std::swap(qb.at(0, 0), qb.at(5, 4));
  EXPECT_NEAR(change_magnitude(make_image_pair("p", qa, qb)), base, 1e-12);
}

TEST(SalienceImbalance, IdenticalImagesGiveZero) {
  std::mt19937_64 rng(2);
  const ImageRGB a = random_image(8, 6, rng);
  EXPECT_EQ(salience_imbalance(a, a), 0.0);
}

TEST(SalienceImbalance, FourByFourMatchesBruteForce) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    // Grey images: a single informative channel.
    std::uniform_int_distribution<int> u(0, 255);
    std::vector<std::uint8_t> pa, pb;
    for (int k = 0; k < 16; ++k) {
      const auto va = static_cast<std::uint8_t>(u(rng)), vb = static_cast<std::uint8_t>(u(rng));
      pa.insert(pa.end(), {va, va, va});
      pb.insert(pb.end(), {vb, vb, vb});
    }
    const ImageRGB a = rgb_from_8bit(4, 4, pa), b = rgb_from_8bit(4, 4, pb);
    EXPECT_EQ(salience_imbalance(a, b), oracle_fsi(a, b));
  }
}

TEST(SalienceImbalance, RandomPairsMatchBruteForceAndAreSymmetric) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  for (int i = 0; i < 15; ++i) {
    const std::size_t w = dim(rng), h = dim(rng);
    const ImageRGB a = random_image(w, h, rng), b = random_image(w, h, rng);
    const double v = salience_imbalance(a, b);
    EXPECT_EQ(v, oracle_fsi(a, b)) << w << "x" << h;
    EXPECT_EQ(v, salience_imbalance(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(SalienceImbalance, DctMatchesDirectDefinitionUpToScale) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> x(35);
  for (auto& v : x) v = u(rng);
  const auto fast = dct2(x, 7, 5);
  const auto slow = oracle::dct2_direct(x, 7, 5);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fast[i], 4.0 * slow[i], 1e-10);
}

TEST(SalienceImbalance, SignOfZeroIsPositive) {
  EXPECT_FALSE(negative_sign(0.0, 1.0));
  EXPECT_FALSE(negative_sign(-1e-13, 1.0));
  EXPECT_TRUE(negative_sign(-1e-6, 1.0));
  // Constant channel: only the DC term is non-zero; all signs positive.
  const std::vector<double> flat(12, 3.0);
  for (bool b : dct_sign_bits(flat, 4, 3)) EXPECT_FALSE(b);
}

TEST(SalienceImbalance, SizeMismatchIsStructural) {
  EXPECT_THROW(salience_imbalance(ImageRGB(2, 2, Rgb{}), ImageRGB(2, 3, Rgb{})), StructuralError);
}

TEST(UserExperience, Examples) {
  EXPECT_DOUBLE_EQ(user_experience(std::vector<int>{1, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(user_experience(std::vector<int>{2, 4}), 9.0);
  EXPECT_DOUBLE_EQ(user_experience(std::vector<int>{10, 20, 30, 40}), 625.0);
}

TEST(UserExperience, Errors) {
  EXPECT_THROW(user_experience(std::vector<int>{}), ValidationError);
  EXPECT_THROW(user_experience(std::vector<int>{3, 0}), InputDomainError);
  EXPECT_THROW(user_experience(std::vector<int>{-2}), InputDomainError);
}

TEST(UserExperience, PermutationInvariantAndIncreasing) {
  std::vector<int> v = {3, 9, 1, 4};
  const double base = user_experience(v);
  std::reverse(v.begin(), v.end());
  EXPECT_EQ(user_experience(v), base);
  v[2] += 1;
  EXPECT_GT(user_experience(v), base);
}

TEST(FeatureTable, CsvAndJsonRoundTrip) {
  std::vector<FeatureVector> rows(2);
  rows[0] = {"a", 1.5, 0.01, 9.0, 0.3, 0.4, 0.05, 0.06};
  rows[1] = {"b", 0.1 + 0.2, 1.0 / 3.0, std::nullopt, std::nullopt, std::nullopt, std::nullopt,
             std::nullopt};
  std::stringstream ss;
  write_feature_csv(ss, rows);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')),
            "pair_id,f_cm,f_si,f_ue,se_global,se_local,ed_global,ed_local");
  EXPECT_EQ(read_feature_csv(ss), rows);
  EXPECT_EQ(features_from_json(features_to_json(rows)), rows);
}

TEST(FeatureTable, HeaderMismatchIsReported) {
  std::stringstream ss("pair_id,f_cm\n");
  EXPECT_THROW(read_feature_csv(ss), ValidationError);
}

TEST(Png, RoundTripAndAlphaRules) {
  std::mt19937_64 rng(6);
  const ImageRGB img = random_image(5, 4, rng);
  EXPECT_EQ(decode_png(encode_png(img)), img);
  EXPECT_THROW(decode_png({1, 2, 3}), IoError);
}
