#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"
#include "woftkit/error.h"
#include "woftkit/image.h"
#include "woftkit/synth.h"

namespace woftkit {
namespace {

TEST(WarpImage, IdentityIsBitExact) {
  const ImageBuffer img = ProceduralTexture(64, 48, 3, 3);
  const WarpedImage w = WarpImage(Homography(), img, 64, 48);
  EXPECT_EQ(w.image.pixels(), img.pixels());
  EXPECT_EQ(w.valid.Count(), 64u * 48u);
}

TEST(WarpImage, IntegerTranslation) {
  const ImageBuffer img = ProceduralTexture(40, 30, 4);
  const WarpedImage w = WarpImage(Homography::Translation(5, 0), img, 40, 30);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 40; ++x) {
      if (x < 5) {
        EXPECT_FALSE(w.valid.at(x, y));
        EXPECT_EQ(w.image.at(x, y), 0.0f);
      } else {
        EXPECT_TRUE(w.valid.at(x, y));
        EXPECT_EQ(w.image.at(x, y), img.at(x - 5, y));
      }
    }
  }
}

TEST(WarpImage, RoundTripInterior) {
  const ImageBuffer img = ProceduralTexture(160, 120, 8);
  Rng rng(2);
  const Homography h = RandomHomography(160, 120, 0.05, rng);
  const WarpedImage fwd = WarpImage(h, img, 160, 120);
  const WarpedImage back = WarpImage(Invert(h), fwd.image, 160, 120);
  // Interior: the pixel and its 1-px neighbourhood survive both warps.
  double sum = 0;
  int n = 0;
  for (int y = 10; y < 110; ++y) {
    for (int x = 10; x < 150; ++x) {
      const Point2 q = WarpPoint(h, {double(x), double(y)});
      if (q.x < 2 || q.y < 2 || q.x > 157 || q.y > 117 || !back.valid.at(x, y)) continue;
      sum += std::abs(back.image.at(x, y) - img.at(x, y));
      ++n;
    }
  }
  ASSERT_GT(n, 5000);
  EXPECT_LT(sum / n, 2.0 / 255);
}

TEST(WarpImage, ValidityMatchesRender) {
  Rng rng(6);
  const ImageBuffer img = ProceduralTexture(80, 60, 1);
  for (int k = 0; k < 5; ++k) {
    const Homography h = RandomHomography(80, 60, 0.25, rng);
    EXPECT_EQ(WarpValidity(h, 80, 60, 90, 70).data, WarpImage(h, img, 90, 70).valid.data);
  }
}

TEST(WarpMask, Translation) {
  Mask m(20, 10);
  m.set(3, 4, true);
  const Mask w = WarpMask(Homography::Translation(2, 1), m, 20, 10);
  EXPECT_EQ(w.Count(), 1u);
  EXPECT_TRUE(w.at(5, 5));
}

TEST(SampleBilinear, InterpolatesAndBounds) {
  ImageBuffer img(2, 2, 1, std::vector<float>{0.f, 1.f, 2.f, 3.f});
  float v = 0;
  ASSERT_TRUE(SampleBilinear(img, 0.5, 0.5, 0, &v));
  EXPECT_FLOAT_EQ(v, 1.5f);
  EXPECT_FALSE(SampleBilinear(img, 1.01, 0, 0, &v));
  EXPECT_FALSE(SampleBilinear(img, -0.01, 0, 0, &v));
}

TEST(Downscale, ScaleRelation) {
  // A linear ramp downscaled by a centered window keeps full = s * small.
  ImageBuffer img(31, 31, 1);
  for (int y = 0; y < 31; ++y)
    for (int x = 0; x < 31; ++x) img.at(x, y) = 0.01f * x;
  const ImageBuffer small = Downscale(img, 3);
  EXPECT_EQ(small.width(), 11);
  for (int x = 1; x < 10; ++x) EXPECT_NEAR(small.at(x, 5), 0.01f * 3 * x, 1e-6);
  EXPECT_EQ(Downscale(img, 1).pixels(), img.pixels());
}

TEST(Downscale, MaskPointSampling) {
  Mask m(9, 9);
  m.set(3, 6, true);
  const Mask s = Downscale(m, 3);
  EXPECT_EQ(s.width, 3);
  EXPECT_TRUE(s.at(1, 2));
  EXPECT_EQ(s.Count(), 1u);
}

TEST(Psnr, KnownValue) {
  ImageBuffer a(10, 10, 1, 0.5f), b(10, 10, 1, 0.6f);
  EXPECT_NEAR(Psnr(a, b), 20.0, 1e-5);
  EXPECT_TRUE(std::isinf(Psnr(a, a)));
  EXPECT_NEAR(MeanAbsoluteError(a, b), 0.1, 1e-6);
}

TEST(ToGray, Rec601) {
  ImageBuffer rgb(1, 1, 3, std::vector<float>{1.f, 0.f, 0.f});
  EXPECT_NEAR(ToGray(rgb).at(0, 0), 0.299f, 1e-6);
}

TEST(MaskBoundingQuad, Corners) {
  Mask m(20, 20);
  m.set(4, 5, true);
  m.set(12, 9, true);
  const auto q = MaskBoundingQuad(m);
  EXPECT_EQ(q[0].x, 4);
  EXPECT_EQ(q[0].y, 5);
  EXPECT_EQ(q[2].x, 12);
  EXPECT_EQ(q[2].y, 9);
  EXPECT_THROW(MaskBoundingQuad(Mask(5, 5)), Error);
}

}  // namespace
}  // namespace woftkit
