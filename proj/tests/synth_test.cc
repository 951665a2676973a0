#include <cmath>

#include <gtest/gtest.h>

#include "woftkit/error.h"
#include "woftkit/image.h"
#include "woftkit/synth.h"

namespace woftkit {
namespace {

std::array<Point2, 4> Corners(int w, int h) {
  return {Point2{0, 0}, Point2{double(w - 1), 0}, Point2{double(w - 1), double(h - 1)},
          Point2{0, double(h - 1)}};
}

TEST(RandomHomography, ZeroFracIsIdentity) {
  Rng rng(1);
  EXPECT_EQ(RandomHomography(640, 480, 0.0, rng), Homography());
}

TEST(RandomHomography, FourPointExactness) {
  Rng rng(2);
  const auto c = Corners(640, 480);
  for (int k = 0; k < 50; ++k) {
    const Homography h = RandomHomography(640, 480, 0.2, rng);
    const Homography inv = Invert(h);
    for (const Point2& p : c) {
      const Point2 back = WarpPoint(inv, WarpPoint(h, p));
      EXPECT_NEAR(back.x, p.x, 1e-9);
      EXPECT_NEAR(back.y, p.y, 1e-9);
    }
  }
}

TEST(RandomHomography, DisplacementBoundedByDiagonalFraction) {
  Rng rng(3);
  const auto c = Corners(640, 480);
  const double bound = 0.2 * std::sqrt(640.0 * 640.0 + 480.0 * 480.0);
  EXPECT_DOUBLE_EQ(bound, 160.0);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const Homography h = RandomHomography(640, 480, 0.2, rng);
    std::array<Point2, 4> q;
    for (int i = 0; i < 4; ++i) {
      q[i] = WarpPoint(h, c[i]);
      worst = std::max(worst, Distance(q[i], c[i]));
    }
    EXPECT_TRUE(IsConvexQuad(q));
  }
  EXPECT_LE(worst, bound + 1e-9);
  // and the bound is actually approached
  EXPECT_GT(worst, 0.8 * bound);
}

TEST(RandomHomography, RejectsBadFraction) {
  Rng rng(4);
  EXPECT_THROW(RandomHomography(640, 480, 0.5, rng), Error);
  EXPECT_THROW(RandomHomography(640, 480, -0.1, rng), Error);
}

TEST(MakePair, TrivialSpecGivesIdenticalImages) {
  const ImageBuffer src = ProceduralTexture(96, 72, 1);
  PairSpec spec;
  spec.corner_perturbation_frac = 0;
  spec.blur_max_len = 0;
  spec.degrade_quality = 100;
  const PairSample p = MakePair(src, spec);
  EXPECT_EQ(p.gt, Homography());
  EXPECT_EQ(p.first.pixels(), p.second.pixels());
}

TEST(MakePair, SamplingOracle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageBuffer src = ProceduralTexture(160, 120, 10 + seed);
    PairSpec spec;
    spec.blur_max_len = 0;
    spec.degrade_quality = 100;
    spec.rng_seed = seed;
    const PairSample p = MakePair(src, spec);
    const Homography from_first = Invert(p.pose_first);
    const Homography from_second = Invert(p.pose_second);
    int n = 0, good = 0;
    for (int y = 0; y < 120; ++y) {
      for (int x = 0; x < 160; ++x) {
        // interior: both images sample src away from its border
        const Point2 q = WarpPoint(p.gt, {double(x), double(y)});
        const Point2 s1 = WarpPoint(from_first, {double(x), double(y)});
        const Point2 s2 = WarpPoint(from_second, q);
        const auto inside = [](const Point2& s) {
          return s.x >= 2 && s.y >= 2 && s.x <= 157 && s.y <= 117;
        };
        if (!inside(s1) || !inside(s2) || q.x < 1 || q.y < 1 || q.x > 158 || q.y > 118) continue;
        float v = 0;
        ASSERT_TRUE(SampleBilinear(p.second, q.x, q.y, 0, &v));
        ++n;
        if (std::abs(v - p.first.at(x, y)) < 2.0 / 255) ++good;
      }
    }
    ASSERT_GT(n, 2000) << seed;
    EXPECT_GE(double(good) / n, 0.99) << seed;
  }
}

TEST(MakePair, DefaultsLowerPsnr) {
  const ImageBuffer src = ProceduralTexture(160, 120, 21);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PairSpec spec;
    spec.rng_seed = seed;
    const PairSample p = MakePair(src, spec);
    EXPECT_LT(Psnr(p.second_clean, p.second), 45.0) << seed;
    EXPECT_LE(p.blur_length, 20.0);
  }
}

TEST(MakePair, DeterministicUnderSeed) {
  const ImageBuffer src = ProceduralTexture(80, 60, 5);
  PairSpec spec;
  spec.rng_seed = 9;
  const PairSample a = MakePair(src, spec), b = MakePair(src, spec);
  EXPECT_EQ(a.gt, b.gt);
  EXPECT_EQ(a.second.pixels(), b.second.pixels());
  spec.rng_seed = 10;
  EXPECT_NE(MakePair(src, spec).gt, a.gt);
}

TEST(PairSpec, Validation) {
  PairSpec s;
  s.degrade_quality = 0;
  EXPECT_THROW(s.Validate(), Error);
  s = {};
  s.corner_perturbation_frac = 0.5;
  EXPECT_THROW(s.Validate(), Error);
  s = {};
  s.blur_max_len = -1;
  EXPECT_THROW(s.Validate(), Error);
}

TEST(MakeSequence, ZeroSmoothnessIsStatic) {
  const ImageBuffer src = ProceduralTexture(64, 48, 2);
  PairSpec spec;
  const SequenceRecord s = MakeSequence(src, 12, 0.0, spec);
  ASSERT_EQ(s.size(), 12u);
  for (std::size_t t = 0; t < s.size(); ++t) {
    EXPECT_EQ(s.gt_poses[t], Homography());
    EXPECT_EQ(s.frames[t].pixels(), s.frames[0].pixels()) << t;
  }
}

TEST(MakeSequence, LengthAndConvexPoses) {
  const ImageBuffer src = ProceduralTexture(64, 48, 3);
  PairSpec spec;
  spec.rng_seed = 4;
  const SequenceRecord s = MakeSequence(src, 501, 0.35, spec);
  ASSERT_EQ(s.size(), 501u);
  ASSERT_EQ(s.gt_poses.size(), 501u);
  EXPECT_EQ(s.gt_poses[0], Homography());
  const auto quad = MaskBoundingQuad(s.template_mask);
  const double bound = spec.corner_perturbation_frac * std::hypot(64.0, 48.0);
  bool moved = false;
  for (const Homography& h : s.gt_poses) {
    std::array<Point2, 4> q;
    for (int i = 0; i < 4; ++i) {
      q[i] = WarpPoint(h, quad[i]);
      EXPECT_LE(Distance(q[i], quad[i]), bound + 1e-6);
      moved = moved || Distance(q[i], quad[i]) > 1.0;
    }
    EXPECT_TRUE(IsConvexQuad(q));
  }
  EXPECT_TRUE(moved);
}

TEST(MakeSequence, Deterministic) {
  const ImageBuffer src = ProceduralTexture(48, 32, 6);
  PairSpec spec;
  spec.rng_seed = 3;
  const SequenceRecord a = MakeSequence(src, 20, 0.5, spec);
  const SequenceRecord b = MakeSequence(src, 20, 0.5, spec);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a.gt_poses[t], b.gt_poses[t]);
    EXPECT_EQ(a.frames[t].pixels(), b.frames[t].pixels());
  }
}

TEST(Degrade, QualityHundredIsNearLossless) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ImageBuffer img = ProceduralTexture(96, 64, seed, 1, TextureKind::kNatural);
    EXPECT_LT(MeanAbsoluteError(Degrade(img, 100), img), 1.0 / 255);
  }
}

TEST(Degrade, QualityTwentyFiveBandAndMonotone) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ImageBuffer img = ProceduralTexture(160, 120, 100 + seed, 1, TextureKind::kNatural);
    const double q25 = Psnr(Degrade(img, 25), img);
    const double q50 = Psnr(Degrade(img, 50), img);
    EXPECT_GE(q25, 28.0) << seed;
    EXPECT_LE(q25, 38.0) << seed;
    EXPECT_GE(q50, q25) << seed;
  }
}

TEST(Degrade, BlockArtifactsAndDeterminism) {
  const ImageBuffer img = ProceduralTexture(64, 64, 7, 1, TextureKind::kNatural);
  const ImageBuffer a = Degrade(img, 25);
  EXPECT_EQ(a.pixels(), Degrade(img, 25).pixels());
  // Jumps across 8x8 block boundaries exceed those inside blocks.
  double across = 0, inside = 0;
  int na = 0, ni = 0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x + 1 < 64; ++x) {
      const double e0 = a.at(x, y) - img.at(x, y), e1 = a.at(x + 1, y) - img.at(x + 1, y);
      if (x % 8 == 7) {
        across += std::abs(e1 - e0);
        ++na;
      } else {
        inside += std::abs(e1 - e0);
        ++ni;
      }
    }
  }
  EXPECT_GT(across / na, inside / ni);
}

TEST(MotionBlur, ZeroLengthCopiesAndConstantIsFixed) {
  const ImageBuffer img = ProceduralTexture(40, 30, 8);
  EXPECT_EQ(MotionBlur(img, 0, 0.3).pixels(), img.pixels());
  const ImageBuffer flat(40, 30, 1, 0.4f);
  const ImageBuffer blurred = MotionBlur(flat, 12, 1.1);
  for (float v : blurred.pixels()) EXPECT_NEAR(v, 0.4f, 1e-6);
}

TEST(ProceduralTexture, RangeAndDeterminism) {
  for (TextureKind k : {TextureKind::kSmooth, TextureKind::kNatural}) {
    const ImageBuffer a = ProceduralTexture(50, 40, 11, 3, k);
    EXPECT_EQ(a.channels(), 3);
    EXPECT_EQ(a.pixels(), ProceduralTexture(50, 40, 11, 3, k).pixels());
    for (float v : a.pixels()) {
      EXPECT_GE(v, 0.02f);
      EXPECT_LE(v, 0.98f);
    }
  }
}

}  // namespace
}  // namespace woftkit
