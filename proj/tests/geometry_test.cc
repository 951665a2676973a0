#include <gtest/gtest.h>

#include "test_util.h"
#include "woftkit/error.h"
#include "woftkit/geometry.h"

namespace woftkit {
namespace {

using testing::RandomH;

// Projective formula written out by hand, independent of Eigen.
Point2 HandWarp(const Homography& h, const Point2& p) {
  const double x = h(0, 0) * p.x + h(0, 1) * p.y + h(0, 2);
  const double y = h(1, 0) * p.x + h(1, 1) * p.y + h(1, 2);
  const double w = h(2, 0) * p.x + h(2, 1) * p.y + h(2, 2);
  return {x / w, y / w};
}

TEST(WarpPoint, Identity) {
  const Point2 q = WarpPoint(Homography(), {7, 3});
  EXPECT_EQ(q.x, 7);
  EXPECT_EQ(q.y, 3);
}

TEST(WarpPoint, Translation) {
  const Point2 q = WarpPoint(Homography::Translation(3, 4), {0, 0});
  EXPECT_EQ(q.x, 3);
  EXPECT_EQ(q.y, 4);
}

TEST(WarpPoint, MatchesHandEvaluation) {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const Homography h = RandomH(k);
    const Point2 p{rng.Uniform(-100, 700), rng.Uniform(-100, 600)};
    const Point2 a = WarpPoint(h, p), b = HandWarp(h, p);
    EXPECT_NEAR(a.x, b.x, 1e-9 * std::max(1.0, std::abs(b.x)));
    EXPECT_NEAR(a.y, b.y, 1e-9 * std::max(1.0, std::abs(b.y)));
  }
}

TEST(WarpPoint, PointAtInfinityThrows) {
  Matrix3 m = Matrix3::Identity();
  m(2, 0) = 1.0;  // w = x + 1 vanishes at x = -1
  const Homography h = Homography::FromMatrix(m);
  try {
    WarpPoint(h, {-1, 5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPointAtInfinity);
  }
}

TEST(Compose, IdentityAndInverse) {
  const Homography h = RandomH(3);
  EXPECT_TRUE(Compose(h, Homography()).matrix().isApprox(h.matrix(), 1e-15));
  EXPECT_LT((Compose(h, Invert(h)).matrix() - Matrix3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Compose, TranslationsAdd) {
  const Homography c = Compose(Homography::Translation(1.5, -2), Homography::Translation(4, 7));
  EXPECT_TRUE(c.matrix().isApprox(Homography::Translation(5.5, 5).matrix()));
}

TEST(Compose, AppliesRightOperandFirst) {
  const Homography a = RandomH(1), b = RandomH(2);
  const Point2 p{100, 200};
  const Point2 q1 = WarpPoint(Compose(a, b), p), q2 = WarpPoint(a, WarpPoint(b, p));
  EXPECT_NEAR(q1.x, q2.x, 1e-9);
  EXPECT_NEAR(q1.y, q2.y, 1e-9);
}

TEST(Compose, Associative) {
  for (int k = 0; k < 50; ++k) {
    const Homography a = RandomH(3 * k), b = RandomH(3 * k + 1), c = RandomH(3 * k + 2);
    const Matrix3 l = Compose(Compose(a, b), c).matrix(), r = Compose(a, Compose(b, c)).matrix();
    EXPECT_LE((l - r).norm(), 1e-9 * r.norm());
  }
}

TEST(Invert, SpecialCases) {
  EXPECT_EQ(Invert(Homography()).matrix(), Matrix3::Identity());
  EXPECT_TRUE(Invert(Homography::Translation(3, 4)).matrix().isApprox(Homography::Translation(-3, -4).matrix()));
}

TEST(Invert, Involution) {
  for (int k = 0; k < 50; ++k) {
    const Homography h = RandomH(100 + k);
    EXPECT_LT((Invert(Invert(h)).matrix() - h.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Invert, RoundTripPoints) {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const Homography h = RandomH(k);
    const Point2 p{rng.Uniform(0, 639), rng.Uniform(0, 479)};
    const Point2 back = WarpPoint(Invert(h), WarpPoint(h, p));
    EXPECT_LT(Distance(back, p), 1e-6);
  }
}

TEST(Homography, CanonicalizationIdempotent) {
  Matrix3 m;
  m << 2, 0.1, 4, -0.2, 1.8, 6, 1e-4, 2e-4, 2;
  const Homography h = Homography::FromMatrix(m);
  EXPECT_EQ(h(2, 2), 1.0);
  EXPECT_EQ(Homography::FromMatrix(h.matrix()), h);
  EXPECT_EQ(Homography::FromParameters(h.parameters()), h);
}

TEST(Homography, RejectsVanishingBottomRight) {
  Matrix3 m = Matrix3::Identity();
  m(2, 2) = 0;
  m(2, 0) = 1;
  EXPECT_THROW(Homography::FromMatrix(m), Error);
  EXPECT_THROW(Homography::FromMatrix(Matrix3::Zero()), Error);
}

TEST(Homography, RejectsSingular) {
  Matrix3 m;
  m << 1, 2, 3, 2, 4, 6, 0, 0, 1;
  EXPECT_THROW(Homography::FromMatrix(m), Error);
}

TEST(ScaleConjugate, MapsDownscaledCoordinates) {
  const Homography h = RandomH(9);
  const Homography full = ScaleConjugate(h, 3);
  const Point2 p{30, 45};
  const Point2 small = WarpPoint(h, {p.x / 3, p.y / 3});
  const Point2 q = WarpPoint(full, p);
  EXPECT_NEAR(q.x, 3 * small.x, 1e-9);
  EXPECT_NEAR(q.y, 3 * small.y, 1e-9);
}

TEST(FourPoint, ExactOnCorners) {
  const std::array<Point2, 4> src = {Point2{0, 0}, Point2{639, 0}, Point2{639, 479}, Point2{0, 479}};
  const std::array<Point2, 4> dst = {Point2{10, 20}, Point2{600, -5}, Point2{650, 470}, Point2{-20, 430}};
  const Homography h = FourPointHomography(src, dst);
  for (int i = 0; i < 4; ++i) EXPECT_LT(Distance(WarpPoint(h, src[i]), dst[i]), 1e-9);
}

TEST(FourPoint, CollinearThrows) {
  const std::array<Point2, 4> src = {Point2{0, 0}, Point2{1, 1}, Point2{2, 2}, Point2{3, 3}};
  EXPECT_THROW(FourPointHomography(src, src), Error);
}

TEST(ConvexQuad, Windings) {
  EXPECT_TRUE(IsConvexQuad({Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}}));
  EXPECT_TRUE(IsConvexQuad({Point2{0, 1}, Point2{1, 1}, Point2{1, 0}, Point2{0, 0}}));
  EXPECT_FALSE(IsConvexQuad({Point2{0, 0}, Point2{1, 1}, Point2{1, 0}, Point2{0, 1}}));
  EXPECT_FALSE(IsConvexQuad({Point2{0, 0}, Point2{4, 0}, Point2{1, 1}, Point2{0, 4}}));
}

}  // namespace
}  // namespace woftkit
