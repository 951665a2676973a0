#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace woftkit {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using Matrix3 = Eigen::Matrix3d;
using HomographyParams = Eigen::Matrix<double, 8, 1>;

// Invertible projective map between pixel coordinate frames. Always stored in
// canonical form with the bottom-right element equal to one, matching the
// h33 = 1 parametrization used by the estimators.
class Homography {
 public:
  static constexpr double kMinBottomRightRatio = 1e-9;
  static constexpr double kMinDeterminant = 1e-12;

  Homography() : m_(Matrix3::Identity()) {}

  // Throws Error(kDegenerateResult) if m(2,2) vanishes relative to the
  // largest entry or the canonical matrix is singular.
  static Homography FromMatrix(const Matrix3& m);
  // Parameters h11 h12 h13 h21 h22 h23 h31 h32 (row-major, h33 = 1).
  static Homography FromParameters(const HomographyParams& h);
  static Homography Translation(double tx, double ty);
  static Homography Scaling(double sx, double sy);

  const Matrix3& matrix() const { return m_; }
  double operator()(int row, int col) const { return m_(row, col); }
  HomographyParams parameters() const;

  bool operator==(const Homography& other) const { return m_ == other.m_; }

 private:
  explicit Homography(const Matrix3& canonical) : m_(canonical) {}

  Matrix3 m_;
};

// Projects p and dehomogenizes; throws Error(kPointAtInfinity) when the third
// homogeneous coordinate is below 1e-12 in magnitude.
Point2 WarpPoint(const Homography& h, const Point2& p);

// Matrix product a * b (apply b first, then a).
Homography Compose(const Homography& a, const Homography& b);

Homography Invert(const Homography& h);

// S * h * S^-1 with S = diag(s, s, 1): moves a homography estimated on an
// s-fold downscaled grid to the full-resolution grid.
Homography ScaleConjugate(const Homography& h, double s);

// Exact homography taking src[i] to dst[i]; throws kDegenerateResult on
// collinear configurations.
Homography FourPointHomography(const std::array<Point2, 4>& src,
                               const std::array<Point2, 4>& dst);

// True iff the quadrilateral a-b-c-d is strictly convex (either winding).
bool IsConvexQuad(const std::array<Point2, 4>& quad);

inline double Distance(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace woftkit
