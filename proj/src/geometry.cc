#include "woftkit/geometry.h"

#include <cmath>

#include <Eigen/Dense>

#include "woftkit/error.h"

namespace woftkit {

Homography Homography::FromMatrix(const Matrix3& m) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::kDegenerateResult, "non-finite homography entry");
  }
  const double max_abs = m.cwiseAbs().maxCoeff();
  if (max_abs == 0.0 || std::abs(m(2, 2)) <= kMinBottomRightRatio * max_abs) {
    throw Error(ErrorCode::kDegenerateResult,
                "bottom-right element vanishes; not representable with h33 = 1");
  }
  const Matrix3 canonical = m / m(2, 2);
  if (std::abs(canonical.determinant()) <= kMinDeterminant) {
    throw Error(ErrorCode::kDegenerateResult, "singular homography");
  }
  return Homography(canonical);
}

Homography Homography::FromParameters(const HomographyParams& h) {
  Matrix3 m;
  m << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return FromMatrix(m);
}

Homography Homography::Translation(double tx, double ty) {
  Matrix3 m = Matrix3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return Homography(m);
}

Homography Homography::Scaling(double sx, double sy) {
  Matrix3 m = Matrix3::Identity();
  m(0, 0) = sx;
  m(1, 1) = sy;
  return FromMatrix(m);
}

HomographyParams Homography::parameters() const {
  HomographyParams h;
  h << m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2), m_(2, 0),
      m_(2, 1);
  return h;
}

Point2 WarpPoint(const Homography& h, const Point2& p) {
  const Matrix3& m = h.matrix();
  const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
  if (!(std::abs(w) > 1e-12)) {
    throw Error(ErrorCode::kPointAtInfinity, "point maps to the line at infinity");
  }
  return {(m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w,
          (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w};
}

Homography Compose(const Homography& a, const Homography& b) {
  return Homography::FromMatrix(a.matrix() * b.matrix());
}

Homography Invert(const Homography& h) {
  const Matrix3& m = h.matrix();
  const double det = m.determinant();
  if (!(std::abs(det) > Homography::kMinDeterminant)) {
    throw Error(ErrorCode::kDegenerateResult, "cannot invert singular homography");
  }
  return Homography::FromMatrix(m.inverse());
}

Homography ScaleConjugate(const Homography& h, double s) {
  if (s == 1.0) return h;
  Matrix3 scale = Matrix3::Identity();
  scale(0, 0) = s;
  scale(1, 1) = s;
  Matrix3 inv_scale = Matrix3::Identity();
  inv_scale(0, 0) = 1.0 / s;
  inv_scale(1, 1) = 1.0 / s;
  return Homography::FromMatrix(scale * h.matrix() * inv_scale);
}

Homography FourPointHomography(const std::array<Point2, 4>& src,
                               const std::array<Point2, 4>& dst) {
  // Condition both quads to zero mean / unit spread before the 8x8 solve.
  auto conditioner = [](const std::array<Point2, 4>& q) {
    double cx = 0, cy = 0;
    for (const auto& p : q) {
      cx += p.x / 4;
      cy += p.y / 4;
    }
    double spread = 0;
    for (const auto& p : q) spread += std::hypot(p.x - cx, p.y - cy) / 4;
    if (!(spread > 0)) spread = 1;
    const double s = std::sqrt(2.0) / spread;
    Matrix3 t;
    t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
    return t;
  };
  const Matrix3 ts = conditioner(src);
  const Matrix3 td = conditioner(dst);
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const Eigen::Vector3d p = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d q = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    const double x = p.x(), y = p.y(), u = q.x(), v = q.y();
    a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(a);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kDegenerateResult, "degenerate four-point configuration");
  }
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Matrix3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return Homography::FromMatrix(td.inverse() * hn * ts);
}

bool IsConvexQuad(const std::array<Point2, 4>& quad) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Point2& a = quad[i];
    const Point2& b = quad[(i + 1) % 4];
    const Point2& c = quad[(i + 2) % 4];
    const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (cross == 0.0) return false;
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0) {
      sign = s;
    } else if (s != sign) {
      return false;
    }
  }
  return true;
}

}  // namespace woftkit
