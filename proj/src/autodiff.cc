#include "woftkit/autodiff.h"

#include <cmath>

#include <Eigen/Dense>

#include "woftkit/error.h"
#include "woftkit/eval.h"
#include "woftkit/rng.h"
#include "woftkit/synth.h"

namespace woftkit {

Eigen::Matrix<double, 8, 8> DenormalizationJacobian(const detail::Normalization& n,
                                                    const Eigen::Matrix<double, 8, 1>& hn) {
  Matrix3 m;
  m << hn(0), hn(1), hn(2), hn(3), hn(4), hn(5), hn(6), hn(7), 1.0;
  const Matrix3 t_inv = n.target.inverse();
  const Matrix3 raw = t_inv * m * n.source;
  const double h22 = raw(2, 2);
  Eigen::Matrix<double, 8, 8> jac;
  for (int k = 0; k < 8; ++k) {
    Matrix3 e = Matrix3::Zero();
    e(k / 3, k % 3) = 1.0;
    const Matrix3 d_raw = t_inv * e * n.source;
    // Quotient rule for raw / raw(2, 2).
    const Matrix3 d_canon = d_raw / h22 - raw * (d_raw(2, 2) / (h22 * h22));
    for (int j = 0; j < 8; ++j) jac(j, k) = d_canon(j / 3, j % 3);
  }
  return jac;
}

SolveGradients GradSolutionWrtWeights(const CorrespondenceSet& c) {
  // Forward pass doubles as the validation of c.
  SolveWeightedLsq(c);
  const auto sol = detail::SolveWeighted(c, c.weights, Conditioning::kHartley);
  const auto n = static_cast<Eigen::Index>(c.size());

  // d hn / d w_i = M^-1 A_i^T (b_i - A_i hn), with M = R^T R.
  const Eigen::VectorXd residual = sol.system.b - sol.system.a_tilde * sol.normalized_params;
  Eigen::Matrix<double, 8, Eigen::Dynamic> rhs(8, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs.col(i) = sol.system.a_tilde.middleRows<2>(2 * i).transpose() * residual.segment<2>(2 * i);
  }
  const auto r = sol.r.triangularView<Eigen::Upper>();
  r.transpose().solveInPlace(rhs);
  r.solveInPlace(rhs);

  SolveGradients out;
  out.homography = sol.homography;
  out.d_h_d_w = DenormalizationJacobian(sol.normalization, sol.normalized_params) * rhs;
  return out;
}

SolveGradients GradLossWrtWeights(const CorrespondenceSet& c, const Homography& h_gt,
                                  std::span<const Point2> eval_points) {
  if (eval_points.empty()) throw Error(ErrorCode::kEmptyInput, "no evaluation points");
  SolveGradients out = GradSolutionWrtWeights(c);
  const Matrix3& h = out.homography.matrix();
  const Matrix3 h_inv = h.inverse();
  const Matrix3 back = h_inv * h_gt.matrix();

  // dL/dH = (1/N) sum H^-T g u^T, where u = H^-1 H_gt p and g pulls the unit
  // residual direction back through the dehomogenization.
  Matrix3 d_loss_d_h = Matrix3::Zero();
  double loss = 0.0;
  for (const Point2& p : eval_points) {
    const Eigen::Vector3d u = back * Eigen::Vector3d(p.x, p.y, 1.0);
    const double px = u(0) / u(2);
    const double py = u(1) / u(2);
    const double ex = p.x - px;
    const double ey = p.y - py;
    const double norm = std::hypot(ex, ey);
    loss += norm;
    if (norm == 0.0) continue;
    // d||e|| = -(e/||e||)^T J_pi du and du = -H^-1 dH u, so the signs cancel.
    const double gx = ex / norm, gy = ey / norm;
    const Eigen::Vector3d g(gx / u(2), gy / u(2), -(gx * u(0) + gy * u(1)) / (u(2) * u(2)));
    d_loss_d_h += (h_inv.transpose() * g) * u.transpose();
  }
  const double inv_n = 1.0 / static_cast<double>(eval_points.size());
  d_loss_d_h *= inv_n;
  out.loss = loss * inv_n;

  Eigen::Matrix<double, 8, 1> d_loss_d_params;
  for (int k = 0; k < 8; ++k) d_loss_d_params(k) = d_loss_d_h(k / 3, k % 3);
  out.d_loss_d_w = out.d_h_d_w.transpose() * d_loss_d_params;
  return out;
}

GradCheckInstance MakeGradCheckInstance(std::uint64_t seed, std::size_t pairs) {
  Rng rng(seed);
  GradCheckInstance inst;
  inst.h_gt = RandomHomography(640, 480, 0.2, rng);
  const std::size_t n = pairs > 0 ? pairs : 8 + rng.UniformIndex(193);
  const double outlier_fraction = rng.Uniform(0.0, 0.4);
  const double sigma = rng.Uniform(0.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p{rng.Uniform(0, 639), rng.Uniform(0, 479)};
    Point2 q = WarpPoint(inst.h_gt, p);
    const bool outlier = rng.Uniform() < outlier_fraction;
    q.x += outlier ? rng.Uniform(-30, 30) : rng.Normal(0, sigma);
    q.y += outlier ? rng.Uniform(-30, 30) : rng.Normal(0, sigma);
    inst.set.Add(p, q, rng.Uniform(0.2, 0.9));
  }
  inst.eval_points = {{0, 0}, {639, 0}, {639, 479}, {0, 479}};
  return inst;
}

double RelativeError(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult CheckGradients(const GradCheckInstance& instance, double step) {
  GradCheckResult out;
  try {
    const SolveGradients g = GradLossWrtWeights(instance.set, instance.h_gt, instance.eval_points);
    // Central differences at h and h/2 combined by Richardson extrapolation.
    // The stencil may step just outside [0, 1], so the unchecked solve is used.
    CorrespondenceSet c = instance.set;
    auto solve_at = [&](std::size_t i, double w) {
      const double w0 = c.weights[i];
      c.weights[i] = w;
      const Homography h = detail::SolveWeighted(c, c.weights, Conditioning::kHartley).homography;
      c.weights[i] = w0;
      Eigen::Matrix<double, 9, 1> v;
      v.head<8>() = h.parameters();
      v(8) = ReprojectionLoss(h, instance.h_gt, instance.eval_points);
      return v;
    };
    const HomographyParams params = g.homography.parameters();
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double w0 = c.weights[i];
      const Eigen::Matrix<double, 9, 1> d1 = (solve_at(i, w0 + step) - solve_at(i, w0 - step)) / (2 * step);
      const Eigen::Matrix<double, 9, 1> d2 =
          (solve_at(i, w0 + step / 2) - solve_at(i, w0 - step / 2)) / step;
      const Eigen::Matrix<double, 9, 1> fd = (4 * d2 - d1) / 3;
      const auto col = static_cast<Eigen::Index>(i);
      // Floors scale with the quantity differentiated (h13 is in pixels, h31 in
      // 1/pixels).
      for (int k = 0; k < 8; ++k) {
        const double floor = 1e-6 * std::max(1.0, std::abs(params(k)));
        out.max_rel_error_h = std::max(out.max_rel_error_h, RelativeError(g.d_h_d_w(k, col), fd(k), floor));
      }
      out.max_rel_error_loss = std::max(out.max_rel_error_loss,
                                        RelativeError(g.d_loss_d_w(col), fd(8), 1e-6 * std::max(1.0, g.loss)));
    }
  } catch (const Error& e) {
    out = {};
    out.skipped = true;
    out.reason = e.what();
  }
  return out;
}

}  // namespace woftkit
