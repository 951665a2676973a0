#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "woftkit/estimators.h"
#include "woftkit/geometry.h"

namespace woftkit {

// Sensitivities of the weighted-LSq solution with respect to the per-pair
// weights. Column i of d_h_d_w is d(h11 ... h32)/d(w_i) of the canonical
// homography returned by SolveWeightedLsq.
struct SolveGradients {
  Homography homography;
  Eigen::Matrix<double, 8, Eigen::Dynamic> d_h_d_w;
  Eigen::VectorXd d_loss_d_w;  // empty unless a loss was attached
  double loss = 0.0;
};

// Implicit differentiation of the weighted normal equations
// (A^T W A) h = A^T W b at the QR solution; one factorization serves every
// right-hand side. Throws whatever SolveWeightedLsq throws.
SolveGradients GradSolutionWrtWeights(const CorrespondenceSet& c);

// Adds the chain rule through ReprojectionLoss(h, h_gt, eval_points). Points
// with exactly zero projection error contribute a zero subgradient.
SolveGradients GradLossWrtWeights(const CorrespondenceSet& c, const Homography& h_gt,
                                  std::span<const Point2> eval_points);

// Jacobian of the canonical pixel-space parameters with respect to the
// parameters hn of the solve in normalized coordinates.
Eigen::Matrix<double, 8, 8> DenormalizationJacobian(const detail::Normalization& n,
                                                    const Eigen::Matrix<double, 8, 1>& hn);

// Finite-difference check of the two gradients above.
struct GradCheckInstance {
  CorrespondenceSet set;  // weighted
  Homography h_gt;
  std::vector<Point2> eval_points;
};

// Correspondences of a random homography on a 640x480 frame: N in [8, 200]
// (or `pairs` when nonzero), outlier fraction in [0, 0.4], noise sigma in
// [0, 2] px, weights in [0.2, 0.9].
GradCheckInstance MakeGradCheckInstance(std::uint64_t seed, std::size_t pairs = 0);

struct GradCheckResult {
  bool skipped = false;
  std::string reason;  // why it was skipped
  double max_rel_error_h = 0.0;
  double max_rel_error_loss = 0.0;
  double max_rel_error() const { return std::max(max_rel_error_h, max_rel_error_loss); }
};

// |a - f| / max(|a|, |f|), or |a - f| / floor when both are below floor.
double RelativeError(double analytic, double numeric, double floor = 1e-6);

// Richardson-extrapolated central differences (steps h and h/2) on every
// weight. Relative errors use a floor of 1e-6 * max(1, |value|) of the
// differentiated quantity. Instances the estimator rejects come back skipped with the reason.
GradCheckResult CheckGradients(const GradCheckInstance& instance, double step = 2e-3);

}  // namespace woftkit
