#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "woftkit/geometry.h"

namespace woftkit {

struct Correspondence {
  Point2 source;  // p
  Point2 target;  // p'
};

// Paired points with optional per-pair weights in [0, 1]. An empty weight
// vector means "unweighted".
struct CorrespondenceSet {
  std::vector<Correspondence> pairs;
  std::vector<double> weights;

  std::size_t size() const { return pairs.size(); }
  bool has_weights() const { return !weights.empty(); }
  void Add(const Point2& p, const Point2& p_prime) { pairs.push_back({p, p_prime}); }
  void Add(const Point2& p, const Point2& p_prime, double w) {
    pairs.push_back({p, p_prime});
    weights.push_back(w);
  }

  // Throws kInvalidArgument if weights are present with the wrong length, or
  // outside [0, 1], or if any coordinate is non-finite.
  void Validate() const;
};

// Pairs with weight above this count towards the effective support.
inline constexpr double kWeightFloor = 1e-6;

enum class Conditioning { kNone, kHartley };

// The 2N x 8 non-homogeneous DLT system A~ h~ = b (h33 fixed to 1). Rows 2i
// and 2i+1 belong to pair i.
struct ConstraintSystem {
  Eigen::Matrix<double, Eigen::Dynamic, 8> a_tilde;
  Eigen::VectorXd b;
};

ConstraintSystem BuildSystem(const CorrespondenceSet& c);

struct EstimatorReport {
  Homography homography;
  std::vector<bool> inlier_mask;
  double inlier_ratio = 0.0;
  std::vector<double> residuals;  // transfer error per pair, pixels
  int iterations = 1;             // IRLS iterations performed
  int hypotheses = 0;             // RANSAC hypotheses scored
  bool converged = true;
};

struct InlierStats {
  std::vector<bool> mask;
  double ratio = 0.0;
};

// ||warp(h, p_i) - p'_i|| per pair. Pairs whose source maps to infinity get
// +inf.
std::vector<double> TransferErrors(const CorrespondenceSet& c, const Homography& h);

// Inliers are pairs with transfer error <= threshold (inclusive).
InlierStats ComputeInlierStats(const CorrespondenceSet& c, const Homography& h,
                               double threshold);

inline constexpr double kDefaultInlierThreshold = 5.0;

// Plain least squares via Householder QR and a triangular solve. Any weights
// stored in c are ignored.
EstimatorReport SolveLsq(const CorrespondenceSet& c,
                         Conditioning conditioning = Conditioning::kHartley,
                         double report_threshold = kDefaultInlierThreshold);

// Each pair's two rows and right-hand sides are scaled by sqrt(w_i) before the
// QR solve. Requires weights; throws kInsufficientSupport when fewer than four
// pairs have weight above kWeightFloor.
EstimatorReport SolveWeightedLsq(const CorrespondenceSet& c,
                                 Conditioning conditioning = Conditioning::kHartley,
                                 double report_threshold = kDefaultInlierThreshold);

struct IrlsOptions {
  double delta = 5.0;  // Huber threshold, pixels
  int max_iters = 20;
  double tol = 1e-9;   // on the relative change of the parameter vector
};

// Iteratively reweighted LSq for the Huber loss; robust multipliers are
// multiplied into the input weights (uniform when c has none).
EstimatorReport SolveIrlsHuber(const CorrespondenceSet& c, const IrlsOptions& options = {},
                               double report_threshold = kDefaultInlierThreshold);

struct RansacOptions {
  double threshold = 5.0;
  int max_hypotheses = 1000;
  double confidence = 0.999;
  std::uint64_t seed = 0;
};

// Hypothesize-and-verify over minimal 4-pair samples, refit by SolveLsq on the
// best support. Enumerates every sample when C(N, 4) <= max_hypotheses.
EstimatorReport SolveRansac(const CorrespondenceSet& c, const RansacOptions& options = {});

namespace detail {

// Similarity transforms mapping support points to zero centroid and mean
// distance sqrt(2). Identity for Conditioning::kNone.
struct Normalization {
  Matrix3 source = Matrix3::Identity();
  Matrix3 target = Matrix3::Identity();
};

Normalization ComputeNormalization(const CorrespondenceSet& c, std::span<const double> weights,
                                   Conditioning conditioning);

// System of Eq.-(1) rows built from normalized coordinates.
ConstraintSystem BuildNormalizedSystem(const CorrespondenceSet& c, const Normalization& n);

struct WeightedSolution {
  Homography homography;
  Normalization normalization;
  Eigen::Matrix<double, 8, 1> normalized_params;
  Eigen::Matrix<double, 8, 8> r;  // upper-triangular factor of sqrt(W) A~
  ConstraintSystem system;        // normalized, unweighted
};

// Shared QR path behind every estimator. `weights` must have one entry per
// pair.
WeightedSolution SolveWeighted(const CorrespondenceSet& c, std::span<const double> weights,
                               Conditioning conditioning);

}  // namespace detail

}  // namespace woftkit
