#include "woftkit/estimators.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "woftkit/error.h"
#include "woftkit/rng.h"

namespace woftkit {

namespace {

// Smallest-to-largest |R_ii| ratio below which the system is rank deficient.
constexpr double kRankTolerance = 1e-10;

void FillRows(const Point2& p, const Point2& q, Eigen::Ref<Eigen::Matrix<double, 2, 8>> rows,
              double* b0, double* b1) {
  const double x = p.x, y = p.y, xp = q.x, yp = q.y;
  rows.row(0) << 0, 0, 0, -x, -y, -1, yp * x, yp * y;
  rows.row(1) << x, y, 1, 0, 0, 0, -xp * x, -xp * y;
  *b0 = -yp;
  *b1 = xp;
}

std::size_t EffectiveSupport(std::span<const double> weights) {
  return static_cast<std::size_t>(
      std::count_if(weights.begin(), weights.end(), [](double w) { return w > kWeightFloor; }));
}

Matrix3 HartleyTransform(const std::vector<Point2>& pts) {
  double cx = 0, cy = 0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Matrix3 t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

Point2 Apply(const Matrix3& t, const Point2& p) {
  // Similarity transforms only: no projective division needed.
  return {t(0, 0) * p.x + t(0, 2), t(1, 1) * p.y + t(1, 2)};
}

EstimatorReport MakeReport(const CorrespondenceSet& c, const Homography& h, double threshold) {
  EstimatorReport report;
  report.homography = h;
  report.residuals = TransferErrors(c, h);
  report.inlier_mask.resize(c.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    report.inlier_mask[i] = report.residuals[i] <= threshold;
    count += report.inlier_mask[i];
  }
  report.inlier_ratio = c.size() ? static_cast<double>(count) / c.size() : 0.0;
  return report;
}

void RequireMinimum(const CorrespondenceSet& c) {
  if (c.size() < 4) {
    throw Error(ErrorCode::kTooFewCorrespondences,
                "need at least 4 correspondences, got " + std::to_string(c.size()));
  }
}

}  // namespace

void CorrespondenceSet::Validate() const {
  if (!weights.empty() && weights.size() != pairs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "weight count does not match pair count");
  }
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "weights must lie in [0, 1]");
    }
  }
  for (const auto& pr : pairs) {
    if (!std::isfinite(pr.source.x) || !std::isfinite(pr.source.y) ||
        !std::isfinite(pr.target.x) || !std::isfinite(pr.target.y)) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite correspondence coordinate");
    }
  }
}

ConstraintSystem BuildSystem(const CorrespondenceSet& c) {
  RequireMinimum(c);
  return detail::BuildNormalizedSystem(c, detail::Normalization{});
}

std::vector<double> TransferErrors(const CorrespondenceSet& c, const Homography& h) {
  std::vector<double> out(c.size());
  const Matrix3& m = h.matrix();
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Point2& p = c.pairs[i].source;
    const double w = m(2, 0) * p.x + m(2, 1) * p.y + m(2, 2);
    if (!(std::abs(w) > 1e-12)) {
      out[i] = std::numeric_limits<double>::infinity();
      continue;
    }
    const double x = (m(0, 0) * p.x + m(0, 1) * p.y + m(0, 2)) / w;
    const double y = (m(1, 0) * p.x + m(1, 1) * p.y + m(1, 2)) / w;
    out[i] = std::hypot(x - c.pairs[i].target.x, y - c.pairs[i].target.y);
  }
  return out;
}

InlierStats ComputeInlierStats(const CorrespondenceSet& c, const Homography& h,
                               double threshold) {
  const std::vector<double> err = TransferErrors(c, h);
  InlierStats stats;
  stats.mask.resize(c.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    stats.mask[i] = err[i] <= threshold;
    count += stats.mask[i];
  }
  stats.ratio = c.size() ? static_cast<double>(count) / c.size() : 0.0;
  return stats;
}

namespace detail {

Normalization ComputeNormalization(const CorrespondenceSet& c, std::span<const double> weights,
                                   Conditioning conditioning) {
  Normalization n;
  if (conditioning == Conditioning::kNone) return n;
  std::vector<Point2> src, dst;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (weights[i] > kWeightFloor) {
      src.push_back(c.pairs[i].source);
      dst.push_back(c.pairs[i].target);
    }
  }
  if (src.empty()) return n;
  n.source = HartleyTransform(src);
  n.target = HartleyTransform(dst);
  return n;
}

ConstraintSystem BuildNormalizedSystem(const CorrespondenceSet& c, const Normalization& n) {
  const Eigen::Index rows = 2 * static_cast<Eigen::Index>(c.size());
  ConstraintSystem sys{Eigen::Matrix<double, Eigen::Dynamic, 8>(rows, 8), Eigen::VectorXd(rows)};
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Eigen::Index r = 2 * static_cast<Eigen::Index>(i);
    FillRows(Apply(n.source, c.pairs[i].source), Apply(n.target, c.pairs[i].target),
             sys.a_tilde.middleRows<2>(r), &sys.b(r), &sys.b(r + 1));
  }
  return sys;
}

WeightedSolution SolveWeighted(const CorrespondenceSet& c, std::span<const double> weights,
                               Conditioning conditioning) {
  WeightedSolution sol;
  sol.normalization = ComputeNormalization(c, weights, conditioning);
  sol.system = BuildNormalizedSystem(c, sol.normalization);

  Eigen::Matrix<double, Eigen::Dynamic, 8> a = sol.system.a_tilde;
  Eigen::VectorXd b = sol.system.b;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double s = std::sqrt(weights[i]);
    const Eigen::Index r = 2 * static_cast<Eigen::Index>(i);
    a.middleRows<2>(r) *= s;
    b.segment<2>(r) *= s;
  }

  Eigen::HouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 8>> qr(a);
  sol.r = qr.matrixQR().topRows<8>().triangularView<Eigen::Upper>();
  const Eigen::VectorXd qtb = qr.householderQ().adjoint() * b;
  const Eigen::Array<double, 8, 1> diag = sol.r.diagonal().cwiseAbs();
  if (!(diag.minCoeff() > kRankTolerance * diag.maxCoeff())) {
    throw Error(ErrorCode::kDegenerateConfiguration, "constraint system is rank deficient");
  }
  sol.normalized_params =
      sol.r.triangularView<Eigen::Upper>().solve(qtb.head<8>());

  Matrix3 hn;
  const auto& h = sol.normalized_params;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  try {
    sol.homography = Homography::FromMatrix(sol.normalization.target.inverse() * hn *
                                            sol.normalization.source);
  } catch (const Error&) {
    throw Error(ErrorCode::kDegenerateConfiguration, "solution is not a valid homography");
  }
  return sol;
}

}  // namespace detail

EstimatorReport SolveLsq(const CorrespondenceSet& c, Conditioning conditioning,
                         double report_threshold) {
  RequireMinimum(c);
  c.Validate();
  const std::vector<double> ones(c.size(), 1.0);
  const auto sol = detail::SolveWeighted(c, ones, conditioning);
  return MakeReport(c, sol.homography, report_threshold);
}

EstimatorReport SolveWeightedLsq(const CorrespondenceSet& c, Conditioning conditioning,
                                 double report_threshold) {
  RequireMinimum(c);
  c.Validate();
  if (!c.has_weights()) {
    throw Error(ErrorCode::kInvalidArgument, "weighted solve requires weights");
  }
  if (EffectiveSupport(c.weights) < 4) {
    throw Error(ErrorCode::kInsufficientSupport,
                "fewer than 4 correspondences with weight above the floor");
  }
  const auto sol = detail::SolveWeighted(c, c.weights, conditioning);
  return MakeReport(c, sol.homography, report_threshold);
}

EstimatorReport SolveIrlsHuber(const CorrespondenceSet& c, const IrlsOptions& options,
                               double report_threshold) {
  RequireMinimum(c);
  c.Validate();
  if (!(options.delta > 0) || options.max_iters < 1) {
    throw Error(ErrorCode::kInvalidArgument, "IRLS needs delta > 0 and max_iters >= 1");
  }
  const std::vector<double> base =
      c.has_weights() ? c.weights : std::vector<double>(c.size(), 1.0);
  std::vector<double> w = base;
  Homography current;
  HomographyParams previous = HomographyParams::Zero();
  int it = 0;
  bool converged = false;
  while (it < options.max_iters) {
    if (EffectiveSupport(w) < 4) {
      throw Error(ErrorCode::kInsufficientSupport,
                  "fewer than 4 correspondences with weight above the floor");
    }
    current = detail::SolveWeighted(c, w, Conditioning::kHartley).homography;
    ++it;
    const HomographyParams params = current.parameters();
    if (it > 1 &&
        (params - previous).norm() <= options.tol * std::max(1.0, params.norm())) {
      converged = true;
      break;
    }
    previous = params;
    const std::vector<double> r = TransferErrors(c, current);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double mult = r[i] <= options.delta ? 1.0 : options.delta / r[i];
      w[i] = base[i] * mult;
    }
  }
  EstimatorReport report = MakeReport(c, current, report_threshold);
  report.iterations = it;
  report.converged = converged;
  return report;
}

namespace {

bool NearlyCollinear(const Point2& a, const Point2& b, const Point2& c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max({(b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y),
                                 (c.x - a.x) * (c.x - a.x) + (c.y - a.y) * (c.y - a.y),
                                 (c.x - b.x) * (c.x - b.x) + (c.y - b.y) * (c.y - b.y)});
  return !(std::abs(cross) > 1e-6 * scale);
}

bool DegenerateSample(const CorrespondenceSet& c, const std::array<std::size_t, 4>& idx) {
  static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& t : kTriples) {
    const auto& a = c.pairs[idx[t[0]]];
    const auto& b = c.pairs[idx[t[1]]];
    const auto& d = c.pairs[idx[t[2]]];
    if (NearlyCollinear(a.source, b.source, d.source) ||
        NearlyCollinear(a.target, b.target, d.target)) {
      return true;
    }
  }
  return false;
}

double Choose4(std::size_t n) {
  const double d = static_cast<double>(n);
  return d * (d - 1) * (d - 2) * (d - 3) / 24.0;
}

// Advances idx to the next 4-combination of [0, n) in lexicographic order.
bool NextCombination(std::array<std::size_t, 4>& idx, std::size_t n) {
  for (int i = 3; i >= 0; --i) {
    if (idx[i] < n - 4 + static_cast<std::size_t>(i)) {
      ++idx[i];
      for (int j = i + 1; j < 4; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

EstimatorReport SolveRansac(const CorrespondenceSet& c, const RansacOptions& options) {
  RequireMinimum(c);
  c.Validate();
  if (!(options.threshold > 0) || options.max_hypotheses < 1 ||
      !(options.confidence > 0 && options.confidence < 1)) {
    throw Error(ErrorCode::kInvalidArgument, "bad RANSAC options");
  }
  const std::size_t n = c.size();
  const bool exhaustive = Choose4(n) <= options.max_hypotheses;

  bool have_best = false;
  Homography best;
  std::size_t best_count = 0;
  double best_sum = std::numeric_limits<double>::infinity();
  int scored = 0;
  double required = std::numeric_limits<double>::infinity();

  auto score = [&](const std::array<std::size_t, 4>& idx) {
    std::array<Point2, 4> src, dst;
    for (int k = 0; k < 4; ++k) {
      src[k] = c.pairs[idx[k]].source;
      dst[k] = c.pairs[idx[k]].target;
    }
    Homography h;
    try {
      h = FourPointHomography(src, dst);
    } catch (const Error&) {
      return;
    }
    ++scored;
    const std::vector<double> err = TransferErrors(c, h);
    std::size_t count = 0;
    double sum = 0;
    for (double e : err) {
      if (e <= options.threshold) {
        ++count;
        sum += e;
      }
    }
    if (!have_best || count > best_count || (count == best_count && sum < best_sum)) {
      have_best = true;
      best = h;
      best_count = count;
      best_sum = sum;
      const double eps = static_cast<double>(count) / n;
      const double p_good = std::pow(eps, 4);
      if (p_good >= 1.0) {
        required = 0;
      } else if (p_good > 0) {
        required = std::log(1 - options.confidence) / std::log1p(-p_good);
      }
    }
  };

  if (exhaustive) {
    std::array<std::size_t, 4> idx = {0, 1, 2, 3};
    do {
      if (!DegenerateSample(c, idx)) score(idx);
    } while (NextCombination(idx, n));
  } else {
    Rng rng(options.seed);
    const long long draw_cap = 10LL * options.max_hypotheses;
    for (long long draws = 0; draws < draw_cap && scored < options.max_hypotheses; ++draws) {
      if (scored >= required) break;
      std::array<std::size_t, 4> idx;
      for (int k = 0; k < 4; ++k) {
        bool fresh;
        do {
          idx[k] = rng.UniformIndex(n);
          fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
        } while (!fresh);
      }
      if (DegenerateSample(c, idx)) continue;
      score(idx);
    }
  }
  if (!have_best) {
    throw Error(ErrorCode::kNoValidHypothesis, "every minimal sample was degenerate");
  }

  Homography final_h = best;
  const InlierStats support = ComputeInlierStats(c, best, options.threshold);
  CorrespondenceSet inliers;
  for (std::size_t i = 0; i < n; ++i) {
    if (support.mask[i]) inliers.pairs.push_back(c.pairs[i]);
  }
  if (inliers.size() >= 4) {
    try {
      final_h = SolveLsq(inliers).homography;
    } catch (const Error&) {
      // Keep the minimal-sample hypothesis when the refit is degenerate.
    }
  }
  EstimatorReport report = MakeReport(c, final_h, options.threshold);
  report.hypotheses = scored;
  return report;
}

}  // namespace woftkit
