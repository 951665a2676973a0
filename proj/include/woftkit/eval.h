#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "woftkit/geometry.h"
#include "woftkit/sequence.h"

namespace woftkit {

// Root-mean-square distance between the projections of four reference points
// under h and h_star.
double AlignmentError(const Homography& h, const Homography& h_star,
                      const std::array<Point2, 4>& ref_points);

// Mean L1 (Euclidean) distance between p and h^-1 h_gt p over the points.
double ReprojectionLoss(const Homography& h, const Homography& h_gt,
                        std::span<const Point2> points);

using PrecisionTable = std::map<double, double>;

// Fraction of frames with error <= threshold. Missing entries (nullopt) are
// left out of the denominator. Throws kEmptyInput when nothing is left.
PrecisionTable PrecisionAt(std::span<const std::optional<double>> errors,
                           std::span<const double> thresholds);
PrecisionTable PrecisionAt(std::span<const double> errors, std::span<const double> thresholds);

struct CurvePoint {
  double threshold = 0.0;
  double precision = 0.0;
};

struct StageRuntime {
  std::string stage;
  double total_ms = 0.0;
  double mean_ms = 0.0;
};

struct EvalReport {
  std::string name;
  std::vector<std::optional<double>> per_frame_e_al;
  PrecisionTable p_at;
  std::vector<CurvePoint> curve;
  std::vector<StageRuntime> runtime;
};

inline constexpr double kCurveStep = 0.5;
inline constexpr double kCurveMax = 20.0;

inline constexpr std::array<double, 2> kDefaultThresholds = {5.0, 15.0};

// Thresholds 0, 0.5, ..., 20.
std::vector<double> CurveThresholds();

// Scores poses against seq.gt_poses using the template mask's bounding-quad
// corners as reference points. Throws kLengthMismatch when the pose count
// differs from the ground-truth count.
EvalReport EvaluateSequence(const SequenceRecord& seq, std::span<const Homography> poses,
                            std::span<const double> thresholds = kDefaultThresholds);

// Pools every per-frame error of several reports into one.
EvalReport AggregateReports(std::span<const EvalReport> reports,
                            std::span<const double> thresholds = kDefaultThresholds);

nlohmann::json ReportToJson(const EvalReport& report);

// "threshold,precision" table with '.' decimals.
std::string CurveToCsv(const std::vector<CurvePoint>& curve);

}  // namespace woftkit
