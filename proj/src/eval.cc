#include "woftkit/eval.h"

#include <algorithm>
#include <cmath>

#include "woftkit/error.h"
#include "woftkit/io.h"

namespace woftkit {

double AlignmentError(const Homography& h, const Homography& h_star,
                      const std::array<Point2, 4>& ref_points) {
  double sum = 0.0;
  for (const Point2& x : ref_points) {
    const Point2 a = WarpPoint(h_star, x);
    const Point2 b = WarpPoint(h, x);
    sum += (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
  }
  return std::sqrt(sum / 4.0);
}

double ReprojectionLoss(const Homography& h, const Homography& h_gt,
                        std::span<const Point2> points) {
  if (points.empty()) throw Error(ErrorCode::kEmptyInput, "no evaluation points");
  const Homography back = Compose(Invert(h), h_gt);
  double sum = 0.0;
  for (const Point2& p : points) sum += Distance(p, WarpPoint(back, p));
  return sum / static_cast<double>(points.size());
}

PrecisionTable PrecisionAt(std::span<const std::optional<double>> errors,
                           std::span<const double> thresholds) {
  std::vector<double> present;
  for (const auto& e : errors) {
    if (e) present.push_back(*e);
  }
  return PrecisionAt(std::span<const double>(present), thresholds);
}

PrecisionTable PrecisionAt(std::span<const double> errors, std::span<const double> thresholds) {
  if (errors.empty()) {
    throw Error(ErrorCode::kEmptyInput, "precision is undefined without scored frames");
  }
  PrecisionTable table;
  for (double t : thresholds) {
    const auto hits = std::count_if(errors.begin(), errors.end(), [t](double e) { return e <= t; });
    table[t] = static_cast<double>(hits) / static_cast<double>(errors.size());
  }
  return table;
}

std::vector<double> CurveThresholds() {
  std::vector<double> out;
  const int steps = static_cast<int>(std::lround(kCurveMax / kCurveStep));
  for (int i = 0; i <= steps; ++i) out.push_back(i * kCurveStep);
  return out;
}

namespace {

void FillSummary(EvalReport* report, std::span<const double> thresholds) {
  report->p_at = PrecisionAt(std::span<const std::optional<double>>(report->per_frame_e_al),
                             thresholds);
  const std::vector<double> ct = CurveThresholds();
  const PrecisionTable curve =
      PrecisionAt(std::span<const std::optional<double>>(report->per_frame_e_al), ct);
  report->curve.clear();
  for (const auto& [t, p] : curve) report->curve.push_back({t, p});
}

}  // namespace

EvalReport EvaluateSequence(const SequenceRecord& seq, std::span<const Homography> poses,
                            std::span<const double> thresholds) {
  if (poses.size() != seq.gt_poses.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                "got " + std::to_string(poses.size()) + " poses for " +
                    std::to_string(seq.gt_poses.size()) + " annotated frames");
  }
  const std::array<Point2, 4> ref = MaskBoundingQuad(seq.template_mask);
  EvalReport report;
  report.name = seq.name;
  report.per_frame_e_al.resize(poses.size());
  for (std::size_t t = 0; t < poses.size(); ++t) {
    if (!seq.HasGroundTruth(t)) continue;
    report.per_frame_e_al[t] = AlignmentError(poses[t], seq.gt_poses[t], ref);
  }
  FillSummary(&report, thresholds);
  return report;
}

EvalReport AggregateReports(std::span<const EvalReport> reports,
                            std::span<const double> thresholds) {
  EvalReport out;
  out.name = "aggregate";
  std::map<std::string, std::pair<double, double>> stages;  // total, count
  for (const auto& r : reports) {
    out.per_frame_e_al.insert(out.per_frame_e_al.end(), r.per_frame_e_al.begin(),
                              r.per_frame_e_al.end());
    for (const auto& s : r.runtime) {
      auto& acc = stages[s.stage];
      acc.first += s.total_ms;
      acc.second += s.mean_ms > 0 ? s.total_ms / s.mean_ms : 0;
    }
  }
  FillSummary(&out, thresholds);
  for (const auto& [name, acc] : stages) {
    out.runtime.push_back({name, acc.first, acc.second > 0 ? acc.first / acc.second : 0});
  }
  return out;
}

nlohmann::json ReportToJson(const EvalReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& e : report.per_frame_e_al) {
    frames.push_back(e ? nlohmann::json(*e) : nlohmann::json(nullptr));
  }
  j["per_frame_e_al"] = std::move(frames);
  nlohmann::json p = nlohmann::json::object();
  for (const auto& [t, v] : report.p_at) p["P@" + FormatDouble(t)] = v;
  j["precision"] = std::move(p);
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& c : report.curve) curve.push_back({{"threshold", c.threshold}, {"precision", c.precision}});
  j["curve"] = std::move(curve);
  nlohmann::json rt = nlohmann::json::array();
  for (const auto& s : report.runtime) {
    rt.push_back({{"stage", s.stage}, {"total_ms", s.total_ms}, {"mean_ms", s.mean_ms}});
  }
  j["runtime"] = std::move(rt);
  return j;
}

std::string CurveToCsv(const std::vector<CurvePoint>& curve) {
  std::string s = "threshold,precision\n";
  for (const auto& c : curve) s += FormatDouble(c.threshold) + "," + FormatDouble(c.precision) + "\n";
  return s;
}

}  // namespace woftkit
