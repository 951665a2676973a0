// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "woftkit/autodiff.h"
#include "woftkit/error.h"
#include "woftkit/estimators.h"
#include "woftkit/eval.h"
#include "woftkit/experiments.h"
#include "woftkit/flow.h"
#include "woftkit/synth.h"
#include "woftkit/tracker.h"

using namespace woftkit;

namespace {

// Tolerances.
constexpr double kExactRecoveryPx = 1e-6;
constexpr double kExactRecoverySeconds = 10;
constexpr double kOracleParamNorm = 1e-9;
constexpr double kFbSigma = 2.0;
constexpr double kFbMedianInlierPx = 1.0;
constexpr double kFbMeanOutlierWeight = 0.05;
constexpr double kSuccessPx = 5.0;  // also the IRLS delta
constexpr double kRansacSlack = 0.02;
constexpr double kIrlsMedianChangePx = 0.1;
constexpr double kGradTolerance = 1e-4;
constexpr double kGradSeconds = 30;
constexpr double kCleanP5 = 1.0;
constexpr double kContaminatedP5 = 0.9;
constexpr double kContaminatedP15 = 0.95;
constexpr double kTrackerSeconds = 300;
constexpr double kOrderingMargin = 0.01;
constexpr double kDownscaleSlack = 0.05;

constexpr int kW = 640, kH = 480;
constexpr int kInstances = 100;
constexpr std::size_t kSamples = 500;

using Clock = std::chrono::steady_clock;
double Since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;
std::map<int, std::string> lines;

void Report(int id, const char* name, bool pass, const std::string& detail) {
  char head[96];
  std::snprintf(head, sizeof(head), "%s criterion %2d  %-28s ", pass ? "PASS" : "FAIL", id, name);
  lines[id] = head + detail;
  std::printf("%s\n", lines[id].c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string Fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const std::array<Point2, 4> kCorners = {Point2{0, 0}, Point2{kW - 1, 0}, Point2{kW - 1, kH - 1},
                                        Point2{0, kH - 1}};

// ---------------------------------------------------------------------------

void ExactRecovery() {
  const auto t0 = Clock::now();
  const Mask all(kW, kH, true);
  double worst = 0;
  for (int k = 0; k < kInstances; ++k) {
    Rng rng(DeriveSeed(101, {static_cast<std::uint64_t>(k)}));
    const Homography h = RandomHomography(kW, kH, 0.2, rng);
    const FlowField f = SyntheticFlow(h, kW, kH, {}).field;
    const auto s = FlowToCorrespondences(f, all, kW, kH, kSamples, k);
    const Homography est = SolveLsq(s.set).homography;
    // transfer error against the generating map, on the pairs and the corners
    for (const auto& p : s.set.pairs) worst = std::max(worst, Distance(WarpPoint(est, p.source), WarpPoint(h, p.source)));
    for (const Point2& c : kCorners) worst = std::max(worst, Distance(WarpPoint(est, c), WarpPoint(h, c)));
  }
  const double secs = Since(t0);
  Report(1, "exact recovery", worst < kExactRecoveryPx && secs < kExactRecoverySeconds,
         Fmt("max transfer error %.2e px (< %.0e), %.1f s (< %.0f s)", worst, kExactRecoveryPx, secs,
             kExactRecoverySeconds));
}

// Dense contaminated flow of a random homography, both directions, sampled
// like the tracker does.
struct Instance {
  Homography h;
  CorrespondenceSet set;  // weights: forward-backward
  std::vector<bool> outlier;
};

Instance MakeInstance(int k) {
  const auto seed = static_cast<std::uint64_t>(k);
  Rng rng(DeriveSeed(202, {seed}));
  Instance in;
  in.h = RandomHomography(kW, kH, 0.2, rng);
  const ContaminationSpec fwd_spec{0.5, 0.4, 50.0, DeriveSeed(203, {seed})};
  const ContaminationSpec bwd_spec{0.5, 0.4, 50.0, DeriveSeed(204, {seed})};
  const LabeledFlow fwd = SyntheticFlow(in.h, kW, kH, fwd_spec);
  const LabeledFlow bwd = SyntheticFlow(Invert(in.h), kW, kH, bwd_spec);
  const WeightField w = WeightsFbConsistency(fwd.field, bwd.field, kFbSigma);
  const auto s = FlowToCorrespondences(fwd.field, Mask(kW, kH, true), kW, kH, kSamples,
                                       DeriveSeed(205, {seed}), &w);
  in.set = s.set;
  for (std::size_t px : s.pixels) in.outlier.push_back(fwd.outlier[px] != 0);
  return in;
}

double MeanInlierTransfer(const Instance& in, const Homography& est) {
  double sum = 0;
  int n = 0;
  for (std::size_t i = 0; i < in.set.size(); ++i) {
    if (in.outlier[i]) continue;
    const Point2 p = in.set.pairs[i].source;
    sum += Distance(WarpPoint(est, p), WarpPoint(in.h, p));
    ++n;
  }
  return sum / n;
}

void RobustEstimation(const std::vector<Instance>& instances) {
  // 2: oracle 0/1 weights against LSq on the inliers alone
  double worst_oracle = 0;
  double outlier_share = 0;
  for (const Instance& in : instances) {
    CorrespondenceSet w{in.set.pairs, {}};
    CorrespondenceSet inl;
    for (std::size_t i = 0; i < in.set.size(); ++i) {
      w.weights.push_back(in.outlier[i] ? 0.0 : 1.0);
      if (!in.outlier[i]) inl.Add(in.set.pairs[i].source, in.set.pairs[i].target);
      outlier_share += in.outlier[i];
    }
    const Homography a = SolveWeightedLsq(w).homography;
    const Homography b = SolveLsq(inl).homography;
    worst_oracle = std::max(worst_oracle, (a.parameters() - b.parameters()).norm());
  }
  outlier_share /= double(instances.size() * kSamples);
  Report(2, "outlier suppression", worst_oracle < kOracleParamNorm,
         Fmt("max parameter distance %.2e (< %.0e), outlier share %.3f", worst_oracle, kOracleParamNorm,
             outlier_share));

  // 3: forward-backward weights
  std::vector<double> inlier_err;
  double out_w = 0;
  int out_n = 0;
  std::vector<Homography> weighted;
  for (const Instance& in : instances) {
    const Homography est = SolveWeightedLsq(in.set).homography;
    weighted.push_back(est);
    for (std::size_t i = 0; i < in.set.size(); ++i) {
      const Point2 p = in.set.pairs[i].source;
      if (in.outlier[i]) {
        out_w += in.set.weights[i];
        ++out_n;
      } else {
        inlier_err.push_back(Distance(WarpPoint(est, p), WarpPoint(in.h, p)));
      }
    }
  }
  const double med = Median(inlier_err), mean_w = out_w / out_n;
  Report(3, "forward-backward weights", med < kFbMedianInlierPx && mean_w < kFbMeanOutlierWeight,
         Fmt("median inlier transfer error %.3f px (< %.1f), mean outlier weight %.4f (< %.2f)", med,
             kFbMedianInlierPx, mean_w, kFbMeanOutlierWeight));

  // 5: IRLS-Huber on top of the forward-backward weights
  std::vector<double> change;
  for (std::size_t k = 0; k < instances.size(); ++k) {
    const Instance& in = instances[k];
    IrlsOptions o;
    o.delta = kSuccessPx;
    const Homography irls = SolveIrlsHuber(in.set, o).homography;
    change.push_back(std::abs(MeanInlierTransfer(in, irls) - MeanInlierTransfer(in, weighted[k])));
  }
  const double med_change = Median(change);
  Report(5, "IRLS equivalence", med_change < kIrlsMedianChangePx,
         Fmt("median per-instance change %.4f px (< %.1f), max %.4f px", med_change, kIrlsMedianChangePx,
             *std::max_element(change.begin(), change.end())));
}

void Gradients() {
  const auto t0 = Clock::now();
  double worst = 0;
  int skipped = 0;
  for (int k = 0; k < kInstances; ++k) {
    const GradCheckResult r = CheckGradients(MakeGradCheckInstance(DeriveSeed(0, {static_cast<std::uint64_t>(k)})));
    if (r.skipped) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, r.max_rel_error());
  }
  const double secs = Since(t0);
  Report(6, "gradient correctness", worst <= kGradTolerance && skipped == 0 && secs < kGradSeconds,
         Fmt("max relative error %.2e (<= %.0e), %d skipped, %.1f s (< %.0f s)", worst, kGradTolerance,
             skipped, secs, kGradSeconds));
}

void Metrics() {
  bool ok = true;
  std::string detail;
  const std::array<Point2, 4> ref = {Point2{12, 7}, Point2{300, 20}, Point2{280, 222}, Point2{5, 199}};
  Rng rng(7);
  const Homography h = RandomHomography(kW, kH, 0.2, rng);
  ok &= AlignmentError(h, h, ref) == 0.0;
  ok &= AlignmentError(Homography::Translation(3, 4), Homography(), ref) == 5.0;
  const std::vector<Point2> pts(ref.begin(), ref.end());
  ok &= ReprojectionLoss(Homography::Translation(3, 4), Homography(), pts) == 5.0;
  ok &= ReprojectionLoss(Homography::Translation(-6, 8), Homography(), pts) == 10.0;
  ok &= ReprojectionLoss(Homography::Translation(0.5, 0), Homography(), pts) == 0.5;
  const std::vector<double> errs = {1, 2, 3, 10, 5};
  const std::vector<double> thr = {5, 15, 4.999999};
  const PrecisionTable p = PrecisionAt(errs, thr);
  ok &= p.at(5) == 0.8 && p.at(15) == 1.0 && p.at(4.999999) == 0.6;
  bool empty_throws = false;
  try {
    PrecisionAt(std::vector<double>{}, thr);
  } catch (const Error& e) {
    empty_throws = e.code() == ErrorCode::kEmptyInput;
  }
  ok &= empty_throws;
  Report(7, "metric identities", ok, ok ? "closed forms exact, thresholds inclusive" : "identity mismatch");
}

// --- scripted state machine scenarios ---------------------------------------

class ScriptedFlow final : public FlowProvider {
 public:
  using Fn = std::function<Point2(const FlowQuery&, int, int)>;
  explicit ScriptedFlow(Fn fn) : fn_(std::move(fn)) {}
  FlowField Compute(const FlowQuery& q) const override {
    const ImageBuffer* grid = q.backward ? q.target : q.source;
    FlowField f(grid->width(), grid->height());
    for (int y = 0; y < f.height; ++y) {
      for (int x = 0; x < f.width; ++x) {
        const Point2 d = fn_(q, x, y);
        const std::size_t i = f.index(x, y);
        f.u[i] = d.x;
        f.v[i] = d.y;
        f.valid[i] = 1;
      }
    }
    return f;
  }
  std::string name() const override { return "scripted"; }
  bool reads_pixels() const override { return false; }

 private:
  Fn fn_;
};

class MagnitudeWeights final : public WeightProvider {
 public:
  bool needs_backward() const override { return false; }
  WeightField Compute(const FlowField& f, const FlowField*) const override {
    WeightField w{f.width, f.height, std::vector<float>(f.size())};
    for (std::size_t i = 0; i < f.size(); ++i) w.w[i] = std::hypot(f.u[i], f.v[i]) > 40 ? 0.f : 1.f;
    return w;
  }
  std::string name() const override { return "magnitude"; }
};

struct ScenarioOutcome {
  bool ok = true;
  std::vector<Homography> poses;
};

ScenarioOutcome StateMachineScenarios() {
  ScenarioOutcome out;
  constexpr int w = 80, h = 60;
  const ImageBuffer img(w, h, 1, 0.5f);
  const MagnitudeWeights mw;
  TrackerConfig cfg;
  cfg.rng_seed = 5;

  // strict inequality at 20%: 100 lattice pixels, n exact vectors
  Mask lattice(w, h);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) lattice.set(5 + 3 * x, 5 + 3 * y, true);
  for (int n : {19, 20}) {
    const ScriptedFlow flow([&lattice, n](const FlowQuery& q, int x, int y) {
      int rank = 0;
      for (int i = 0; i < y * w + x; ++i) rank += lattice.data[i];
      const bool in = lattice.at(x, y) && rank < n;
      return q.leg == FlowLeg::kLocal || in ? Point2{0, 0} : Point2{45, 0};
    });
    TrackerState st = InitTracker(img, lattice, cfg);
    const FrameResult r = Step(st, img, flow, mw);
    out.ok &= r.inlier_ratio == n / 100.0;
    out.ok &= (r.status == TrackStatus::kLost) == (n == 19);
    out.poses.push_back(r.pose);
  }

  // reset only after more than max_lost_frames lost frames; fallback poses
  Mask block(w, h);
  for (int y = 10; y < 50; ++y)
    for (int x = 10; x < 70; ++x) block.set(x, y, true);
  const ScriptedFlow flow([](const FlowQuery& q, int, int) {
    if (q.leg == FlowLeg::kLocal) return q.backward ? Point2{-1, 0.5} : Point2{1, -0.5};
    return q.target_frame <= 3 ? Point2{0.25 * q.target_frame, 0} : Point2{60, 0};
  });
  TrackerState st = InitTracker(img, block, cfg);
  Homography prev;
  for (int t = 1; t <= 3 + cfg.max_lost_frames + 1; ++t) {
    const FrameResult r = Step(st, img, flow, mw);
    out.poses.push_back(r.pose);
    const bool lost_phase = t > 3;
    out.ok &= (r.status == TrackStatus::kLost) == lost_phase;
    if (lost_phase) {
      const Homography expected = Compose(Homography::Translation(1, -0.5), prev);
      out.ok &= r.used_local_fallback;
      out.ok &= (r.pose.matrix() - expected.matrix()).cwiseAbs().maxCoeff() < 1e-9;
    }
    if (t == 3 + cfg.max_lost_frames) out.ok &= st.last_good_index == 3;
    prev = r.pose;
  }
  out.ok &= st.last_good_index == 0 && st.last_good_pose == Homography();

  // exactly 500 correspondences from a 2400-pixel mask
  const ScriptedFlow zero([](const FlowQuery&, int, int) { return Point2{0, 0}; });
  const UniformWeightProvider uw;
  TrackerState big = InitTracker(img, block, cfg);
  const FrameResult r = Step(big, img, zero, uw);
  out.ok &= r.correspondences == 500;
  return out;
}

void StateMachine() {
  const ScenarioOutcome a = StateMachineScenarios();
  const ScenarioOutcome b = StateMachineScenarios();
  const bool deterministic = a.poses == b.poses;
  Report(10, "state-machine rules", a.ok && deterministic,
         Fmt("scenarios %s, repeat %s", a.ok ? "ok" : "violated", deterministic ? "bit-identical" : "differs"));
}

// --- tracker suites ----------------------------------------------------------

void TrackerSuites() {
  const SuiteSpec suite = CleanSuite(1);
  const FlowProfile dirty = ContaminatedFlow();

  RunSpec clean = MakeRunSpec(EstimatorChoice::kWeightedLsq, PreWarpMode::kControlled);
  clean.label = "clean weighted controlled";
  RunSpec clean_s3 = clean;
  clean_s3.tracker.downscale_factor = 3;
  clean_s3.label = "clean weighted controlled s=3";
  std::vector<RunSpec> runs = {clean, clean_s3};
  for (auto e : {EstimatorChoice::kWeightedLsq, EstimatorChoice::kLsq}) {
    for (auto m : {PreWarpMode::kControlled, PreWarpMode::kAlways, PreWarpMode::kNever}) {
      RunSpec r = MakeRunSpec(e, m);
      r.flow_profile = dirty;
      r.label = "contaminated " + r.label;
      runs.push_back(r);
    }
  }
  RunSpec ransac = MakeRunSpec(EstimatorChoice::kRansac, PreWarpMode::kControlled);
  ransac.flow_profile = dirty;
  ransac.label = "contaminated " + ransac.label;
  runs.push_back(ransac);
  RunOptions opts;
  opts.jobs = JobsFromEnvironment(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  std::printf("     tracking %d sequences x %d frames at %dx%d, %zu configurations, %d jobs\n",
              suite.sequences, suite.length, suite.width, suite.height, runs.size(), opts.jobs);
  std::fflush(stdout);
  const auto results = RunSuite(suite, runs, opts);
  for (const auto& r : results) {
    std::printf("     %-40s P@5 %.4f  P@15 %.4f  %.1f s\n", r.spec.label.c_str(), r.mean_p5, r.mean_p15,
                r.seconds);
  }

  // 8: clean and contaminated controlled weighted runs share the generated frames
  const RunResult& c = results[0];
  const RunResult& d = results[2];
  const double secs = c.generation_seconds + c.seconds + d.seconds;
  Report(8, "tracker end-to-end",
         c.mean_p5 >= kCleanP5 && d.mean_p5 >= kContaminatedP5 && d.mean_p15 >= kContaminatedP15 &&
             secs < kTrackerSeconds,
         Fmt("clean P@5 %.4f, contaminated P@5 %.4f P@15 %.4f, %.0f s (< %.0f s)", c.mean_p5, d.mean_p5,
             d.mean_p15, secs, kTrackerSeconds));

  // 9: ordering on the contaminated runs
  const std::vector<RunResult> ablation(results.begin() + 2, results.begin() + 8);
  const auto checks = CheckAblationOrdering(ablation, kOrderingMargin);
  bool all = !checks.empty();
  std::string detail;
  for (const auto& ch : checks) {
    all &= ch.passed;
    if (!ch.passed) detail += " [" + ch.description + Fmt(": %.3f vs %.3f]", ch.lhs, ch.rhs);
  }
  Report(9, "ablation ordering", all,
         Fmt("%zu strict checks with margin %.2f", checks.size(), kOrderingMargin) + detail);

  // 4: weighted LSq against RANSAC, per-frame success within 5 px
  const RunResult& r = results[8];
  Report(4, "RANSAC parity", d.mean_p5 >= r.mean_p5 - kRansacSlack,
         Fmt("weighted P@5 %.4f vs RANSAC P@5 %.4f (slack %.2f)", d.mean_p5, r.mean_p5, kRansacSlack));

  // 11: downscaled variant on the clean suite
  const double gap = std::abs(c.mean_p5 - results[1].mean_p5);
  Report(11, "downscale variant", gap <= kDownscaleSlack,
         Fmt("s=1 P@5 %.4f, s=3 P@5 %.4f, gap %.4f (<= %.2f)", c.mean_p5, results[1].mean_p5, gap,
             kDownscaleSlack));
}

}  // namespace

int main() {
  try {
    ExactRecovery();
    std::vector<Instance> instances;
    for (int k = 0; k < kInstances; ++k) instances.push_back(MakeInstance(k));
    RobustEstimation(instances);
    Gradients();
    Metrics();
    StateMachine();
    TrackerSuites();
  } catch (const std::exception& e) {
    std::printf("FAIL unexpected error: %s\n", e.what());
    return 1;
  }
  std::printf("\nsummary\n");
  for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
