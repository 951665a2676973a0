#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "woftkit/eval.h"
#include "woftkit/flow.h"
#include "woftkit/sequence.h"
#include "woftkit/synth.h"
#include "woftkit/tracker.h"

namespace woftkit {

// How the synthetic flow of a suite is corrupted.
struct FlowProfile {
  ContaminationSpec contamination{};  // rng_seed is derived per sequence
  double reliable_motion = 0.0;
  // Bursts: frames whose global flow is garbage while local flow drifts.
  int bursts = 0;
  int burst_min_len = 4;
  int burst_max_len = 8;
  double bias_min = 1.0;
  double bias_max = 6.0;
};

FlowProfile CleanFlow();
// 20% flow outliers, noisy inliers, unreliable large motion and bursts.
FlowProfile ContaminatedFlow();

// A seeded family of procedural sequences with matching synthetic-flow
// settings. Frames depend only on the seed and the sequence fields, so suites
// differing only in flow share their frames.
struct SuiteSpec {
  std::string name = "clean";
  int sequences = 20;
  int length = 501;
  int width = 320;
  int height = 240;
  double motion_smoothness = 0.35;
  PairSpec degradation{};
  FlowProfile flow{};
  std::uint64_t seed = 1;
};

SuiteSpec CleanSuite(std::uint64_t seed = 1);
SuiteSpec ContaminatedSuite(std::uint64_t seed = 1);

struct SuiteSequence {
  SequenceRecord record;
  SyntheticFlowOptions flow;
};

SuiteSequence BuildSuiteSequence(const SuiteSpec& spec, int index);
SyntheticFlowOptions SuiteFlowOptions(const SuiteSpec& spec, const FlowProfile& profile, int index);

enum class FlowSource { kSynthetic, kLucasKanade };

struct RunSpec {
  std::string label;
  TrackerConfig tracker;
  bool fb_weights = true;  // forward-backward weights, otherwise uniform
  FlowSource flow = FlowSource::kSynthetic;
  // Replaces the suite's flow profile for this run.
  std::optional<FlowProfile> flow_profile;
};

// Weighted estimators get forward-backward weights, the others uniform ones.
RunSpec MakeRunSpec(EstimatorChoice estimator, PreWarpMode mode, std::uint64_t seed = 0);

struct RunResult {
  RunSpec spec;
  std::vector<EvalReport> per_sequence;
  std::vector<std::vector<FrameResult>> traces;  // only when kept
  EvalReport aggregate;
  double mean_p5 = 0.0;
  double mean_p15 = 0.0;
  double seconds = 0.0;             // tracking and scoring
  double generation_seconds = 0.0;  // building the suite, shared by all runs
};

struct RunOptions {
  int jobs = 1;
  bool keep_traces = false;
  // Called after each finished sequence (from worker threads, serialized).
  std::function<void(int sequence, const std::string& label, const EvalReport&)> on_sequence;
};

// Each sequence is generated once, tracked under every run spec, scored and
// dropped, so memory stays bounded by jobs sequences.
std::vector<RunResult> RunSuite(const SuiteSpec& suite, const std::vector<RunSpec>& runs,
                                const RunOptions& options = {});

// The 4 estimators x 3 pre-warp modes cross product.
std::vector<RunSpec> AblationRuns(std::uint64_t seed = 0);

// "estimator,prewarp,weights,P@5,P@15,seconds" rows.
std::string AblationCsv(const std::vector<RunResult>& results);

struct OrderingCheck {
  std::string description;
  double lhs = 0.0;
  double rhs = 0.0;
  bool passed = false;
};

// Mode ordering controlled > always > never under weighted LSq and
// weighted > plain LSq within each mode, each by at least margin.
std::vector<OrderingCheck> CheckAblationOrdering(const std::vector<RunResult>& results,
                                                 double margin = 0.01);

int JobsFromEnvironment(int fallback);

}  // namespace woftkit
