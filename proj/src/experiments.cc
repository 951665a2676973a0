#include "woftkit/experiments.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "woftkit/error.h"
#include "woftkit/io.h"
#include "woftkit/rng.h"

namespace woftkit {

FlowProfile CleanFlow() { return {}; }

FlowProfile ContaminatedFlow() {
  FlowProfile p;
  p.contamination.noise_sigma = 0.5;
  p.contamination.outlier_fraction = 0.2;
  p.contamination.outlier_magnitude = 40.0;
  p.reliable_motion = 12.0;
  p.bursts = 3;
  return p;
}

SuiteSpec CleanSuite(std::uint64_t seed) {
  SuiteSpec s;
  s.name = "clean";
  s.seed = seed;
  s.flow = CleanFlow();
  return s;
}

SuiteSpec ContaminatedSuite(std::uint64_t seed) {
  SuiteSpec s;
  s.name = "contaminated";
  s.seed = seed;
  s.flow = ContaminatedFlow();
  return s;
}

SyntheticFlowOptions SuiteFlowOptions(const SuiteSpec& spec, const FlowProfile& profile, int index) {
  const auto idx = static_cast<std::uint64_t>(index);
  SyntheticFlowOptions out;
  out.contamination = profile.contamination;
  out.contamination.rng_seed = DeriveSeed(spec.seed, {idx, 3});
  out.reliable_motion = profile.reliable_motion;
  if (profile.bursts > 0) {
    // Bursts spread over equal slots so they never overlap.
    Rng rng(DeriveSeed(spec.seed, {idx, 4}));
    const int slot = (spec.length - 20) / profile.bursts;
    for (int b = 0; b < profile.bursts; ++b) {
      const int len = profile.burst_min_len +
                      static_cast<int>(rng.UniformIndex(profile.burst_max_len - profile.burst_min_len + 1));
      const int start = 20 + b * slot + static_cast<int>(rng.UniformIndex(std::max(1, slot - len)));
      const double bias = rng.Uniform(profile.bias_min, profile.bias_max);
      out.events.push_back({CorruptionEvent::Kind::kGlobalOutliers, start, start + len - 1, 0.0});
      out.events.push_back({CorruptionEvent::Kind::kLocalBias, start, start + len - 1, bias});
    }
  }
  return out;
}

SuiteSequence BuildSuiteSequence(const SuiteSpec& spec, int index) {
  const auto idx = static_cast<std::uint64_t>(index);
  SuiteSequence out;
  const ImageBuffer texture = ProceduralTexture(spec.width, spec.height, DeriveSeed(spec.seed, {idx, 1}));
  SequenceSpec ss;
  ss.length = spec.length;
  ss.motion_smoothness = spec.motion_smoothness;
  ss.degradation = spec.degradation;
  ss.degradation.rng_seed = DeriveSeed(spec.seed, {idx, 2});
  out.record = MakeSequence(texture, ss);
  char name[48];
  std::snprintf(name, sizeof(name), "%s_%03d", spec.name.c_str(), index);
  out.record.name = name;
  out.flow = SuiteFlowOptions(spec, spec.flow, index);
  return out;
}

RunSpec MakeRunSpec(EstimatorChoice estimator, PreWarpMode mode, std::uint64_t seed) {
  RunSpec r;
  r.tracker.estimator = estimator;
  r.tracker.pre_warp_mode = mode;
  r.tracker.rng_seed = seed;
  r.fb_weights = estimator == EstimatorChoice::kWeightedLsq || estimator == EstimatorChoice::kIrls;
  r.label = ToString(estimator) + "/" + ToString(mode);
  return r;
}

std::vector<RunSpec> AblationRuns(std::uint64_t seed) {
  std::vector<RunSpec> runs;
  for (auto e : {EstimatorChoice::kLsq, EstimatorChoice::kWeightedLsq, EstimatorChoice::kIrls,
                 EstimatorChoice::kRansac}) {
    for (auto m : {PreWarpMode::kNever, PreWarpMode::kAlways, PreWarpMode::kControlled}) {
      runs.push_back(MakeRunSpec(e, m, seed));
    }
  }
  return runs;
}

std::vector<RunResult> RunSuite(const SuiteSpec& suite, const std::vector<RunSpec>& runs,
                                const RunOptions& options) {
  if (suite.sequences < 1) throw Error(ErrorCode::kInvalidArgument, "suite needs at least one sequence");
  for (const auto& r : runs) r.tracker.Validate();
  std::vector<RunResult> results(runs.size());
  for (std::size_t i = 0; i < runs.size(); ++i) {
    results[i].spec = runs[i];
    results[i].per_sequence.resize(suite.sequences);
    if (options.keep_traces) results[i].traces.resize(suite.sequences);
  }
  std::vector<double> seconds(runs.size() * suite.sequences, 0.0);
  std::vector<double> generation(suite.sequences, 0.0);

  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (int k; (k = next++) < suite.sequences;) {
      try {
        const auto g0 = std::chrono::steady_clock::now();
        const SuiteSequence seq = BuildSuiteSequence(suite, k);
        generation[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - g0).count();
        const LucasKanadeFlowProvider lk;
        const UniformWeightProvider uniform;
        const FbConsistencyWeightProvider fb;
        for (std::size_t i = 0; i < runs.size(); ++i) {
          const RunSpec& r = runs[i];
          const SyntheticFlowProvider synthetic(
              seq.record.gt_poses,
              r.flow_profile ? SuiteFlowOptions(suite, *r.flow_profile, k) : seq.flow);
          const FlowProvider& flow =
              r.flow == FlowSource::kSynthetic ? static_cast<const FlowProvider&>(synthetic) : lk;
          const WeightProvider& weights =
              r.fb_weights ? static_cast<const WeightProvider&>(fb) : uniform;
          const auto t0 = std::chrono::steady_clock::now();
          auto trace = TrackFrames(seq.record.frames, seq.record.template_mask, r.tracker, flow, weights);
          std::vector<Homography> poses;
          poses.reserve(trace.size());
          for (const auto& f : trace) poses.push_back(f.pose);
          EvalReport rep = EvaluateSequence(seq.record, poses);
          seconds[i * suite.sequences + k] =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          rep.name = seq.record.name;
          StageTimings sum;
          for (const auto& f : trace) {
            sum.prewarp_ms += f.timings.prewarp_ms;
            sum.global_ms += f.timings.global_ms;
            sum.local_ms += f.timings.local_ms;
          }
          const double n = static_cast<double>(trace.size());
          rep.runtime = {{"prewarp", sum.prewarp_ms, sum.prewarp_ms / n},
                         {"global", sum.global_ms, sum.global_ms / n},
                         {"local_fallback", sum.local_ms, sum.local_ms / n}};
          std::lock_guard lock(mu);
          if (options.on_sequence) options.on_sequence(k, r.label, rep);
          results[i].per_sequence[k] = std::move(rep);
          if (options.keep_traces) results[i].traces[k] = std::move(trace);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        next = suite.sequences;
      }
    }
  };
  const int jobs = std::clamp(options.jobs, 1, suite.sequences);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t i = 0; i < runs.size(); ++i) {
    RunResult& r = results[i];
    r.aggregate = AggregateReports(r.per_sequence);
    r.aggregate.name = suite.name + ":" + r.spec.label;
    for (const auto& rep : r.per_sequence) {
      r.mean_p5 += rep.p_at.at(5.0) / suite.sequences;
      r.mean_p15 += rep.p_at.at(15.0) / suite.sequences;
    }
    for (int k = 0; k < suite.sequences; ++k) {
      r.seconds += seconds[i * suite.sequences + k];
      r.generation_seconds += generation[k];
    }
  }
  return results;
}

std::string AblationCsv(const std::vector<RunResult>& results) {
  std::string out = "estimator,prewarp,weights,P@5,P@15,seconds\n";
  for (const auto& r : results) {
    out += ToString(r.spec.tracker.estimator) + "," + ToString(r.spec.tracker.pre_warp_mode) + "," +
           (r.spec.fb_weights ? "fb" : "uniform") + "," + FormatDouble(r.mean_p5) + "," +
           FormatDouble(r.mean_p15) + "," + FormatDouble(r.seconds) + "\n";
  }
  return out;
}

std::vector<OrderingCheck> CheckAblationOrdering(const std::vector<RunResult>& results,
                                                 double margin) {
  auto find = [&](EstimatorChoice e, PreWarpMode m) -> const RunResult* {
    for (const auto& r : results) {
      if (r.spec.tracker.estimator == e && r.spec.tracker.pre_warp_mode == m) return &r;
    }
    return nullptr;
  };
  std::vector<OrderingCheck> checks;
  auto add = [&](const std::string& what, const RunResult* a, const RunResult* b) {
    if (!a || !b) return;
    checks.push_back({what, a->mean_p5, b->mean_p5, a->mean_p5 >= b->mean_p5 + margin});
  };
  const auto w = EstimatorChoice::kWeightedLsq;
  add("weighted_lsq: controlled > always", find(w, PreWarpMode::kControlled), find(w, PreWarpMode::kAlways));
  add("weighted_lsq: always > never", find(w, PreWarpMode::kAlways), find(w, PreWarpMode::kNever));
  for (auto m : {PreWarpMode::kNever, PreWarpMode::kAlways, PreWarpMode::kControlled}) {
    add(ToString(m) + ": weighted_lsq > lsq", find(w, m), find(EstimatorChoice::kLsq, m));
  }
  return checks;
}

int JobsFromEnvironment(int fallback) {
  if (const char* env = std::getenv("WOFTKIT_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return fallback;
}

}  // namespace woftkit
