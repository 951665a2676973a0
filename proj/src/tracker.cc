#include "woftkit/tracker.h"

#include <chrono>
#include <cstdio>

#include "woftkit/error.h"
#include "woftkit/io.h"
#include "woftkit/rng.h"

namespace woftkit {

std::string ToString(EstimatorChoice e) {
  switch (e) {
    case EstimatorChoice::kLsq: return "lsq";
    case EstimatorChoice::kWeightedLsq: return "weighted_lsq";
    case EstimatorChoice::kIrls: return "irls";
    case EstimatorChoice::kRansac: return "ransac";
  }
  return "?";
}

std::string ToString(PreWarpMode m) {
  switch (m) {
    case PreWarpMode::kNever: return "never";
    case PreWarpMode::kAlways: return "always";
    case PreWarpMode::kControlled: return "controlled";
  }
  return "?";
}

std::string ToString(TrackStatus s) { return s == TrackStatus::kTracking ? "tracking" : "lost"; }

EstimatorChoice ParseEstimator(const std::string& name) {
  for (auto e : {EstimatorChoice::kLsq, EstimatorChoice::kWeightedLsq, EstimatorChoice::kIrls,
                 EstimatorChoice::kRansac}) {
    if (ToString(e) == name) return e;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown estimator: " + name);
}

PreWarpMode ParsePreWarpMode(const std::string& name) {
  for (auto m : {PreWarpMode::kNever, PreWarpMode::kAlways, PreWarpMode::kControlled}) {
    if (ToString(m) == name) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown pre-warp mode: " + name);
}

TrackStatus ParseStatus(const std::string& name) {
  if (name == "tracking") return TrackStatus::kTracking;
  if (name == "lost") return TrackStatus::kLost;
  throw Error(ErrorCode::kInvalidArgument, "unknown status: " + name);
}

void TrackerConfig::Validate() const {
  if (!(inlier_threshold > 0)) throw Error(ErrorCode::kInvalidArgument, "inlier threshold must be > 0");
  if (!(lost_ratio > 0 && lost_ratio < 1)) throw Error(ErrorCode::kInvalidArgument, "lost ratio must be in (0, 1)");
  if (max_lost_frames < 0) throw Error(ErrorCode::kInvalidArgument, "max lost frames must be >= 0");
  if (max_correspondences < 4) throw Error(ErrorCode::kInvalidArgument, "need at least 4 correspondences");
  if (downscale_factor < 1) throw Error(ErrorCode::kInvalidArgument, "downscale factor must be >= 1");
}

namespace {

using Clock = std::chrono::steady_clock;

double Ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

bool HasNonCollinearSupport(const Mask& m) {
  // Needs 4 set pixels not all on one line.
  int count = 0;
  Point2 a, b;
  bool have_b = false;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      if (count == 0) {
        a = p;
      } else if (!have_b) {
        b = p;
        have_b = true;
      }
      ++count;
    }
  }
  if (count < 4) return false;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y)) continue;
      const double cross = (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
      if (cross != 0) return true;
    }
  }
  return false;
}

struct Estimate {
  bool ok = false;
  Homography h;
  double inlier_ratio = 0.0;
  std::size_t count = 0;
};

// Forward flow on the roi, subsample, then backward flow only where the
// weights read it.
Estimate EstimateFrom(const FlowProvider& flow, FlowQuery q, const Mask& mask,
                      const Mask* target_valid, const WeightProvider& weights,
                      const TrackerConfig& cfg, int scale, int frame, std::uint64_t leg) {
  Estimate out;
  q.roi = &mask;
  const FlowField fwd = flow.Compute(q);
  const auto sample = FlowToCorrespondences(fwd, mask, q.target->width(), q.target->height(),
                                            cfg.max_correspondences,
                                            DeriveSeed(cfg.rng_seed, {static_cast<std::uint64_t>(frame), leg}),
                                            nullptr, target_valid);
  CorrespondenceSet set = sample.set;
  if (weights.needs_backward()) {
    const Mask support = FlowSupport(fwd, sample.pixels);
    q.backward = true;
    q.roi = &support;
    const FlowField bwd = flow.Compute(q);
    set.weights = weights.ComputeAt(fwd, &bwd, sample.pixels);
  } else {
    set.weights = weights.ComputeAt(fwd, nullptr, sample.pixels);
  }
  out.count = set.size();
  const double threshold = cfg.inlier_threshold / scale;
  try {
    const CorrespondenceSet plain{set.pairs, {}};
    EstimatorReport r;
    switch (cfg.estimator) {
      case EstimatorChoice::kLsq:
        r = SolveLsq(plain, Conditioning::kHartley, threshold);
        break;
      case EstimatorChoice::kWeightedLsq:
        r = SolveWeightedLsq(set, Conditioning::kHartley, threshold);
        break;
      case EstimatorChoice::kIrls: {
        IrlsOptions o;
        o.delta = threshold;
        r = SolveIrlsHuber(set, o, threshold);
        break;
      }
      case EstimatorChoice::kRansac: {
        RansacOptions o;
        o.threshold = threshold;
        o.seed = DeriveSeed(cfg.rng_seed, {static_cast<std::uint64_t>(frame), leg, 0x5a});
        r = SolveRansac(plain, o);
        break;
      }
    }
    out.h = r.homography;
    out.inlier_ratio = ComputeInlierStats(set, out.h, threshold).ratio;
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

TrackerState InitTracker(const ImageBuffer& template_image, const Mask& mask,
                         const TrackerConfig& config) {
  config.Validate();
  if (mask.width != template_image.width() || mask.height != template_image.height()) {
    throw Error(ErrorCode::kImageSizeMismatch, "mask and template differ in size");
  }
  TrackerState st;
  st.config = config;
  st.scale = config.downscale_factor;
  st.full_width = template_image.width();
  st.full_height = template_image.height();
  if (st.scale > 1) {
    st.template_image = std::make_shared<const ImageBuffer>(Downscale(template_image, st.scale));
    st.mask = Downscale(mask, st.scale);
  } else {
    st.template_image = std::make_shared<const ImageBuffer>(template_image);
    st.mask = mask;
  }
  if (!HasNonCollinearSupport(st.mask)) {
    throw Error(ErrorCode::kEmptyMask, "mask needs at least 4 non-collinear pixels");
  }
  st.previous_frame = *st.template_image;
  return st;
}

FrameResult StepDownscaled(TrackerState& st, const ImageBuffer& frame, int s,
                           const FlowProvider& flow, const WeightProvider& weights) {
  if (s != st.scale) throw Error(ErrorCode::kInvalidArgument, "scale differs from the initialized one");
  if (frame.width() != st.full_width || frame.height() != st.full_height) {
    throw Error(ErrorCode::kFrameSizeMismatch, "frame size differs from the template");
  }
  const TrackerConfig& cfg = st.config;
  const int t = st.frame_index + 1;
  FrameResult res;
  res.frame_index = t;

  auto t0 = Clock::now();
  ImageBuffer small = s > 1 ? Downscale(frame, s) : frame;
  const int w = small.width(), h = small.height();

  const bool use_global = cfg.pre_warp_mode != PreWarpMode::kNever;
  Estimate global;
  Homography prewarp;
  if (use_global) {
    prewarp = cfg.pre_warp_mode == PreWarpMode::kControlled ? st.last_good_pose : st.last_output;
    const bool identity = prewarp == Homography();
    WarpedImage warped;
    if (identity) {
      warped.valid = Mask(w, h, true);
    } else if (flow.reads_pixels()) {
      warped = WarpImage(Invert(prewarp), small, w, h);
    } else {
      warped.valid = WarpValidity(Invert(prewarp), w, h, w, h);
    }
    // Providers that ignore pixels still get an image of the right size.
    const ImageBuffer& target = identity || !flow.reads_pixels() ? small : warped.image;
    auto t1 = Clock::now();
    res.timings.prewarp_ms = Ms(t0, t1);

    FlowQuery q;
    q.source = st.template_image.get();
    q.target = &target;
    q.source_frame = 0;
    q.target_frame = t;
    q.target_view = prewarp;
    q.leg = FlowLeg::kGlobal;
    q.scale = s;
    global = EstimateFrom(flow, q, st.mask, &warped.valid, weights, cfg, s, t, 0);
    res.timings.global_ms = Ms(t1, Clock::now());
    res.correspondences = global.count;
  }

  const bool tracking = use_global && global.ok && global.inlier_ratio >= cfg.lost_ratio;
  Homography pose;
  if (tracking) {
    pose = Compose(prewarp, global.h);
    st.last_good_index = t;
    st.last_good_pose = pose;
    st.lost_streak = 0;
    st.status = TrackStatus::kTracking;
    res.inlier_ratio = global.inlier_ratio;
  } else {
    auto t3 = Clock::now();
    FlowQuery q;
    q.source = &st.previous_frame;
    q.target = &small;
    q.source_frame = t - 1;
    q.target_frame = t;
    q.leg = FlowLeg::kLocal;
    q.scale = s;
    const Mask prev_mask =
        st.last_output == Homography() ? st.mask : WarpMask(st.last_output, st.mask, w, h);
    const Estimate local = EstimateFrom(flow, q, prev_mask, nullptr, weights, cfg, s, t, 1);
    res.timings.local_ms = Ms(t3, Clock::now());
    pose = local.ok ? Compose(local.h, st.last_output) : st.last_output;
    if (use_global) {
      res.used_local_fallback = true;
      res.inlier_ratio = global.inlier_ratio;
      st.status = TrackStatus::kLost;
      ++st.lost_streak;
      if (st.lost_streak > cfg.max_lost_frames) {
        st.last_good_index = 0;
        st.last_good_pose = Homography();
      }
    } else {
      // Local-only tracking: the local ratio decides the status.
      res.inlier_ratio = local.ok ? local.inlier_ratio : 0.0;
      res.correspondences = local.count;
      const bool ok = local.ok && local.inlier_ratio >= cfg.lost_ratio;
      st.status = ok ? TrackStatus::kTracking : TrackStatus::kLost;
      st.lost_streak = ok ? 0 : st.lost_streak + 1;
    }
  }

  st.last_output = pose;
  st.previous_frame = std::move(small);
  st.frame_index = t;
  res.status = st.status;
  res.pose = s > 1 ? ScaleConjugate(pose, s) : pose;
  return res;
}

FrameResult Step(TrackerState& state, const ImageBuffer& frame, const FlowProvider& flow,
                 const WeightProvider& weights) {
  return StepDownscaled(state, frame, state.scale, flow, weights);
}

std::vector<FrameResult> TrackFrames(const std::vector<ImageBuffer>& frames, const Mask& mask,
                                     const TrackerConfig& config, const FlowProvider& flow,
                                     const WeightProvider& weights) {
  if (frames.empty()) throw Error(ErrorCode::kEmptyInput, "no frames");
  TrackerState st = InitTracker(frames[0], mask, config);
  std::vector<FrameResult> out;
  out.reserve(frames.size());
  FrameResult first;
  first.inlier_ratio = 1.0;
  out.push_back(first);
  for (std::size_t t = 1; t < frames.size(); ++t) out.push_back(Step(st, frames[t], flow, weights));
  return out;
}

std::string FormatTraceLine(const FrameResult& r) {
  return std::to_string(r.frame_index) + " " + ToString(r.status) + " " + FormatDouble(r.inlier_ratio) +
         " " + FormatHomography(r.pose);
}

FrameResult ParseTraceLine(const std::string& line) {
  char status[32] = {};
  int index = 0, consumed = 0;
  if (std::sscanf(line.c_str(), "%d %31s%n", &index, status, &consumed) != 2) {
    throw Error(ErrorCode::kInvalidArgument, "bad trace line: " + line);
  }
  const std::vector<double> nums = ParseNumbers(line.substr(consumed));
  if (nums.size() != 10) throw Error(ErrorCode::kInvalidArgument, "bad trace line: " + line);
  FrameResult r;
  r.frame_index = index;
  r.status = ParseStatus(status);
  r.inlier_ratio = nums[0];
  r.pose = ParseHomography(std::vector<double>(nums.begin() + 1, nums.end()));
  return r;
}

}  // namespace woftkit
