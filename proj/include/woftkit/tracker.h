#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "woftkit/estimators.h"
#include "woftkit/flow.h"
#include "woftkit/geometry.h"
#include "woftkit/image.h"

namespace woftkit {

enum class EstimatorChoice { kLsq, kWeightedLsq, kIrls, kRansac };
enum class PreWarpMode { kNever, kAlways, kControlled };
enum class TrackStatus { kTracking, kLost };

std::string ToString(EstimatorChoice e);
std::string ToString(PreWarpMode m);
std::string ToString(TrackStatus s);
// Throw kInvalidArgument on unknown names.
EstimatorChoice ParseEstimator(const std::string& name);
PreWarpMode ParsePreWarpMode(const std::string& name);
TrackStatus ParseStatus(const std::string& name);

struct TrackerConfig {
  double inlier_threshold = 5.0;  // pixels at full resolution
  double lost_ratio = 0.20;
  int max_lost_frames = 10;
  std::size_t max_correspondences = 500;
  int downscale_factor = 1;
  EstimatorChoice estimator = EstimatorChoice::kWeightedLsq;
  PreWarpMode pre_warp_mode = PreWarpMode::kControlled;
  std::uint64_t rng_seed = 0;

  void Validate() const;  // throws kInvalidArgument
};

// Poses inside the state live in working (downscaled) coordinates.
struct TrackerState {
  TrackerConfig config;
  int scale = 1;
  int full_width = 0;
  int full_height = 0;
  std::shared_ptr<const ImageBuffer> template_image;
  Mask mask;
  ImageBuffer previous_frame;
  int frame_index = 0;  // index of the last frame seen
  int last_good_index = 0;
  Homography last_good_pose;
  int lost_streak = 0;
  Homography last_output;
  TrackStatus status = TrackStatus::kTracking;
};

struct StageTimings {
  double prewarp_ms = 0.0;
  double global_ms = 0.0;  // global flow, weights and estimation
  double local_ms = 0.0;
};

struct FrameResult {
  int frame_index = 0;
  Homography pose;  // H_{0->t}, full resolution
  TrackStatus status = TrackStatus::kTracking;
  double inlier_ratio = 0.0;
  bool used_local_fallback = false;
  // Which correspondences were estimated on, for inspection.
  std::size_t correspondences = 0;
  StageTimings timings;
};

// Throws kEmptyMask when the mask has fewer than four non-collinear pixels,
// kImageSizeMismatch when mask and template differ in size.
TrackerState InitTracker(const ImageBuffer& template_image, const Mask& mask,
                         const TrackerConfig& config);

// Processes the next frame. Estimation failures never escape: they count as a
// lost frame and, if the fallback fails too, the previous pose is held.
// Throws kFrameSizeMismatch.
FrameResult Step(TrackerState& state, const ImageBuffer& frame, const FlowProvider& flow,
                 const WeightProvider& weights);

// Step on s-fold downscaled images; s must equal the factor the state was
// initialized with. The returned pose is S H S^-1 with S = diag(s, s, 1).
FrameResult StepDownscaled(TrackerState& state, const ImageBuffer& frame, int s,
                           const FlowProvider& flow, const WeightProvider& weights);

// Frame 0 initializes the tracker and reports the identity pose.
std::vector<FrameResult> TrackFrames(const std::vector<ImageBuffer>& frames, const Mask& mask,
                                     const TrackerConfig& config, const FlowProvider& flow,
                                     const WeightProvider& weights);

// "frame_index status inlier_ratio h11 ... h33"
std::string FormatTraceLine(const FrameResult& r);
FrameResult ParseTraceLine(const std::string& line);

}  // namespace woftkit
