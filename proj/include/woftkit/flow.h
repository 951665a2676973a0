#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "woftkit/estimators.h"
#include "woftkit/geometry.h"
#include "woftkit/image.h"

namespace woftkit {

// Dense displacement field: pixel (x, y) of the source image moves to
// (x + u, y + v) in the target image. Invalid pixels carry u = v = 0.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<std::uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h);

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t size() const { return u.size(); }
  void Invalidate(std::size_t i) {
    u[i] = 0.f;
    v[i] = 0.f;
    valid[i] = 0;
  }
};

// Per-pixel confidence in [0, 1] paired with a FlowField of the same size.
struct WeightField {
  int width = 0;
  int height = 0;
  std::vector<float> w;
};

struct ContaminationSpec {
  double noise_sigma = 0.0;       // pixels
  double outlier_fraction = 0.0;  // [0, 1)
  double outlier_magnitude = 0.0; // pixels
  std::uint64_t rng_seed = 0;

  void Validate() const;
};

struct LabeledFlow {
  FlowField field;
  std::vector<std::uint8_t> outlier;  // ground-truth labels, one per pixel
};

// Exact flow of h plus Gaussian noise; exactly floor(fraction * W * H) pixels
// (chosen by seed) are replaced with displacements drawn uniformly from the
// disc of radius outlier_magnitude. Pixels that h sends to infinity are
// invalid.
LabeledFlow SyntheticFlow(const Homography& h, int width, int height,
                          const ContaminationSpec& spec);

struct LkOptions {
  int levels = 4;
  int window = 21;  // odd, pixels
  int iters = 5;
  double min_eigenvalue = 1e-4;
};

// Dense coarse-to-fine Lucas-Kanade. Both images are converted to grayscale.
// Throws kImageSizeMismatch.
FlowField LucasKanadeFlow(const ImageBuffer& i0, const ImageBuffer& i1,
                          const LkOptions& options = {});

WeightField WeightsUniform(int width, int height);

// w(x) = exp(-e^2 / (2 sigma^2)), e = |f(x) + b(x + f(x))| with b sampled
// bilinearly. Invalid forward pixels and endpoints without valid backward
// support get 0.
WeightField WeightsFbConsistency(const FlowField& forward, const FlowField& backward,
                                 double sigma);

// w_i = exp(-r_i^2 / (2 sigma^2)) with r_i the transfer error under h_init;
// values below 1e-100 are clamped to 0.
std::vector<double> WeightsResidual(const CorrespondenceSet& c, const Homography& h_init,
                                    double sigma);

struct SampledCorrespondences {
  CorrespondenceSet set;
  std::vector<std::size_t> pixels;  // source pixel index of each pair
};

// Pairs (p, p + f(p)) for valid pixels inside template_mask whose endpoint
// lies in [0, W-1] x [0, H-1] of the target (and, if given, on a set pixel of
// target_valid). Uniformly subsampled without replacement to max_samples;
// the kept pairs stay in raster order. Weights are attached when given.
SampledCorrespondences FlowToCorrespondences(const FlowField& flow, const Mask& template_mask,
                                             int target_width, int target_height,
                                             std::size_t max_samples, std::uint64_t seed,
                                             const WeightField* weights = nullptr,
                                             const Mask* target_valid = nullptr);

// Backward-flow pixels read when weighting the given forward pixels (the
// bilinear neighbourhood of each endpoint), for use as a query roi.
Mask FlowSupport(const FlowField& forward, std::span<const std::size_t> pixels);

// Binary flow file: "PIEH" tag, int32 width, int32 height (little endian),
// then interleaved float32 (u, v) row-major. Invalid vectors are written as
// 1e10 and any component above 1e9 in magnitude reads back as invalid.
void WriteFlow(const std::filesystem::path& path, const FlowField& flow);
FlowField ReadFlow(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Providers. The tracker asks a FlowProvider for global (template to
// pre-warped frame) and local (previous to current frame) flow, and a
// WeightProvider turns flow into per-pixel weights.

enum class FlowLeg { kGlobal, kLocal };

struct FlowQuery {
  const ImageBuffer* source = nullptr;
  const ImageBuffer* target = nullptr;
  int source_frame = 0;
  int target_frame = 0;
  // Map image pixel coordinates to the coordinates of the underlying frame
  // (non-identity for a pre-warped image).
  Homography source_view;
  Homography target_view;
  FlowLeg leg = FlowLeg::kGlobal;
  // When set, the provider returns target -> source flow on the target grid.
  bool backward = false;
  // Images are s-fold downscaled versions of the original frames.
  int scale = 1;
  // Pixels of the output grid the caller will read; providers may leave the
  // rest invalid. Null means all.
  const Mask* roi = nullptr;
};

class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  virtual FlowField Compute(const FlowQuery& query) const = 0;
  virtual std::string name() const = 0;
  // False when Compute ignores image content, so callers may skip rendering.
  virtual bool reads_pixels() const { return true; }
};

class WeightProvider {
 public:
  virtual ~WeightProvider() = default;
  virtual bool needs_backward() const = 0;
  virtual WeightField Compute(const FlowField& forward, const FlowField* backward) const = 0;
  // Weights at the given forward pixels only; equals picking from Compute.
  virtual std::vector<double> ComputeAt(const FlowField& forward, const FlowField* backward,
                                        std::span<const std::size_t> pixels) const;
  virtual std::string name() const = 0;
};

class UniformWeightProvider final : public WeightProvider {
 public:
  bool needs_backward() const override { return false; }
  WeightField Compute(const FlowField& forward, const FlowField*) const override {
    return WeightsUniform(forward.width, forward.height);
  }
  std::string name() const override { return "uniform"; }
};

class FbConsistencyWeightProvider final : public WeightProvider {
 public:
  explicit FbConsistencyWeightProvider(double sigma = 2.0) : sigma_(sigma) {}
  bool needs_backward() const override { return true; }
  WeightField Compute(const FlowField& forward, const FlowField* backward) const override;
  std::vector<double> ComputeAt(const FlowField& forward, const FlowField* backward,
                                std::span<const std::size_t> pixels) const override;
  std::string name() const override { return "fb"; }

 private:
  double sigma_;
};

// Scripted disturbance of the synthetic provider over frames
// [first_frame, last_frame].
struct CorruptionEvent {
  enum class Kind {
    kGlobalOutliers,  // every global vector is an outlier (template unrecognizable)
    kLocalBias,       // local flow follows a wrong but self-consistent motion
  };
  Kind kind = Kind::kGlobalOutliers;
  int first_frame = 0;
  int last_frame = 0;
  double bias_magnitude = 0.0;  // per-frame drift of kLocalBias, pixels
};

struct SyntheticFlowOptions {
  ContaminationSpec contamination;
  // Vectors longer than this degrade into outliers with probability
  // min(1, 4 (|d| - R) / R); 0 disables the effect.
  double reliable_motion = 0.0;
  std::vector<CorruptionEvent> events;
};

// Ground-truth flow derived from per-frame poses, contaminated per options:
// each vector is independently an outlier with probability outlier_fraction,
// inliers get Gaussian noise. Outliers of one query share a random offset of
// length in [outlier_magnitude / 2, outlier_magnitude] from the true flow,
// plus jitter; vectors made unreliable by large motion or bursts are random. Random draws are keyed by (seed, query, pixel),
// so a pixel's value does not depend on the roi. Deterministic in
// (options, query).
class SyntheticFlowProvider final : public FlowProvider {
 public:
  SyntheticFlowProvider(std::vector<Homography> gt_poses, SyntheticFlowOptions options);
  FlowField Compute(const FlowQuery& query) const override;
  std::string name() const override { return "synthetic"; }
  bool reads_pixels() const override { return false; }

  // The exact (uncontaminated) source-to-target image map for a query.
  Homography TrueMap(const FlowQuery& query) const;

 private:
  std::vector<Homography> gt_;
  SyntheticFlowOptions options_;
};

class LucasKanadeFlowProvider final : public FlowProvider {
 public:
  explicit LucasKanadeFlowProvider(LkOptions options = {}) : options_(options) {}
  FlowField Compute(const FlowQuery& query) const override;
  std::string name() const override { return "lk"; }

 private:
  LkOptions options_;
};

// Reads externally computed flow between original frames:
//   global_<t>.flo       frame 0 -> frame t
//   global_back_<t>.flo  frame t -> frame 0
//   local_<t>.flo        frame t-1 -> frame t
//   local_back_<t>.flo   frame t -> frame t-1
// with <t> zero-padded to 6 digits. Pre-warp views are applied on the fly.
class FileFlowProvider final : public FlowProvider {
 public:
  explicit FileFlowProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  FlowField Compute(const FlowQuery& query) const override;
  std::string name() const override { return "file"; }

  std::filesystem::path PathFor(FlowLeg leg, bool backward, int frame) const;
  // Throws Error(kIoError) naming the first frame whose file is missing.
  void CheckAvailable(int frame_count, bool need_backward, bool need_local) const;

 private:
  std::filesystem::path dir_;
};

}  // namespace woftkit
