#pragma once

#include <cstdint>
#include <string>

#include "woftkit/geometry.h"
#include "woftkit/image.h"
#include "woftkit/rng.h"
#include "woftkit/sequence.h"

namespace woftkit {

struct PairSpec {
  double corner_perturbation_frac = 0.20;  // of the image diagonal, [0, 0.5)
  double blur_max_len = 20.0;              // pixels
  int degrade_quality = 25;                // 1..100
  std::uint64_t rng_seed = 0;
  // When non-empty, Degrade is replaced by an external codec round trip.
  // "{in}" and "{out}" are substituted with PNG paths.
  std::string external_codec;

  void Validate() const;  // throws kInvalidArgument
};

// Homography taking the image corners (0,0), (W-1,0), (W-1,H-1), (0,H-1) to
// corners displaced by independent vectors drawn uniformly from the disc of
// radius frac * diagonal. Non-convex or collapsed results are redrawn; after
// 100 failed attempts throws kGenerationFailed.
Homography RandomHomography(int width, int height, double frac, Rng& rng);

// Box kernel of the given length along the given direction, sampled
// bilinearly, borders replicated; length 0 is an exact copy.
ImageBuffer MotionBlur(const ImageBuffer& img, double length, double angle);

// 8x8 block DCT quantization with the standard luminance table scaled the way
// JPEG quality factors scale it. Deterministic; output is not re-quantized to
// 8 bits.
ImageBuffer Degrade(const ImageBuffer& img, int quality);

// Writes img to a temporary PNG, runs command (with {in}/{out} substituted)
// and reads the result back. Throws kIoError on failure.
ImageBuffer DegradeExternal(const ImageBuffer& img, const std::string& command);

struct PairSample {
  ImageBuffer first;
  ImageBuffer second;
  ImageBuffer second_clean;  // second image before blur and degradation
  Homography gt;             // maps first-image pixels to second-image pixels
  Homography pose_first;
  Homography pose_second;
  double blur_length = 0.0;
  double blur_angle = 0.0;
};

// Warps src by two random homographies; gt = H_b * H_a^-1. The second image
// is motion blurred; both images are degraded.
PairSample MakePair(const ImageBuffer& src, const PairSpec& spec);

struct SequenceSpec {
  int length = 501;
  double motion_smoothness = 0.35;  // std of per-frame corner acceleration, pixels
  double target_inset = 0.25;       // template rectangle inset, fraction of size
  PairSpec degradation{};           // corner_perturbation_frac bounds each corner offset
};

// Frames are rendered from src (frame 0 is src itself, degraded). The target
// is the inset rectangle of frame 0; its corners follow a damped random walk
// and each pose is the exact four-point homography onto the displaced
// corners. Frames are motion blurred along the inter-frame corner motion
// (capped at blur_max_len) and degraded.
SequenceRecord MakeSequence(const ImageBuffer& src, const SequenceSpec& spec);

// Convenience overload mirroring the (src, length, smoothness, spec) form.
SequenceRecord MakeSequence(const ImageBuffer& src, int length, double motion_smoothness,
                            const PairSpec& spec);

enum class TextureKind {
  kSmooth,   // plane waves and soft shapes; resamples almost losslessly
  kNatural,  // 1/f value noise and hard-edged shapes, closer to photographs
};

// Procedural source image with intensities in [0.02, 0.98].
ImageBuffer ProceduralTexture(int width, int height, std::uint64_t seed, int channels = 1,
                              TextureKind kind = TextureKind::kSmooth);

}  // namespace woftkit
