#pragma once

#include <cstdint>
#include <vector>

#include "woftkit/geometry.h"

namespace woftkit {

// Row-major interleaved image with intensities in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, int channels, float fill = 0.0f);
  ImageBuffer(int width, int height, int channels, std::vector<float> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return pixels_.empty(); }
  bool SameSize(const ImageBuffer& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  float at(int x, int y, int c = 0) const {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float& at(int x, int y, int c = 0) {
    return pixels_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  const std::vector<float>& pixels() const { return pixels_; }
  std::vector<float>& pixels() { return pixels_; }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<float> pixels_;
};

// Per-pixel boolean grid (stored as bytes).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int w, int h, bool fill = false)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t Count() const;
};

struct WarpedImage {
  ImageBuffer image;
  Mask valid;
};

// Renders out(x) = src(h^-1 x) with bilinear interpolation, i.e. h maps source
// pixel coordinates to output pixel coordinates. Samples falling outside the
// source are zero-filled and cleared in the validity mask.
WarpedImage WarpImage(const Homography& h, const ImageBuffer& src, int out_width,
                      int out_height);

// The validity mask of WarpImage without rendering the pixels.
Mask WarpValidity(const Homography& h, int src_width, int src_height, int out_width,
                  int out_height);

// Nearest-neighbour warp of a mask with the same coordinate convention.
Mask WarpMask(const Homography& h, const Mask& src, int out_width, int out_height);

// Bilinear sample of channel c; returns false outside [0, w-1] x [0, h-1].
bool SampleBilinear(const ImageBuffer& img, double x, double y, int c, float* out);

// Rec. 601 luminance for RGB, identity for grayscale.
ImageBuffer ToGray(const ImageBuffer& img);

// Output pixel (i, j) averages the full-resolution pixels within a centered
// s x s window around (s*i, s*j), so full = diag(s, s, 1) * small exactly.
ImageBuffer Downscale(const ImageBuffer& img, int s);
Mask Downscale(const Mask& mask, int s);

// Peak signal-to-noise ratio in dB for unit peak; +inf for identical images.
double Psnr(const ImageBuffer& a, const ImageBuffer& b);
double MeanAbsoluteError(const ImageBuffer& a, const ImageBuffer& b);

// Axis-aligned bounding box corners of the set pixels, clockwise from the
// top-left. Throws kEmptyMask on an empty mask.
std::array<Point2, 4> MaskBoundingQuad(const Mask& mask);

}  // namespace woftkit
