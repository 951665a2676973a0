#include "woftkit/image.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "woftkit/error.h"

namespace woftkit {

ImageBuffer::ImageBuffer(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3)) {
    throw Error(ErrorCode::kInvalidArgument, "bad image dimensions");
  }
  pixels_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, int channels, std::vector<float> pixels)
    : width_(width), height_(height), channels_(channels), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0 || (channels != 1 && channels != 3) ||
      pixels_.size() != static_cast<std::size_t>(width) * height * channels) {
    throw Error(ErrorCode::kInvalidArgument, "pixel count does not match dimensions");
  }
}

std::size_t Mask::Count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1));
}

bool SampleBilinear(const ImageBuffer& img, double x, double y, int c, float* out) {
  const int w = img.width();
  const int h = img.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return false;
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  if (fx == 0.0 && fy == 0.0) {
    *out = img.at(x0, y0, c);
    return true;
  }
  const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bottom = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  *out = static_cast<float>((1.0 - fy) * top + fy * bottom);
  return true;
}

namespace {

// Snaps coordinates within 1e-9 of an integer so that exact integer maps
// (identity, integer translations) sample without interpolation blur.
inline double Snap(double v) {
  if (!(std::abs(v) < 1e15)) return v;
  const double r = static_cast<double>(static_cast<long long>(v + (v >= 0 ? 0.5 : -0.5)));
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Calls fn(x, y, sx, sy) for every output pixel whose source position lies in
// [0, w-1] x [0, h-1].
template <class Fn>
void ForEachWarped(const Homography& h, int src_w, int src_h, int out_w, int out_h, Fn fn) {
  const Matrix3 inv = Invert(h).matrix();
  const double max_x = src_w - 1, max_y = src_h - 1;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double w = inv(2, 0) * x + inv(2, 1) * y + inv(2, 2);
      if (!(std::abs(w) > 1e-12)) continue;
      const double rw = 1.0 / w;
      const double sx = Snap((inv(0, 0) * x + inv(0, 1) * y + inv(0, 2)) * rw);
      const double sy = Snap((inv(1, 0) * x + inv(1, 1) * y + inv(1, 2)) * rw);
      if (!(sx >= 0.0 && sy >= 0.0 && sx <= max_x && sy <= max_y)) continue;
      fn(x, y, sx, sy);
    }
  }
}

}  // namespace

WarpedImage WarpImage(const Homography& h, const ImageBuffer& src, int out_width,
                      int out_height) {
  WarpedImage out{ImageBuffer(out_width, out_height, src.channels()),
                  Mask(out_width, out_height)};
  const int w = src.width(), ht = src.height(), ch = src.channels();
  const float* px = src.pixels().data();
  float* dst = out.image.pixels().data();
  ForEachWarped(h, w, ht, out_width, out_height, [&](int x, int y, double sx, double sy) {
    const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
    const double fx = sx - x0, fy = sy - y0;
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, ht - 1);
    const std::size_t o = (static_cast<std::size_t>(y) * out_width + x) * ch;
    const float* p00 = px + (static_cast<std::size_t>(y0) * w + x0) * ch;
    if (fx == 0.0 && fy == 0.0) {
      for (int c = 0; c < ch; ++c) dst[o + c] = p00[c];
    } else {
      const float* p01 = px + (static_cast<std::size_t>(y0) * w + x1) * ch;
      const float* p10 = px + (static_cast<std::size_t>(y1) * w + x0) * ch;
      const float* p11 = px + (static_cast<std::size_t>(y1) * w + x1) * ch;
      for (int c = 0; c < ch; ++c) {
        const double top = (1.0 - fx) * p00[c] + fx * p01[c];
        const double bottom = (1.0 - fx) * p10[c] + fx * p11[c];
        dst[o + c] = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
    out.valid.data[static_cast<std::size_t>(y) * out_width + x] = 1;
  });
  return out;
}

Mask WarpValidity(const Homography& h, int src_width, int src_height, int out_width,
                  int out_height) {
  Mask out(out_width, out_height);
  ForEachWarped(h, src_width, src_height, out_width, out_height,
                [&](int x, int y, double, double) { out.data[static_cast<std::size_t>(y) * out_width + x] = 1; });
  return out;
}

Mask WarpMask(const Homography& h, const Mask& src, int out_width, int out_height) {
  const Matrix3 inv = Invert(h).matrix();
  Mask out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const double w = inv(2, 0) * x + inv(2, 1) * y + inv(2, 2);
      if (!(std::abs(w) > 1e-12)) continue;
      const long sx = std::lround((inv(0, 0) * x + inv(0, 1) * y + inv(0, 2)) / w);
      const long sy = std::lround((inv(1, 0) * x + inv(1, 1) * y + inv(1, 2)) / w);
      if (sx >= 0 && sy >= 0 && sx < src.width && sy < src.height &&
          src.at(static_cast<int>(sx), static_cast<int>(sy))) {
        out.set(x, y, true);
      }
    }
  }
  return out;
}

ImageBuffer ToGray(const ImageBuffer& img) {
  if (img.channels() == 1) return img;
  ImageBuffer out(img.width(), img.height(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) +
                     0.114f * img.at(x, y, 2);
    }
  }
  return out;
}

namespace {

int ScaledSize(int n, int s) { return (n - 1) / s + 1; }

}  // namespace

ImageBuffer Downscale(const ImageBuffer& img, int s) {
  if (s < 1) throw Error(ErrorCode::kInvalidArgument, "downscale factor must be >= 1");
  if (s == 1) return img;
  const int w = ScaledSize(img.width(), s);
  const int h = ScaledSize(img.height(), s);
  const int r = s / 2;
  ImageBuffer out(w, h, img.channels());
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const int x0 = std::max(0, s * i - r), x1 = std::min(img.width() - 1, s * i + r);
      const int y0 = std::max(0, s * j - r), y1 = std::min(img.height() - 1, s * j + r);
      const float n = static_cast<float>((x1 - x0 + 1) * (y1 - y0 + 1));
      for (int c = 0; c < img.channels(); ++c) {
        float acc = 0;
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) acc += img.at(x, y, c);
        out.at(i, j, c) = acc / n;
      }
    }
  }
  return out;
}

Mask Downscale(const Mask& mask, int s) {
  if (s < 1) throw Error(ErrorCode::kInvalidArgument, "downscale factor must be >= 1");
  if (s == 1) return mask;
  Mask out(ScaledSize(mask.width, s), ScaledSize(mask.height, s));
  for (int j = 0; j < out.height; ++j)
    for (int i = 0; i < out.width; ++i) out.set(i, j, mask.at(s * i, s * j));
  return out;
}

double MeanAbsoluteError(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.SameSize(b) || a.channels() != b.channels()) {
    throw Error(ErrorCode::kImageSizeMismatch, "images differ in size");
  }
  double acc = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i)
    acc += std::abs(static_cast<double>(a.pixels()[i]) - b.pixels()[i]);
  return acc / static_cast<double>(a.pixels().size());
}

double Psnr(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.SameSize(b) || a.channels() != b.channels()) {
    throw Error(ErrorCode::kImageSizeMismatch, "images differ in size");
  }
  double mse = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = static_cast<double>(a.pixels()[i]) - b.pixels()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.pixels().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

std::array<Point2, 4> MaskBoundingQuad(const Mask& mask) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) throw Error(ErrorCode::kEmptyMask, "mask has no set pixels");
  return {Point2{double(x0), double(y0)}, Point2{double(x1), double(y0)},
          Point2{double(x1), double(y1)}, Point2{double(x0), double(y1)}};
}

}  // namespace woftkit
