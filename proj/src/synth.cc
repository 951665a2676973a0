#include "woftkit/synth.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>

#include <unistd.h>

#include <Eigen/SVD>

#include "woftkit/error.h"
#include "woftkit/io.h"

namespace woftkit {

namespace fs = std::filesystem;

void PairSpec::Validate() const {
  if (!(corner_perturbation_frac >= 0 && corner_perturbation_frac < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "corner perturbation fraction must be in [0, 0.5)");
  }
  if (!(blur_max_len >= 0)) throw Error(ErrorCode::kInvalidArgument, "blur length must be >= 0");
  if (degrade_quality < 1 || degrade_quality > 100) {
    throw Error(ErrorCode::kInvalidArgument, "quality must be in [1, 100]");
  }
}

namespace {

std::array<Point2, 4> ImageCorners(int width, int height) {
  const double w = width - 1, h = height - 1;
  return {Point2{0, 0}, Point2{w, 0}, Point2{w, h}, Point2{0, h}};
}

double QuadArea(const std::array<Point2, 4>& q) {
  double a = 0;
  for (int i = 0; i < 4; ++i) {
    const Point2& p = q[i];
    const Point2& n = q[(i + 1) % 4];
    a += p.x * n.y - n.x * p.y;
  }
  return 0.5 * std::abs(a);
}

}  // namespace

Homography RandomHomography(int width, int height, double frac, Rng& rng) {
  if (width < 2 || height < 2) throw Error(ErrorCode::kInvalidArgument, "image too small");
  if (!(frac >= 0 && frac < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "corner perturbation fraction must be in [0, 0.5)");
  }
  if (frac == 0.0) return Homography();
  const auto corners = ImageCorners(width, height);
  const double radius = frac * std::hypot(static_cast<double>(width), static_cast<double>(height));
  const double area = QuadArea(corners);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::array<Point2, 4> moved = corners;
    for (auto& p : moved) {
      const double r = radius * std::sqrt(rng.Uniform());
      const double a = 2.0 * std::numbers::pi * rng.Uniform();
      p.x += r * std::cos(a);
      p.y += r * std::sin(a);
    }
    if (!IsConvexQuad(moved) || QuadArea(moved) < 0.1 * area) continue;
    try {
      const Homography h = FourPointHomography(corners, moved);
      // Condition check on the canonical matrix.
      const Eigen::JacobiSVD<Matrix3> svd(h.matrix());
      const auto sv = svd.singularValues();
      if (!(sv(2) > 1e-8 * sv(0))) continue;
      return h;
    } catch (const Error&) {
      continue;
    }
  }
  throw Error(ErrorCode::kGenerationFailed, "no valid random homography in 100 attempts");
}

ImageBuffer MotionBlur(const ImageBuffer& img, double length, double angle) {
  if (!(length > 0)) return img;
  // Taps at equal steps along the segment, each split bilinearly over its 4
  // neighbours; the offsets are the same for every pixel, so the blur is a
  // small fixed convolution.
  const int taps = static_cast<int>(std::ceil(length)) + 1;
  const double dx = std::cos(angle), dy = std::sin(angle);
  std::map<std::pair<int, int>, double> kernel;
  for (int k = 0; k < taps; ++k) {
    const double t = length * (static_cast<double>(k) / (taps - 1) - 0.5);
    const double ox = t * dx, oy = t * dy;
    const int x0 = static_cast<int>(std::floor(ox)), y0 = static_cast<int>(std::floor(oy));
    const double fx = ox - x0, fy = oy - y0;
    kernel[{x0, y0}] += (1 - fx) * (1 - fy) / taps;
    kernel[{x0 + 1, y0}] += fx * (1 - fy) / taps;
    kernel[{x0, y0 + 1}] += (1 - fx) * fy / taps;
    kernel[{x0 + 1, y0 + 1}] += fx * fy / taps;
  }
  struct Tap {
    int x, y;
    double w;
  };
  std::vector<Tap> k;
  int reach = 0;
  for (const auto& [off, wt] : kernel) {
    if (wt == 0.0) continue;
    k.push_back({off.first, off.second, wt});
    reach = std::max({reach, std::abs(off.first), std::abs(off.second)});
  }
  const int w = img.width(), h = img.height(), ch = img.channels();
  const float* px = img.pixels().data();
  ImageBuffer out(w, h, ch);
  float* dst = out.pixels().data();
  for (int y = 0; y < h; ++y) {
    const bool inner_row = y >= reach && y < h - reach;
    for (int x = 0; x < w; ++x) {
      const bool inner = inner_row && x >= reach && x < w - reach;
      for (int c = 0; c < ch; ++c) {
        double acc = 0;
        for (const Tap& tp : k) {
          const int sx = inner ? x + tp.x : std::clamp(x + tp.x, 0, w - 1);
          const int sy = inner ? y + tp.y : std::clamp(y + tp.y, 0, h - 1);
          acc += tp.w * px[(static_cast<std::size_t>(sy) * w + sx) * ch + c];
        }
        dst[(static_cast<std::size_t>(y) * w + x) * ch + c] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

namespace {

constexpr int kLuminanceTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

std::array<double, 64> QuantTable(int quality) {
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> q;
  for (int i = 0; i < 64; ++i) q[i] = std::clamp((kLuminanceTable[i] * scale + 50) / 100, 1, 255);
  return q;
}

// Orthonormal 8-point DCT-II basis: basis[u][x].
const std::array<std::array<double, 8>, 8>& DctBasis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b;
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8) : std::sqrt(2.0 / 8);
      for (int x = 0; x < 8; ++x) b[u][x] = a * std::cos((2 * x + 1) * u * std::numbers::pi / 16);
    }
    return b;
  }();
  return basis;
}

}  // namespace

ImageBuffer Degrade(const ImageBuffer& img, int quality) {
  if (quality < 1 || quality > 100) throw Error(ErrorCode::kInvalidArgument, "quality must be in [1, 100]");
  const auto q = QuantTable(quality);
  const auto& basis = DctBasis();
  ImageBuffer out(img.width(), img.height(), img.channels());
  const int w = img.width(), h = img.height();
  double block[8][8], tmp[8][8], coef[8][8];
  for (int c = 0; c < img.channels(); ++c) {
    for (int by = 0; by < h; by += 8) {
      for (int bx = 0; bx < w; bx += 8) {
        for (int y = 0; y < 8; ++y)
          for (int x = 0; x < 8; ++x)
            block[y][x] = 255.0 * img.at(std::min(bx + x, w - 1), std::min(by + y, h - 1), c) - 128.0;
        // Rows then columns.
        for (int y = 0; y < 8; ++y)
          for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int x = 0; x < 8; ++x) s += basis[u][x] * block[y][x];
            tmp[y][u] = s;
          }
        for (int v = 0; v < 8; ++v)
          for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int y = 0; y < 8; ++y) s += basis[v][y] * tmp[y][u];
            const double step = q[v * 8 + u];
            coef[v][u] = std::round(s / step) * step;
          }
        for (int y = 0; y < 8; ++y)
          for (int u = 0; u < 8; ++u) {
            double s = 0;
            for (int v = 0; v < 8; ++v) s += basis[v][y] * coef[v][u];
            tmp[y][u] = s;
          }
        for (int y = 0; y < 8 && by + y < h; ++y)
          for (int x = 0; x < 8 && bx + x < w; ++x) {
            double s = 0;
            for (int u = 0; u < 8; ++u) s += basis[u][x] * tmp[y][u];
            out.at(bx + x, by + y, c) = static_cast<float>(std::clamp((s + 128.0) / 255.0, 0.0, 1.0));
          }
      }
    }
  }
  return out;
}

ImageBuffer DegradeExternal(const ImageBuffer& img, const std::string& command) {
  static std::atomic<unsigned> counter{0};
  const std::string tag = std::to_string(::getpid()) + "_" + std::to_string(counter++);
  const fs::path in = fs::temp_directory_path() / ("woftkit_codec_in_" + tag + ".png");
  const fs::path out = fs::temp_directory_path() / ("woftkit_codec_out_" + tag + ".png");
  WriteImage(in, img);
  std::string cmd = command;
  for (const auto& [key, value] : {std::pair{std::string("{in}"), in.string()},
                                   std::pair{std::string("{out}"), out.string()}}) {
    for (std::size_t pos; (pos = cmd.find(key)) != std::string::npos;) cmd.replace(pos, key.size(), value);
  }
  const int rc = std::system(cmd.c_str());
  std::error_code ec;
  fs::remove(in, ec);
  if (rc != 0 || !fs::exists(out)) {
    fs::remove(out, ec);
    throw Error(ErrorCode::kIoError, "external codec failed: " + cmd);
  }
  ImageBuffer result = ReadImage(out);
  fs::remove(out, ec);
  if (!result.SameSize(img)) throw Error(ErrorCode::kIoError, "external codec changed the image size");
  if (result.channels() != img.channels()) {
    result = img.channels() == 1 ? ToGray(result) : result;
  }
  return result;
}

namespace {

ImageBuffer ApplyDegradation(const ImageBuffer& img, const PairSpec& spec) {
  if (!spec.external_codec.empty()) {
    std::string cmd = spec.external_codec;
    const std::string key = "{quality}";
    for (std::size_t pos; (pos = cmd.find(key)) != std::string::npos;) {
      cmd.replace(pos, key.size(), std::to_string(spec.degrade_quality));
    }
    return DegradeExternal(img, cmd);
  }
  return Degrade(img, spec.degrade_quality);
}

}  // namespace

PairSample MakePair(const ImageBuffer& src, const PairSpec& spec) {
  spec.Validate();
  Rng rng(spec.rng_seed);
  PairSample s;
  s.pose_first = RandomHomography(src.width(), src.height(), spec.corner_perturbation_frac, rng);
  s.pose_second = RandomHomography(src.width(), src.height(), spec.corner_perturbation_frac, rng);
  s.gt = Compose(s.pose_second, Invert(s.pose_first));
  const ImageBuffer first = WarpImage(s.pose_first, src, src.width(), src.height()).image;
  s.second_clean = WarpImage(s.pose_second, src, src.width(), src.height()).image;
  s.blur_length = rng.Uniform(0.0, spec.blur_max_len);
  s.blur_angle = rng.Uniform(0.0, std::numbers::pi);
  s.first = ApplyDegradation(first, spec);
  s.second = ApplyDegradation(MotionBlur(s.second_clean, s.blur_length, s.blur_angle), spec);
  return s;
}

SequenceRecord MakeSequence(const ImageBuffer& src, const SequenceSpec& spec) {
  spec.degradation.Validate();
  if (spec.length < 1) throw Error(ErrorCode::kInvalidArgument, "sequence length must be >= 1");
  if (!(spec.motion_smoothness >= 0)) throw Error(ErrorCode::kInvalidArgument, "bad motion smoothness");
  if (!(spec.target_inset > 0 && spec.target_inset < 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "target inset must be in (0, 0.5)");
  }
  const int w = src.width(), h = src.height();
  SequenceRecord seq;
  seq.template_mask = Mask(w, h);
  const int x0 = static_cast<int>(std::lround(spec.target_inset * w));
  const int y0 = static_cast<int>(std::lround(spec.target_inset * h));
  for (int y = y0; y < h - y0; ++y)
    for (int x = x0; x < w - x0; ++x) seq.template_mask.set(x, y, true);
  const std::array<Point2, 4> quad0 = MaskBoundingQuad(seq.template_mask);
  const double area0 = QuadArea(quad0);

  constexpr double kDamping = 0.9;
  constexpr double kPullBack = 0.01;
  constexpr double kMargin = 4.0;
  const double max_offset_allowed = spec.degradation.corner_perturbation_frac * std::hypot(w, h);
  Rng rng(spec.degradation.rng_seed);
  std::array<Point2, 4> offset{}, velocity{};
  seq.gt_poses.push_back(Homography());
  seq.labels.push_back({});
  for (int t = 1; t < spec.length; ++t) {
    if (max_offset_allowed == 0) {
      seq.gt_poses.push_back(Homography());
      seq.labels.push_back({});
      continue;
    }
    bool accepted = false;
    std::array<Point2, 4> quad{}, next_offset{}, next_velocity{};
    for (int attempt = 0; attempt < 100 && !accepted; ++attempt) {
      for (int k = 0; k < 4; ++k) {
        next_velocity[k].x = kDamping * velocity[k].x + spec.motion_smoothness * rng.Normal() -
                             kPullBack * offset[k].x;
        next_velocity[k].y = kDamping * velocity[k].y + spec.motion_smoothness * rng.Normal() -
                             kPullBack * offset[k].y;
        next_offset[k] = {offset[k].x + next_velocity[k].x, offset[k].y + next_velocity[k].y};
        quad[k] = {quad0[k].x + next_offset[k].x, quad0[k].y + next_offset[k].y};
      }
      const bool inside = std::all_of(quad.begin(), quad.end(), [&](const Point2& p) {
        return p.x >= kMargin && p.y >= kMargin && p.x <= w - 1 - kMargin && p.y <= h - 1 - kMargin;
      });
      const double area = QuadArea(quad);
      const bool bounded = std::all_of(next_offset.begin(), next_offset.end(), [&](const Point2& d) {
        return std::hypot(d.x, d.y) <= max_offset_allowed;
      });
      accepted = bounded && inside && IsConvexQuad(quad) && area > 0.25 * area0 && area < 4.0 * area0;
      if (!accepted) {
        for (auto& v : velocity) v = {-0.5 * v.x, -0.5 * v.y};
      }
    }
    if (!accepted) throw Error(ErrorCode::kGenerationFailed, "random walk left the valid region");
    offset = next_offset;
    velocity = next_velocity;
    const bool still = std::all_of(offset.begin(), offset.end(),
                                   [](const Point2& p) { return p.x == 0 && p.y == 0; });
    seq.gt_poses.push_back(still ? Homography() : FourPointHomography(quad0, quad));
    Point2 mean_motion;
    double max_offset = 0;
    for (int k = 0; k < 4; ++k) {
      mean_motion.x += velocity[k].x / 4;
      mean_motion.y += velocity[k].y / 4;
      max_offset = std::max(max_offset, std::hypot(offset[k].x, offset[k].y));
    }
    FrameLabel label;
    label.blur_length = std::min(spec.degradation.blur_max_len, std::hypot(mean_motion.x, mean_motion.y));
    double angle = std::atan2(mean_motion.y, mean_motion.x);
    if (angle < 0) angle += std::numbers::pi;
    label.blur_angle = label.blur_length > 0 ? angle : 0.0;
    label.max_corner_offset = max_offset;
    seq.labels.push_back(label);
  }

  seq.frames.reserve(spec.length);
  for (int t = 0; t < spec.length; ++t) {
    ImageBuffer frame = t == 0 ? src : WarpImage(seq.gt_poses[t], src, w, h).image;
    frame = MotionBlur(frame, seq.labels[t].blur_length, seq.labels[t].blur_angle);
    seq.frames.push_back(ApplyDegradation(frame, spec.degradation));
  }
  return seq;
}

SequenceRecord MakeSequence(const ImageBuffer& src, int length, double motion_smoothness,
                            const PairSpec& spec) {
  SequenceSpec s;
  s.length = length;
  s.motion_smoothness = motion_smoothness;
  s.degradation = spec;
  return MakeSequence(src, s);
}

namespace {

double Smooth(double t) { return t * t * (3 - 2 * t); }

std::vector<double> ValueNoise(int w, int h, int cell, Rng& rng) {
  const int gw = w / cell + 2, gh = h / cell + 2;
  std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
  for (auto& v : lattice) v = rng.Uniform(-1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    const int gy = y / cell;
    const double fy = Smooth(static_cast<double>(y % cell) / cell);
    for (int x = 0; x < w; ++x) {
      const int gx = x / cell;
      const double fx = Smooth(static_cast<double>(x % cell) / cell);
      auto L = [&](int i, int j) { return lattice[static_cast<std::size_t>(j) * gw + i]; };
      const double top = (1 - fx) * L(gx, gy) + fx * L(gx + 1, gy);
      const double bot = (1 - fx) * L(gx, gy + 1) + fx * L(gx + 1, gy + 1);
      out[static_cast<std::size_t>(y) * w + x] = (1 - fy) * top + fy * bot;
    }
  }
  return out;
}

void AddShapes(std::vector<double>& img, int w, int h, double level_range, double edge, Rng& rng) {
  const int shapes = 10 + w * h / 4000;
  const double reach = edge + 2;
  for (int s = 0; s < shapes; ++s) {
    const bool disc = rng.Uniform() < 0.5;
    const double cx = rng.Uniform(0, w), cy = rng.Uniform(0, h);
    const double rx = rng.Uniform(4, std::max(6.0, 0.12 * std::min(w, h)));
    const double ry = disc ? rx : rng.Uniform(4, std::max(6.0, 0.12 * std::min(w, h)));
    const double level = rng.Uniform(-level_range, level_range);
    const int x0 = std::max(0, static_cast<int>(cx - rx - reach));
    const int x1 = std::min(w - 1, static_cast<int>(cx + rx + reach));
    const int y0 = std::max(0, static_cast<int>(cy - ry - reach));
    const int y1 = std::min(h - 1, static_cast<int>(cy + ry + reach));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = disc ? std::hypot(x - cx, y - cy) - rx
                              : std::max(std::abs(x - cx) - rx, std::abs(y - cy) - ry);
        const double alpha = std::clamp(0.5 - d / edge, 0.0, 1.0);
        double& p = img[static_cast<std::size_t>(y) * w + x];
        p = (1 - alpha) * p + alpha * (level + 0.3 * p);
      }
    }
  }
}

// Random plane waves with periods of 7 to 64 px: smooth at the pixel scale,
// so bilinear resampling is nearly exact.
std::vector<double> SmoothPlane(int w, int h, Rng& rng) {
  std::vector<double> img(static_cast<std::size_t>(w) * h, 0.0);
  constexpr int kWaves = 80;
  constexpr double kMinPeriod = 7.0, kMaxPeriod = 64.0;
  std::vector<double> row(w);
  for (int k = 0; k < kWaves; ++k) {
    const double period = kMinPeriod * std::exp(rng.Uniform() * std::log(kMaxPeriod / kMinPeriod));
    const double theta = rng.Uniform(0, std::numbers::pi);
    const double phase = rng.Uniform(0, 2 * std::numbers::pi);
    const double amp = period / kMaxPeriod * rng.Uniform(0.5, 1.0);
    const double kx = 2 * std::numbers::pi / period * std::cos(theta);
    const double ky = 2 * std::numbers::pi / period * std::sin(theta);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img[static_cast<std::size_t>(y) * w + x] += amp * std::sin(kx * x + ky * y + phase);
  }
  AddShapes(img, w, h, 0.7, 5.0, rng);
  return img;
}

// Value noise with octaves down to 2 px (amplitude ~ sqrt(cell)) and hard-edged shapes.
std::vector<double> NaturalPlane(int w, int h, Rng& rng) {
  std::vector<double> img(static_cast<std::size_t>(w) * h, 0.0);
  for (int cell = 64; cell >= 2; cell /= 2) {
    const auto n = ValueNoise(w, h, cell, rng);
    const double amp = std::sqrt(cell / 64.0);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] += amp * n[i];
  }
  AddShapes(img, w, h, 1.0, 1.0, rng);
  return img;
}

}  // namespace

ImageBuffer ProceduralTexture(int width, int height, std::uint64_t seed, int channels,
                              TextureKind kind) {
  if (channels != 1 && channels != 3) throw Error(ErrorCode::kInvalidArgument, "channels must be 1 or 3");
  if (width < 2 || height < 2) throw Error(ErrorCode::kInvalidArgument, "texture too small");
  Rng rng(seed);
  const auto base = kind == TextureKind::kSmooth ? SmoothPlane(width, height, rng)
                                                 : NaturalPlane(width, height, rng);
  std::vector<std::vector<double>> planes(channels, base);
  if (channels == 3) {
    for (int c = 0; c < 3; ++c) {
      const auto tint = ValueNoise(width, height, 32, rng);
      for (std::size_t i = 0; i < base.size(); ++i) planes[c][i] += 0.15 * tint[i];
    }
  }
  double lo = 1e300, hi = -1e300;
  for (const auto& p : planes)
    for (double v : p) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = hi > lo ? hi - lo : 1.0;
  ImageBuffer out(width, height, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        const double v = planes[c][static_cast<std::size_t>(y) * width + x];
        out.at(x, y, c) = static_cast<float>(0.02 + 0.96 * (v - lo) / span);
      }
  return out;
}

}  // namespace woftkit
