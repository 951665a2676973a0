#include "woftkit/flow.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "woftkit/error.h"
#include "woftkit/rng.h"

namespace woftkit {

namespace fs = std::filesystem;

FlowField::FlowField(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw Error(ErrorCode::kInvalidArgument, "bad flow dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * h;
  u.assign(n, 0.f);
  v.assign(n, 0.f);
  valid.assign(n, 0);
}

void ContaminationSpec::Validate() const {
  if (!(noise_sigma >= 0) || !(outlier_fraction >= 0 && outlier_fraction < 1) ||
      !(outlier_magnitude >= 0)) {
    throw Error(ErrorCode::kInvalidArgument, "bad contamination spec");
  }
}

namespace {

// Picks k distinct indices of [0, n) by a partial Fisher-Yates shuffle and
// returns them sorted.
std::vector<std::size_t> SampleIndices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.UniformIndex(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void RandomDisc(Rng& rng, double radius, double* du, double* dv) {
  const double r = radius * std::sqrt(rng.Uniform());
  const double a = 2.0 * std::numbers::pi * rng.Uniform();
  *du = r * std::cos(a);
  *dv = r * std::sin(a);
}

void ExactFlow(const Homography& h, FlowField* f) {
  const Matrix3& m = h.matrix();
  for (int y = 0; y < f->height; ++y) {
    for (int x = 0; x < f->width; ++x) {
      const std::size_t i = f->index(x, y);
      const double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      if (!(std::abs(w) > 1e-12)) {
        f->Invalidate(i);
        continue;
      }
      f->u[i] = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w - x;
      f->v[i] = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w - y;
      f->valid[i] = 1;
    }
  }
}

}  // namespace

LabeledFlow SyntheticFlow(const Homography& h, int width, int height,
                          const ContaminationSpec& spec) {
  spec.Validate();
  LabeledFlow out{FlowField(width, height), {}};
  FlowField& f = out.field;
  ExactFlow(h, &f);
  if (spec.noise_sigma > 0) {
    Rng noise(DeriveSeed(spec.rng_seed, {0}));
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double nu = noise.Normal(), nv = noise.Normal();
      if (!f.valid[i]) continue;
      f.u[i] += spec.noise_sigma * nu;
      f.v[i] += spec.noise_sigma * nv;
    }
  }
  out.outlier.assign(f.size(), 0);
  const auto count = static_cast<std::size_t>(
      std::floor(spec.outlier_fraction * static_cast<double>(f.size()) + 1e-9));
  if (count > 0) {
    Rng pick(DeriveSeed(spec.rng_seed, {1}));
    for (std::size_t i : SampleIndices(f.size(), count, pick)) {
      RandomDisc(pick, spec.outlier_magnitude, &f.u[i], &f.v[i]);
      f.valid[i] = 1;
      out.outlier[i] = 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lucas-Kanade

namespace {

struct Plane {
  int w = 0, h = 0;
  std::vector<float> px;
  float at(int x, int y) const { return px[static_cast<std::size_t>(y) * w + x]; }
  float clamped(int x, int y) const {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return at(x, y);
  }
  float Sample(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const double top = (1 - fx) * at(x0, y0) + fx * at(x1, y0);
    const double bot = (1 - fx) * at(x0, y1) + fx * at(x1, y1);
    return static_cast<float>((1 - fy) * top + fy * bot);
  }
};

Plane ToPlane(const ImageBuffer& img) {
  const ImageBuffer g = ToGray(img);
  return {g.width(), g.height(), g.pixels()};
}

// Binomial [1 4 6 4 1]/16 blur followed by 2x decimation.
Plane PyrDown(const Plane& src) {
  static constexpr float k[5] = {1 / 16.f, 4 / 16.f, 6 / 16.f, 4 / 16.f, 1 / 16.f};
  Plane tmp{src.w, src.h, std::vector<float>(src.px.size())};
  for (int y = 0; y < src.h; ++y)
    for (int x = 0; x < src.w; ++x) {
      float acc = 0;
      for (int d = -2; d <= 2; ++d) acc += k[d + 2] * src.clamped(x + d, y);
      tmp.px[static_cast<std::size_t>(y) * src.w + x] = acc;
    }
  Plane out{(src.w + 1) / 2, (src.h + 1) / 2, {}};
  out.px.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      float acc = 0;
      for (int d = -2; d <= 2; ++d) acc += k[d + 2] * tmp.clamped(2 * x, 2 * y + d);
      out.px[static_cast<std::size_t>(y) * out.w + x] = acc;
    }
  return out;
}

// Mean over the (2r+1)^2 window clipped to the image, via an integral image.
std::vector<double> BoxMean(const std::vector<double>& src, int w, int h, int r) {
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0.0);
  auto I = [&](int x, int y) -> double& { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    double row = 0;
    for (int x = 0; x < w; ++x) {
      row += src[static_cast<std::size_t>(y) * w + x];
      I(x + 1, y + 1) = I(x + 1, y) + row;
    }
  }
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const double sum = I(x1 + 1, y1 + 1) - I(x0, y1 + 1) - I(x1 + 1, y0) + I(x0, y0);
      out[static_cast<std::size_t>(y) * w + x] = sum / ((x1 - x0 + 1) * (y1 - y0 + 1));
    }
  }
  return out;
}

double MinEigen(double a, double b, double c) {
  const double half_tr = 0.5 * (a + c);
  const double d = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  return half_tr - d;
}

}  // namespace

FlowField LucasKanadeFlow(const ImageBuffer& i0, const ImageBuffer& i1, const LkOptions& options) {
  if (!i0.SameSize(i1)) throw Error(ErrorCode::kImageSizeMismatch, "flow inputs differ in size");
  if (options.levels < 1 || options.window < 3 || options.window % 2 == 0 || options.iters < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bad Lucas-Kanade options");
  }
  const int r = options.window / 2;
  std::vector<Plane> pyr0{ToPlane(i0)}, pyr1{ToPlane(i1)};
  while (static_cast<int>(pyr0.size()) < options.levels && pyr0.back().w >= 2 * options.window &&
         pyr0.back().h >= 2 * options.window) {
    pyr0.push_back(PyrDown(pyr0.back()));
    pyr1.push_back(PyrDown(pyr1.back()));
  }

  std::vector<double> u, v;
  std::vector<double> min_eig;
  for (int level = static_cast<int>(pyr0.size()) - 1; level >= 0; --level) {
    const Plane& a = pyr0[level];
    const Plane& b = pyr1[level];
    const int w = a.w, h = a.h;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (u.empty()) {
      u.assign(n, 0.0);
      v.assign(n, 0.0);
    } else {
      // Upsample the coarser estimate.
      const int cw = pyr0[level + 1].w, ch = pyr0[level + 1].h;
      Plane cu{cw, ch, std::vector<float>(u.begin(), u.end())};
      Plane cv{cw, ch, std::vector<float>(v.begin(), v.end())};
      u.assign(n, 0.0);
      v.assign(n, 0.0);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          u[static_cast<std::size_t>(y) * w + x] = 2.0 * cu.Sample(x / 2.0, y / 2.0);
          v[static_cast<std::size_t>(y) * w + x] = 2.0 * cv.Sample(x / 2.0, y / 2.0);
        }
    }
    std::vector<double> gx(n), gy(n), gxx(n), gxy(n), gyy(n);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        gx[i] = 0.5 * (a.clamped(x + 1, y) - a.clamped(x - 1, y));
        gy[i] = 0.5 * (a.clamped(x, y + 1) - a.clamped(x, y - 1));
        gxx[i] = gx[i] * gx[i];
        gxy[i] = gx[i] * gy[i];
        gyy[i] = gy[i] * gy[i];
      }
    const auto sxx = BoxMean(gxx, w, h, r);
    const auto sxy = BoxMean(gxy, w, h, r);
    const auto syy = BoxMean(gyy, w, h, r);
    std::vector<double> ex(n), ey(n);
    for (int it = 0; it < options.iters; ++it) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const double dt = b.Sample(x + u[i], y + v[i]) - a.at(x, y);
          ex[i] = gx[i] * dt;
          ey[i] = gy[i] * dt;
        }
      const auto bx = BoxMean(ex, w, h, r);
      const auto by = BoxMean(ey, w, h, r);
      for (std::size_t i = 0; i < n; ++i) {
        const double det = sxx[i] * syy[i] - sxy[i] * sxy[i];
        if (!(det > 1e-14)) continue;
        double du = -(syy[i] * bx[i] - sxy[i] * by[i]) / det;
        double dv = -(sxx[i] * by[i] - sxy[i] * bx[i]) / det;
        const double step = std::hypot(du, dv);
        if (step > r) {
          du *= r / step;
          dv *= r / step;
        }
        u[i] += du;
        v[i] += dv;
      }
    }
    if (level == 0) {
      min_eig.resize(n);
      for (std::size_t i = 0; i < n; ++i) min_eig[i] = MinEigen(sxx[i], sxy[i], syy[i]);
    }
  }

  const int w = i0.width(), h = i0.height();
  FlowField out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = out.index(x, y);
      const bool inside = x - r >= 0 && y - r >= 0 && x + r < w && y + r < h;
      if (!inside || !(min_eig[i] >= options.min_eigenvalue) || !std::isfinite(u[i]) ||
          !std::isfinite(v[i])) {
        continue;
      }
      out.u[i] = u[i];
      out.v[i] = v[i];
      out.valid[i] = 1;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Weights

namespace {

// Bilinear flow lookup; fails outside the grid or when a contributing
// neighbour is invalid.
bool SampleFlow(const FlowField& f, double x, double y, double* u, double* v) {
  if (!(x >= 0 && y >= 0 && x <= f.width - 1 && y <= f.height - 1)) return false;
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const double fx = x - x0, fy = y - y0;
  const int x1 = fx > 0 ? x0 + 1 : x0, y1 = fy > 0 ? y0 + 1 : y0;
  const std::size_t n00 = f.index(x0, y0), n10 = f.index(x1, y0);
  const std::size_t n01 = f.index(x0, y1), n11 = f.index(x1, y1);
  if (!f.valid[n00] || !f.valid[n10] || !f.valid[n01] || !f.valid[n11]) return false;
  auto lerp = [&](const std::vector<double>& g) {
    const double top = (1 - fx) * g[n00] + fx * g[n10];
    const double bot = (1 - fx) * g[n01] + fx * g[n11];
    return (1 - fy) * top + fy * bot;
  };
  *u = lerp(f.u);
  *v = lerp(f.v);
  return true;
}

}  // namespace

WeightField WeightsUniform(int width, int height) {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kInvalidArgument, "bad weight size");
  return {width, height, std::vector<float>(static_cast<std::size_t>(width) * height, 1.f)};
}

namespace {

// FB weight of forward pixel i, 0 without valid backward support.
double FbWeight(const FlowField& forward, const FlowField& backward, std::size_t i, double inv) {
  if (!forward.valid[i]) return 0.0;
  const int x = static_cast<int>(i % forward.width), y = static_cast<int>(i / forward.width);
  const double ex = x + forward.u[i];
  const double ey = y + forward.v[i];
  double bu, bv;
  if (!SampleFlow(backward, ex, ey, &bu, &bv)) return 0.0;
  const double cx = forward.u[i] + bu;
  const double cy = forward.v[i] + bv;
  return std::exp(-(cx * cx + cy * cy) * inv);
}

void CheckFbInputs(const FlowField& forward, const FlowField& backward, double sigma) {
  if (forward.width != backward.width || forward.height != backward.height) {
    throw Error(ErrorCode::kImageSizeMismatch, "forward and backward flow differ in size");
  }
  if (!(sigma > 0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
}

}  // namespace

WeightField WeightsFbConsistency(const FlowField& forward, const FlowField& backward,
                                 double sigma) {
  CheckFbInputs(forward, backward, sigma);
  WeightField out{forward.width, forward.height, std::vector<float>(forward.size(), 0.f)};
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < forward.size(); ++i) {
    out.w[i] = static_cast<float>(FbWeight(forward, backward, i, inv));
  }
  return out;
}

std::vector<double> WeightProvider::ComputeAt(const FlowField& forward, const FlowField* backward,
                                              std::span<const std::size_t> pixels) const {
  const WeightField w = Compute(forward, backward);
  std::vector<double> out;
  out.reserve(pixels.size());
  for (std::size_t i : pixels) out.push_back(std::clamp(static_cast<double>(w.w[i]), 0.0, 1.0));
  return out;
}

std::vector<double> FbConsistencyWeightProvider::ComputeAt(const FlowField& forward,
                                                           const FlowField* backward,
                                                           std::span<const std::size_t> pixels) const {
  if (!backward) throw Error(ErrorCode::kInvalidArgument, "backward flow required");
  CheckFbInputs(forward, *backward, sigma_);
  const double inv = 1.0 / (2.0 * sigma_ * sigma_);
  std::vector<double> out;
  out.reserve(pixels.size());
  for (std::size_t i : pixels) out.push_back(static_cast<float>(FbWeight(forward, *backward, i, inv)));
  return out;
}

Mask FlowSupport(const FlowField& forward, std::span<const std::size_t> pixels) {
  Mask m(forward.width, forward.height);
  for (std::size_t i : pixels) {
    if (!forward.valid[i]) continue;
    const double ex = static_cast<double>(i % forward.width) + forward.u[i];
    const double ey = static_cast<double>(i / forward.width) + forward.v[i];
    if (!(ex >= 0 && ey >= 0 && ex <= forward.width - 1 && ey <= forward.height - 1)) continue;
    const int x0 = static_cast<int>(ex), y0 = static_cast<int>(ey);
    for (int y = y0; y <= std::min(y0 + 1, forward.height - 1); ++y)
      for (int x = x0; x <= std::min(x0 + 1, forward.width - 1); ++x) m.set(x, y, true);
  }
  return m;
}

WeightField FbConsistencyWeightProvider::Compute(const FlowField& forward,
                                                 const FlowField* backward) const {
  if (!backward) throw Error(ErrorCode::kInvalidArgument, "backward flow required");
  return WeightsFbConsistency(forward, *backward, sigma_);
}

std::vector<double> WeightsResidual(const CorrespondenceSet& c, const Homography& h_init,
                                    double sigma) {
  if (!(sigma > 0)) throw Error(ErrorCode::kInvalidArgument, "sigma must be positive");
  std::vector<double> w = TransferErrors(c, h_init);
  for (double& r : w) {
    const double v = std::isfinite(r) ? std::exp(-r * r / (2 * sigma * sigma)) : 0.0;
    r = v < 1e-100 ? 0.0 : v;
  }
  return w;
}

SampledCorrespondences FlowToCorrespondences(const FlowField& flow, const Mask& template_mask,
                                             int target_width, int target_height,
                                             std::size_t max_samples, std::uint64_t seed,
                                             const WeightField* weights,
                                             const Mask* target_valid) {
  if (template_mask.width != flow.width || template_mask.height != flow.height) {
    throw Error(ErrorCode::kImageSizeMismatch, "mask does not match flow size");
  }
  if (weights && (weights->width != flow.width || weights->height != flow.height)) {
    throw Error(ErrorCode::kImageSizeMismatch, "weights do not match flow size");
  }
  if (target_valid &&
      (target_valid->width != target_width || target_valid->height != target_height)) {
    throw Error(ErrorCode::kImageSizeMismatch, "target validity mask does not match target size");
  }
  std::vector<std::size_t> candidates;
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      const std::size_t i = flow.index(x, y);
      if (!flow.valid[i] || !template_mask.data[i]) continue;
      const double ex = x + static_cast<double>(flow.u[i]);
      const double ey = y + static_cast<double>(flow.v[i]);
      if (!(ex >= 0 && ey >= 0 && ex <= target_width - 1 && ey <= target_height - 1)) continue;
      if (target_valid &&
          !target_valid->at(static_cast<int>(std::lround(ex)), static_cast<int>(std::lround(ey)))) {
        continue;
      }
      candidates.push_back(i);
    }
  }
  if (candidates.size() > max_samples) {
    Rng rng(seed);
    std::vector<std::size_t> keep;
    for (std::size_t k : SampleIndices(candidates.size(), max_samples, rng)) {
      keep.push_back(candidates[k]);
    }
    candidates = std::move(keep);
  }
  SampledCorrespondences out;
  out.pixels = candidates;
  out.set.pairs.reserve(candidates.size());
  for (std::size_t i : candidates) {
    const double x = static_cast<double>(i % flow.width);
    const double y = static_cast<double>(i / flow.width);
    out.set.pairs.push_back({{x, y}, {x + flow.u[i], y + flow.v[i]}});
    if (weights) out.set.weights.push_back(std::clamp(static_cast<double>(weights->w[i]), 0.0, 1.0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flow files

namespace {

constexpr char kFlowTag[4] = {'P', 'I', 'E', 'H'};
constexpr float kUnknownFlow = 1e10f;

void PutU32(std::string& s, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

std::uint32_t GetU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void PutF32(std::string& s, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  PutU32(s, bits);
}

float GetF32(const unsigned char* p) {
  const std::uint32_t bits = GetU32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void WriteFlow(const fs::path& path, const FlowField& flow) {
  std::string s(kFlowTag, 4);
  PutU32(s, static_cast<std::uint32_t>(flow.width));
  PutU32(s, static_cast<std::uint32_t>(flow.height));
  s.reserve(s.size() + flow.size() * 8);
  for (std::size_t i = 0; i < flow.size(); ++i) {
    PutF32(s, flow.valid[i] ? flow.u[i] : kUnknownFlow);
    PutF32(s, flow.valid[i] ? flow.v[i] : kUnknownFlow);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

FlowField ReadFlow(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open flow file " + path.string());
  unsigned char header[12];
  in.read(reinterpret_cast<char*>(header), 12);
  if (!in || std::memcmp(header, kFlowTag, 4) != 0) {
    throw Error(ErrorCode::kIoError, "not a flow file: " + path.string());
  }
  const auto w = static_cast<int>(GetU32(header + 4));
  const auto h = static_cast<int>(GetU32(header + 8));
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) {
    throw Error(ErrorCode::kIoError, "bad flow dimensions in " + path.string());
  }
  FlowField f(w, h);
  std::vector<unsigned char> data(f.size() * 8);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!in) throw Error(ErrorCode::kIoError, "truncated flow file " + path.string());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const float u = GetF32(&data[8 * i]);
    const float v = GetF32(&data[8 * i + 4]);
    if (!std::isfinite(u) || !std::isfinite(v) || std::abs(u) > 1e9f || std::abs(v) > 1e9f) {
      continue;
    }
    f.u[i] = u;
    f.v[i] = v;
    f.valid[i] = 1;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Providers

SyntheticFlowProvider::SyntheticFlowProvider(std::vector<Homography> gt_poses,
                                             SyntheticFlowOptions options)
    : gt_(std::move(gt_poses)), options_(std::move(options)) {
  options_.contamination.Validate();
}

Homography SyntheticFlowProvider::TrueMap(const FlowQuery& q) const {
  if (q.source_frame < 0 || q.target_frame < 0 ||
      static_cast<std::size_t>(std::max(q.source_frame, q.target_frame)) >= gt_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "frame index outside the ground-truth range");
  }
  const double to_small = 1.0 / q.scale;
  const Homography src = ScaleConjugate(gt_[q.source_frame], to_small);
  const Homography dst = ScaleConjugate(gt_[q.target_frame], to_small);
  return Compose(Invert(q.target_view), Compose(dst, Compose(Invert(src), q.source_view)));
}

namespace {

// Counter-based stream keyed by (seed, pixel), so a pixel's random draws do
// not depend on which other pixels are computed.
class PixelStream {
 public:
  PixelStream(std::uint64_t seed, std::uint64_t pixel) : state_(seed ^ (pixel * 0xd1b54a32d192ed03ULL)) {}
  std::uint64_t Next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double Uniform() { return static_cast<double>(Next() >> 11) * 0x1.0p-53; }
  void Normal2(double* a, double* b) {
    double u, v, r;
    do {
      u = 2.0 * Uniform() - 1.0;
      v = 2.0 * Uniform() - 1.0;
      r = u * u + v * v;
    } while (r >= 1.0 || r == 0.0);
    const double f = std::sqrt(-2.0 * std::log(r) / r);
    *a = u * f;
    *b = v * f;
  }
  void Disc(double radius, double* du, double* dv) {
    double u, v;
    do {
      u = 2.0 * Uniform() - 1.0;
      v = 2.0 * Uniform() - 1.0;
    } while (u * u + v * v > 1.0);
    *du = radius * u;
    *dv = radius * v;
  }

 private:
  std::uint64_t state_;
};

}  // namespace

FlowField SyntheticFlowProvider::Compute(const FlowQuery& q) const {
  if (!q.source || !q.target) throw Error(ErrorCode::kInvalidArgument, "query without images");
  const ContaminationSpec& base = options_.contamination;
  const std::uint64_t seed =
      DeriveSeed(base.rng_seed, {static_cast<std::uint64_t>(q.leg), q.backward ? 1u : 0u,
                                 static_cast<std::uint64_t>(q.source_frame),
                                 static_cast<std::uint64_t>(q.target_frame),
                                 static_cast<std::uint64_t>(q.scale)});
  const double s = q.scale;

  bool all_outliers = false;
  Homography map = TrueMap(q);
  for (const auto& e : options_.events) {
    if (q.target_frame < e.first_frame || q.target_frame > e.last_frame) continue;
    if (e.kind == CorruptionEvent::Kind::kGlobalOutliers && q.leg == FlowLeg::kGlobal) {
      all_outliers = true;
    } else if (e.kind == CorruptionEvent::Kind::kLocalBias && q.leg == FlowLeg::kLocal) {
      // One drift direction per event, shared by both flow directions.
      Rng dir(DeriveSeed(base.rng_seed, {0xb1a5, static_cast<std::uint64_t>(e.first_frame)}));
      const double a = 2.0 * std::numbers::pi * dir.Uniform();
      const double m = e.bias_magnitude / s;
      map = Compose(Homography::Translation(m * std::cos(a), m * std::sin(a)), map);
    }
  }
  if (q.backward) map = Invert(map);
  const ImageBuffer& grid = q.backward ? *q.target : *q.source;
  if (q.roi && (q.roi->width != grid.width() || q.roi->height != grid.height())) {
    throw Error(ErrorCode::kImageSizeMismatch, "region of interest does not match the flow grid");
  }
  const double magnitude = (base.outlier_magnitude > 0 ? base.outlier_magnitude : 50.0) / s;
  const double sigma = base.noise_sigma / s;
  const double limit = options_.reliable_motion;
  const Matrix3& m = map.matrix();
  // Outliers of one query agree on a wrong displacement (a distractor the
  // flow locks onto), plus jitter.
  Rng distractor(DeriveSeed(seed, {0xd157}));
  const double dr = magnitude * std::sqrt(distractor.Uniform(0.25, 1.0));
  const double da = 2.0 * std::numbers::pi * distractor.Uniform();
  const double cu = dr * std::cos(da), cv = dr * std::sin(da);

  FlowField f(grid.width(), grid.height());
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const std::size_t i = f.index(x, y);
      if (q.roi && !q.roi->data[i]) continue;
      PixelStream rng(seed, i);
      f.valid[i] = 1;
      if (all_outliers) {
        rng.Disc(magnitude, &f.u[i], &f.v[i]);
        continue;
      }
      const double w = m(2, 0) * x + m(2, 1) * y + m(2, 2);
      if (!(std::abs(w) > 1e-12)) {
        f.valid[i] = 0;
        continue;
      }
      const double u = (m(0, 0) * x + m(0, 1) * y + m(0, 2)) / w - x;
      const double v = (m(1, 0) * x + m(1, 1) * y + m(1, 2)) / w - y;
      if (rng.Uniform() < base.outlier_fraction) {
        double ju, jv;
        rng.Disc(0.1 * magnitude, &ju, &jv);
        f.u[i] = u + cu + ju;
        f.v[i] = v + cv + jv;
        continue;
      }
      if (limit > 0) {
        const double d = std::hypot(u, v) * s;
        if (d > limit && rng.Uniform() < 4.0 * (d - limit) / limit) {
          rng.Disc(magnitude, &f.u[i], &f.v[i]);
          continue;
        }
      }
      double nu = 0, nv = 0;
      if (sigma > 0) rng.Normal2(&nu, &nv);
      f.u[i] = u + sigma * nu;
      f.v[i] = v + sigma * nv;
    }
  }
  return f;
}

FlowField LucasKanadeFlowProvider::Compute(const FlowQuery& q) const {
  if (!q.source || !q.target) throw Error(ErrorCode::kInvalidArgument, "query without images");
  return q.backward ? LucasKanadeFlow(*q.target, *q.source, options_)
                    : LucasKanadeFlow(*q.source, *q.target, options_);
}

fs::path FileFlowProvider::PathFor(FlowLeg leg, bool backward, int frame) const {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%s_%06d.flo", leg == FlowLeg::kGlobal ? "global" : "local",
                backward ? "_back" : "", frame);
  return dir_ / buf;
}

void FileFlowProvider::CheckAvailable(int frame_count, bool need_backward,
                                      bool need_local) const {
  for (int t = 1; t < frame_count; ++t) {
    for (FlowLeg leg : {FlowLeg::kGlobal, FlowLeg::kLocal}) {
      if (leg == FlowLeg::kLocal && !need_local) continue;
      for (bool back : {false, true}) {
        if (back && !need_backward) continue;
        const fs::path p = PathFor(leg, back, t);
        if (!fs::exists(p)) {
          throw Error(ErrorCode::kIoError,
                      "missing flow file for frame " + std::to_string(t) + ": " + p.string());
        }
      }
    }
  }
}

FlowField FileFlowProvider::Compute(const FlowQuery& q) const {
  if (!q.source || !q.target) throw Error(ErrorCode::kInvalidArgument, "query without images");
  const FlowField raw = ReadFlow(PathFor(q.leg, q.backward, q.target_frame));
  // Views in original full-resolution frame coordinates.
  const double s = q.scale;
  const Homography from_view = ScaleConjugate(q.backward ? q.target_view : q.source_view, s);
  const Homography to_view = ScaleConjugate(q.backward ? q.source_view : q.target_view, s);
  const Homography to_view_inv = Invert(to_view);
  const ImageBuffer& grid = q.backward ? *q.target : *q.source;
  FlowField out(grid.width(), grid.height());
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const Point2 frame_pt = WarpPoint(from_view, {x * s, y * s});
      double du, dv;
      if (!SampleFlow(raw, frame_pt.x, frame_pt.y, &du, &dv)) continue;
      const Point2 end{frame_pt.x + du, frame_pt.y + dv};
      Point2 img;
      try {
        img = WarpPoint(to_view_inv, end);
      } catch (const Error&) {
        continue;
      }
      const std::size_t i = out.index(x, y);
      out.u[i] = img.x / s - x;
      out.v[i] = img.y / s - y;
      out.valid[i] = 1;
    }
  }
  return out;
}

}  // namespace woftkit
