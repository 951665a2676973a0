#include <clocale>
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "test_util.h"
#include "woftkit/error.h"
#include "woftkit/flow.h"
#include "woftkit/io.h"
#include "woftkit/sequence.h"
#include "woftkit/synth.h"
#include "woftkit/tracker.h"

namespace fs = std::filesystem;

namespace woftkit {
namespace {

fs::path TempDir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("woftkit_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ImageBuffer Quantized(int w, int h, int c, std::uint64_t seed) {
  ImageBuffer img = ProceduralTexture(w, h, seed, c);
  for (float& v : img.pixels()) v = std::round(v * 255.f) / 255.f;
  return img;
}

TEST(ImageIo, PngAndPnmRoundTrip) {
  const fs::path d = TempDir("img");
  for (int c : {1, 3}) {
    const ImageBuffer img = Quantized(37, 21, c, 5);
    for (const char* ext : {".png", c == 1 ? ".pgm" : ".ppm"}) {
      const fs::path p = d / (std::string("x") + std::to_string(c) + ext);
      WriteImage(p, img);
      const ImageBuffer back = ReadImage(p);
      ASSERT_EQ(back.channels(), c);
      ASSERT_EQ(back.width(), 37);
      for (std::size_t i = 0; i < img.pixels().size(); ++i) {
        ASSERT_NEAR(back.pixels()[i], img.pixels()[i], 1e-6) << p;
      }
      EXPECT_FALSE(fs::exists(p.string() + ".tmp"));
    }
  }
  EXPECT_THROW(ReadImage(d / "missing.png"), Error);
  EXPECT_THROW(WriteImage(d / "x.bmp", Quantized(4, 4, 1, 1)), Error);
}

TEST(ImageIo, MaskRoundTrip) {
  const fs::path d = TempDir("mask");
  Mask m(13, 7);
  m.set(2, 3, true);
  m.set(12, 6, true);
  WriteMask(d / "m.png", m);
  EXPECT_EQ(ReadMask(d / "m.png").data, m.data);
}

TEST(Homographies, FileRoundTripIsExact) {
  const fs::path d = TempDir("h");
  std::vector<Homography> hs;
  for (int k = 0; k < 10; ++k) hs.push_back(testing::RandomH(k));
  WriteHomographies(d / "h.txt", hs);
  const auto back = ReadHomographies(d / "h.txt");
  ASSERT_EQ(back.size(), hs.size());
  for (std::size_t i = 0; i < hs.size(); ++i) EXPECT_EQ(back[i], hs[i]);
}

TEST(Numbers, LocaleIndependent) {
  const char* old = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = old ? old : "C";
  std::setlocale(LC_NUMERIC, "de_DE.UTF-8");  // may be unavailable; fine either way
  EXPECT_EQ(FormatDouble(0.5), "0.5");
  const auto v = ParseNumbers("1.25 -3e2\t7");
  std::setlocale(LC_NUMERIC, saved.c_str());
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0], 1.25);
  EXPECT_EQ(v[1], -300);
  EXPECT_THROW(ParseNumbers("1,5"), Error);
}

TEST(Sequence, RoundTripWithMissingAnnotation) {
  const fs::path d = TempDir("seq");
  SequenceRecord s;
  s.name = "s";
  for (int t = 0; t < 3; ++t) {
    s.frames.push_back(Quantized(24, 16, 1, t));
    s.gt_poses.push_back(Homography::Translation(t, 0));
  }
  s.gt_present = {1, 0, 1};
  s.template_mask = Mask(24, 16);
  s.template_mask.set(5, 5, true);
  WriteSequence(d, s);
  EXPECT_TRUE(fs::exists(d / "000002.png"));
  const SequenceRecord back = ReadSequence(d);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_TRUE(back.HasGroundTruth(0));
  EXPECT_FALSE(back.HasGroundTruth(1));
  EXPECT_EQ(back.gt_poses[2], s.gt_poses[2]);
  EXPECT_EQ(back.template_mask.data, s.template_mask.data);
  EXPECT_EQ(FrameFileName(12, ".png"), "000012.png");
}

TEST(FlowFile, RoundTripWithInvalid) {
  const fs::path d = TempDir("flo");
  FlowField f(5, 4);
  for (std::size_t i = 0; i < f.size(); ++i) {
    f.u[i] = 0.25f * i;
    f.v[i] = -1.5f;
    f.valid[i] = 1;
  }
  f.Invalidate(7);
  WriteFlow(d / "a.flo", f);
  const FlowField g = ReadFlow(d / "a.flo");
  EXPECT_EQ(g.u, f.u);
  EXPECT_EQ(g.v, f.v);
  EXPECT_EQ(g.valid, f.valid);
  EXPECT_THROW(ReadFlow(d / "none.flo"), Error);
}

TEST(Trace, LineRoundTrip) {
  FrameResult r;
  r.frame_index = 42;
  r.status = TrackStatus::kLost;
  r.inlier_ratio = 0.125;
  r.pose = testing::RandomH(4);
  const FrameResult back = ParseTraceLine(FormatTraceLine(r));
  EXPECT_EQ(back.frame_index, 42);
  EXPECT_EQ(back.status, TrackStatus::kLost);
  EXPECT_EQ(back.inlier_ratio, 0.125);
  EXPECT_EQ(back.pose, r.pose);
}

TEST(AtomicWrite, ReplacesContents) {
  const fs::path d = TempDir("atomic");
  WriteFileAtomic(d / "f.txt", "one");
  WriteFileAtomic(d / "f.txt", "two");
  EXPECT_EQ(ReadFile(d / "f.txt"), "two");
  EXPECT_FALSE(fs::exists(d / "f.txt.tmp"));
}

}  // namespace
}  // namespace woftkit
