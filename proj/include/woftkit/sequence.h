#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "woftkit/geometry.h"
#include "woftkit/image.h"

namespace woftkit {

struct FrameLabel {
  double blur_length = 0.0;        // pixels
  double blur_angle = 0.0;         // radians
  double max_corner_offset = 0.0;  // pixels, relative to the template quad
};

// Frames plus per-frame ground truth H_{0->t}, the unit of evaluation.
struct SequenceRecord {
  std::string name;
  std::vector<ImageBuffer> frames;
  std::vector<Homography> gt_poses;
  // One byte per frame, nonzero where ground truth exists. Empty means every
  // frame is annotated.
  std::vector<std::uint8_t> gt_present;
  Mask template_mask;
  std::vector<FrameLabel> labels;

  std::size_t size() const { return frames.size(); }
  bool HasGroundTruth(std::size_t t) const {
    return t < gt_poses.size() && (gt_present.empty() || gt_present[t] != 0);
  }
};

// On-disk layout: <dir>/000000.png ... (zero-padded, 6 digits), gt.txt with
// one homography per line (a line of nine "nan" marks a missing annotation),
// mask.png, and optionally labels.txt.
void WriteSequence(const std::filesystem::path& dir, const SequenceRecord& seq,
                   const std::string& frame_extension = ".png");
SequenceRecord ReadSequence(const std::filesystem::path& dir);

// gt.txt-style reader that tolerates missing (all-NaN) lines.
void ReadPoseFile(const std::filesystem::path& path, std::vector<Homography>* poses,
                  std::vector<std::uint8_t>* present);

std::string FrameFileName(std::size_t index, const std::string& extension);

}  // namespace woftkit
