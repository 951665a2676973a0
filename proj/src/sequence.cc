#include "woftkit/sequence.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "woftkit/error.h"
#include "woftkit/io.h"

namespace woftkit {

namespace fs = std::filesystem;

std::string FrameFileName(std::size_t index, const std::string& extension) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf + extension;
}

void WriteSequence(const fs::path& dir, const SequenceRecord& seq,
                   const std::string& frame_extension) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string());
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    WriteImage(dir / FrameFileName(t, frame_extension), seq.frames[t]);
  }
  std::string gt;
  for (std::size_t t = 0; t < seq.gt_poses.size(); ++t) {
    gt += seq.HasGroundTruth(t) ? FormatHomography(seq.gt_poses[t])
                                : "nan nan nan nan nan nan nan nan nan";
    gt += "\n";
  }
  WriteFileAtomic(dir / "gt.txt", gt);
  WriteMask(dir / "mask.png", seq.template_mask);
  if (!seq.labels.empty()) {
    std::string lab = "# frame blur_length blur_angle max_corner_offset\n";
    for (std::size_t t = 0; t < seq.labels.size(); ++t) {
      lab += std::to_string(t) + " " + FormatDouble(seq.labels[t].blur_length) + " " +
             FormatDouble(seq.labels[t].blur_angle) + " " +
             FormatDouble(seq.labels[t].max_corner_offset) + "\n";
    }
    WriteFileAtomic(dir / "labels.txt", lab);
  }
}

void ReadPoseFile(const fs::path& path, std::vector<Homography>* poses,
                  std::vector<std::uint8_t>* present) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  poses->clear();
  present->clear();
  std::string line;
  bool any_missing = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::vector<double> v;
    try {
      v = ParseNumbers(line);
    } catch (const Error&) {
      // from_chars accepts "nan"; anything else is malformed.
      throw Error(ErrorCode::kIoError, "malformed pose line in " + path.string());
    }
    if (v.empty()) continue;
    if (v.size() != 9) {
      throw Error(ErrorCode::kIoError, "pose lines need nine numbers: " + path.string());
    }
    if (std::all_of(v.begin(), v.end(), [](double d) { return std::isnan(d); })) {
      poses->push_back(Homography());
      present->push_back(0);
      any_missing = true;
      continue;
    }
    poses->push_back(ParseHomography(v));
    present->push_back(1);
  }
  if (!any_missing) present->clear();
}

SequenceRecord ReadSequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoError, "not a sequence directory: " + dir.string());
  }
  SequenceRecord seq;
  seq.name = dir.filename().string();
  if (seq.name.empty()) seq.name = dir.parent_path().filename().string();
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const fs::path& p = entry.path();
    const std::string stem = p.stem().string();
    const std::string ext = p.extension().string();
    if (!stem.empty() && std::all_of(stem.begin(), stem.end(), ::isdigit) &&
        (ext == ".png" || ext == ".pgm" || ext == ".ppm")) {
      frames.push_back(p);
    }
  }
  std::sort(frames.begin(), frames.end());
  for (const auto& p : frames) seq.frames.push_back(ReadImage(p));
  ReadPoseFile(dir / "gt.txt", &seq.gt_poses, &seq.gt_present);
  seq.template_mask = ReadMask(dir / "mask.png");
  if (!seq.frames.empty() && seq.gt_poses.size() != seq.frames.size()) {
    throw Error(ErrorCode::kLengthMismatch, "gt.txt length differs from frame count in " +
                                                dir.string());
  }
  if (fs::exists(dir / "labels.txt")) {
    std::ifstream in(dir / "labels.txt");
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto v = ParseNumbers(line);
      if (v.size() == 4) seq.labels.push_back({v[1], v[2], v[3]});
    }
  }
  return seq;
}

}  // namespace woftkit
