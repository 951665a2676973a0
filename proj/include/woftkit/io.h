#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "woftkit/geometry.h"
#include "woftkit/image.h"

namespace woftkit {

// 8-bit grayscale or RGB, PNG or binary PGM/PPM (detected from the file
// signature). Intensities are mapped to [0, 1]. Throws Error(kIoError).
ImageBuffer ReadImage(const std::filesystem::path& path);

// Format chosen by extension: .png, .pgm/.ppm (by channel count) or .pnm.
// Values are clamped to [0, 1] and rounded to 8 bits.
void WriteImage(const std::filesystem::path& path, const ImageBuffer& img);

// A mask is stored as an 8-bit grayscale image; nonzero pixels are set.
Mask ReadMask(const std::filesystem::path& path);
void WriteMask(const std::filesystem::path& path, const Mask& mask);

// Nine whitespace-separated numbers per line, row-major. Blank lines and
// '#' comments are skipped.
std::vector<Homography> ReadHomographies(const std::filesystem::path& path);
void WriteHomographies(const std::filesystem::path& path,
                       const std::vector<Homography>& poses);

// Shortest round-trip decimal form, independent of the process locale.
std::string FormatDouble(double v);
std::string FormatHomography(const Homography& h);
Homography ParseHomography(const std::vector<double>& nine);

// Writes to a sibling temporary file and renames it over the target.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& contents);
std::string ReadFile(const std::filesystem::path& path);

// Splits on whitespace and parses every token as a double
// (locale-independent). Throws Error(kIoError) on a malformed token.
std::vector<double> ParseNumbers(const std::string& line);

}  // namespace woftkit
