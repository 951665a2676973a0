#include "woftkit/io.h"

#include <png.h>

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <system_error>

#include "woftkit/error.h"

namespace woftkit {

namespace fs = std::filesystem;

namespace {

using FilePtr = std::unique_ptr<std::FILE, int (*)(std::FILE*)>;

FilePtr OpenFile(const fs::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode), &std::fclose);
  if (!f) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return f;
}

std::uint8_t ToByte(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

ImageBuffer ReadPng(const fs::path& path) {
  FilePtr f = OpenFile(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIoError, "libpng initialization failed");
  }
  std::vector<std::uint8_t> data;
  int width = 0, height = 0, channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kIoError, "corrupt PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  data.resize(stride * height);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = data.data() + y * stride;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kIoError, "unsupported PNG channel layout in " + path.string());
  }
  std::vector<float> px(static_cast<std::size_t>(width) * height * channels);
  for (int y = 0; y < height; ++y)
    for (int i = 0; i < width * channels; ++i)
      px[static_cast<std::size_t>(y) * width * channels + i] = data[y * stride + i] / 255.0f;
  return ImageBuffer(width, height, channels, std::move(px));
}

void WritePng(const fs::path& path, const ImageBuffer& img) {
  FilePtr f = OpenFile(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "libpng initialization failed");
  }
  const int stride = img.width() * img.channels();
  std::vector<std::uint8_t> data(static_cast<std::size_t>(stride) * img.height());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = ToByte(img.pixels()[i]);
  std::vector<png_bytep> rows(img.height());
  for (int y = 0; y < img.height(); ++y) rows[y] = data.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8,
               img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string PnmToken(std::FILE* f) {
  std::string tok;
  int c;
  while ((c = std::fgetc(f)) != EOF) {
    if (c == '#') {
      while ((c = std::fgetc(f)) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

ImageBuffer ReadPnm(const fs::path& path) {
  FilePtr f = OpenFile(path, "rb");
  const std::string magic = PnmToken(f.get());
  if (magic != "P5" && magic != "P6") {
    throw Error(ErrorCode::kIoError, "only binary PGM/PPM supported: " + path.string());
  }
  const int channels = magic == "P5" ? 1 : 3;
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(PnmToken(f.get()));
    height = std::stoi(PnmToken(f.get()));
    maxval = std::stoi(PnmToken(f.get()));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kIoError, "bad PNM header in " + path.string());
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 255) {
    throw Error(ErrorCode::kIoError, "unsupported PNM header in " + path.string());
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
  if (std::fread(data.data(), 1, data.size(), f.get()) != data.size()) {
    throw Error(ErrorCode::kIoError, "truncated PNM " + path.string());
  }
  std::vector<float> px(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) px[i] = data[i] / static_cast<float>(maxval);
  return ImageBuffer(width, height, channels, std::move(px));
}

void WritePnm(const fs::path& path, const ImageBuffer& img) {
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) +
                    " " + std::to_string(img.height()) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + img.pixels().size());
  for (std::size_t i = 0; i < img.pixels().size(); ++i)
    out[header + i] = static_cast<char>(ToByte(img.pixels()[i]));
  FilePtr f = OpenFile(path, "wb");
  if (std::fwrite(out.data(), 1, out.size(), f.get()) != out.size()) {
    throw Error(ErrorCode::kIoError, "failed writing " + path.string());
  }
}

}  // namespace

ImageBuffer ReadImage(const fs::path& path) {
  FilePtr f = OpenFile(path, "rb");
  unsigned char sig[8] = {0};
  const std::size_t n = std::fread(sig, 1, 8, f.get());
  f.reset();
  if (n == 8 && png_sig_cmp(sig, 0, 8) == 0) return ReadPng(path);
  if (n >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return ReadPnm(path);
  throw Error(ErrorCode::kIoError, "unrecognized image format: " + path.string());
}

void WriteImage(const fs::path& path, const ImageBuffer& img) {
  const std::string ext = path.extension().string();
  const fs::path tmp = path.string() + ".tmp";
  if (ext == ".png") {
    WritePng(tmp, img);
  } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    WritePnm(tmp, img);
  } else {
    throw Error(ErrorCode::kIoError, "unsupported image extension: " + ext);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot rename onto " + path.string());
}

Mask ReadMask(const fs::path& path) {
  const ImageBuffer img = ToGray(ReadImage(path));
  Mask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.set(x, y, img.at(x, y) > 0.0f);
  return m;
}

void WriteMask(const fs::path& path, const Mask& mask) {
  ImageBuffer img(mask.width, mask.height, 1);
  for (std::size_t i = 0; i < mask.data.size(); ++i) img.pixels()[i] = mask.data[i] ? 1.f : 0.f;
  WriteImage(path, img);
}

std::string FormatDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string FormatHomography(const Homography& h) {
  std::string s;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      if (!s.empty()) s.push_back(' ');
      s += FormatDouble(h(r, c));
    }
  }
  return s;
}

Homography ParseHomography(const std::vector<double>& nine) {
  if (nine.size() != 9) {
    throw Error(ErrorCode::kIoError, "homography needs nine numbers");
  }
  Matrix3 m;
  m << nine[0], nine[1], nine[2], nine[3], nine[4], nine[5], nine[6], nine[7], nine[8];
  return Homography::FromMatrix(m);
}

std::vector<double> ParseNumbers(const std::string& line) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (p < end) {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p == end) break;
    if (*p == '+') ++p;
    double v;
    const auto res = std::from_chars(p, end, v);
    if (res.ec != std::errc() ||
        (res.ptr < end && !std::isspace(static_cast<unsigned char>(*res.ptr)))) {
      throw Error(ErrorCode::kIoError, "malformed number in line: " + line);
    }
    out.push_back(v);
    p = res.ptr;
  }
  return out;
}

std::vector<Homography> ReadHomographies(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<Homography> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<double> v = ParseNumbers(line);
    if (v.empty()) continue;
    out.push_back(ParseHomography(v));
  }
  return out;
}

void WriteHomographies(const fs::path& path, const std::vector<Homography>& poses) {
  std::string s;
  for (const auto& h : poses) s += FormatHomography(h) + "\n";
  WriteFileAtomic(path, s);
}

void WriteFileAtomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIoError, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot rename onto " + path.string());
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace woftkit
