#include "dynaflow/flow_core.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <unistd.h>

namespace dynaflow {

namespace fs = std::filesystem;

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Format: return "format";
    case ErrorKind::Length: return "length";
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Io: return "io";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::Contract: return "contract";
  }
  return "unknown";
}

void check_plane_shape(int width, int height, std::size_t samples) {
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::Dimension, "plane dimensions must be positive, got " +
                                          std::to_string(width) + "x" + std::to_string(height));
  }
  if (samples != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorKind::Dimension, "plane of " + std::to_string(width) + "x" +
                                          std::to_string(height) + " given " +
                                          std::to_string(samples) + " samples");
  }
}

namespace {

std::size_t sanitize(Plane<float>& plane) {
  std::size_t replaced = 0;
  for (float& s : plane.samples()) {
    if (!std::isfinite(s)) {
      s = 0.0f;
      ++replaced;
    }
  }
  return replaced;
}

}  // namespace

FlowField::FlowField(Plane<float> u, Plane<float> v) : u_(std::move(u)), v_(std::move(v)) {
  if (!u_.same_shape(v_) || u_.empty()) {
    throw Error(ErrorKind::Dimension, "flow channels differ in shape");
  }
  sanitized_ = sanitize(u_) + sanitize(v_);
}

FlowField::FlowField(int width, int height, std::vector<float> u, std::vector<float> v)
    : FlowField(Plane<float>(width, height, std::move(u)), Plane<float>(width, height, std::move(v))) {}

FlowSequence::FlowSequence(std::vector<FlowField> frames) : frames_(std::move(frames)) {
  if (frames_.empty()) throw Error(ErrorKind::EmptyInput, "flow sequence is empty");
  for (std::size_t i = 1; i < frames_.size(); ++i) {
    if (frames_[i].width() != frames_[0].width() || frames_[i].height() != frames_[0].height()) {
      throw Error(ErrorKind::Dimension, "flow frame " + std::to_string(i) + " differs in shape");
    }
  }
}

RgbFrame::RgbFrame(Plane<std::uint8_t> red, Plane<std::uint8_t> green, Plane<std::uint8_t> blue)
    : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
  if (!r.same_shape(g) || !r.same_shape(b)) {
    throw Error(ErrorKind::Dimension, "rgb planes differ in shape");
  }
}

RgbFrame::RgbFrame(const GrayFrame& gray) : r(gray), g(gray), b(gray) {}

std::uint8_t luma(std::uint8_t red, std::uint8_t green, std::uint8_t blue) noexcept {
  // Integer form of 0.299R + 0.587G + 0.114B; all terms are nonnegative so
  // adding half the divisor rounds half away from zero exactly.
  const unsigned weighted = 299u * red + 587u * green + 114u * blue;
  return static_cast<std::uint8_t>((weighted + 500u) / 1000u);
}

// --- .flo -------------------------------------------------------------------

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t value) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(value >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t value = 0;
  for (int k = 0; k < 4; ++k) value |= static_cast<std::uint32_t>(bytes[offset + k]) << (8 * k);
  return value;
}

}  // namespace

std::vector<std::uint8_t> encode_flo(const FlowField& field) {
  const std::size_t n = field.u().size();
  std::vector<std::uint8_t> out;
  out.reserve(12 + 8 * n);
  put_u32(out, std::bit_cast<std::uint32_t>(kFloTag));
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  const auto u = field.u().samples();
  const auto v = field.v().samples();
  for (std::size_t i = 0; i < n; ++i) {
    put_u32(out, std::bit_cast<std::uint32_t>(u[i]));
    put_u32(out, std::bit_cast<std::uint32_t>(v[i]));
  }
  return out;
}

FlowField decode_flo(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorKind::Length, ".flo file shorter than its tag");
  if (std::bit_cast<float>(get_u32(bytes, 0)) != kFloTag) {
    throw Error(ErrorKind::Format, ".flo tag mismatch (expected 202021.25)");
  }
  if (bytes.size() < 12) throw Error(ErrorKind::Length, ".flo header truncated");
  const auto width = static_cast<std::int32_t>(get_u32(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32(bytes, 8));
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::Dimension, ".flo dimensions must be positive, got " +
                                          std::to_string(width) + "x" + std::to_string(height));
  }
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t expected = 12 + 8 * n;
  if (bytes.size() != expected) {
    throw Error(ErrorKind::Length, ".flo payload holds " + std::to_string(bytes.size()) +
                                       " bytes, expected " + std::to_string(expected));
  }
  std::vector<float> u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = std::bit_cast<float>(get_u32(bytes, 12 + 8 * i));
    v[i] = std::bit_cast<float>(get_u32(bytes, 16 + 8 * i));
  }
  return FlowField(width, height, std::move(u), std::move(v));
}

FlowField read_flo(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    FlowField field = decode_flo(bytes);
    if (field.sanitized_count() > 0) {
      std::cerr << "warning: " << path.string() << ": replaced " << field.sanitized_count()
                << " non-finite flow samples with 0\n";
    }
    return field;
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_flo(const FlowField& field, const fs::path& path) {
  write_file_atomic(path, encode_flo(field));
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned long> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      throw Error(ErrorKind::Io, "short write to " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot move output into place at " + path.string());
  }
}

// --- raster frames ------------------------------------------------------------

bool is_raster_image(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm" || ext == ".bmp" ||
         ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> sorted_files(const fs::path& dir, bool (*accept)(const fs::path&)) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && accept(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

namespace {

cv::Mat imread_8bit(const fs::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw Error(ErrorKind::Io, "cannot decode image " + path.string());
  if (img.depth() != CV_8U) throw Error(ErrorKind::Format, path.string() + ": only 8-bit images are supported");
  const int ch = img.channels();
  if (ch != 1 && ch != 3 && ch != 4) {
    throw Error(ErrorKind::Format, path.string() + ": unsupported channel count " + std::to_string(ch));
  }
  return img;
}

}  // namespace

GrayFrame read_gray(const fs::path& path) {
  const cv::Mat img = imread_8bit(path);
  GrayFrame out(img.cols, img.rows);
  const int ch = img.channels();
  for (int y = 0; y < img.rows; ++y) {
    const std::uint8_t* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      const std::uint8_t* px = row + x * ch;
      // OpenCV stores color as BGR(A).
      out.at(x, y) = ch == 1 ? px[0] : luma(px[2], px[1], px[0]);
    }
  }
  return out;
}

RgbFrame read_rgb(const fs::path& path) {
  const cv::Mat img = imread_8bit(path);
  Plane<std::uint8_t> r(img.cols, img.rows), g(img.cols, img.rows), b(img.cols, img.rows);
  const int ch = img.channels();
  for (int y = 0; y < img.rows; ++y) {
    const std::uint8_t* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      const std::uint8_t* px = row + x * ch;
      if (ch == 1) {
        r.at(x, y) = g.at(x, y) = b.at(x, y) = px[0];
      } else {
        b.at(x, y) = px[0];
        g.at(x, y) = px[1];
        r.at(x, y) = px[2];
      }
    }
  }
  return RgbFrame(std::move(r), std::move(g), std::move(b));
}

namespace {

template <typename Frame, typename Reader>
std::vector<Frame> load_sequence(const fs::path& dir, Reader read) {
  const auto files = sorted_files(dir, is_raster_image);
  if (files.empty()) throw Error(ErrorKind::EmptyInput, "no raster images in " + dir.string());
  std::vector<Frame> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    frames.push_back(read(f));
    if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height()) {
      throw Error(ErrorKind::Dimension, f.string() + " differs in size from " + files.front().string());
    }
  }
  return frames;
}

void write_mat_png(const cv::Mat& img, const fs::path& path) {
  std::vector<std::uint8_t> buffer;
  if (!cv::imencode(".png", img, buffer)) throw Error(ErrorKind::Io, "png encoding failed for " + path.string());
  write_file_atomic(path, buffer);
}

}  // namespace

std::vector<GrayFrame> load_gray_sequence(const fs::path& dir) {
  return load_sequence<GrayFrame>(dir, read_gray);
}

std::vector<RgbFrame> load_rgb_sequence(const fs::path& dir) {
  return load_sequence<RgbFrame>(dir, read_rgb);
}

void write_png(const GrayFrame& frame, const fs::path& path) {
  cv::Mat img(frame.height(), frame.width(), CV_8UC1,
              const_cast<std::uint8_t*>(frame.samples().data()));
  write_mat_png(img, path);
}

void write_png(const RgbFrame& frame, const fs::path& path) {
  cv::Mat img(frame.height(), frame.width(), CV_8UC3);
  for (int y = 0; y < img.rows; ++y) {
    auto* row = img.ptr<std::uint8_t>(y);
    for (int x = 0; x < img.cols; ++x) {
      row[3 * x + 0] = frame.b.at(x, y);
      row[3 * x + 1] = frame.g.at(x, y);
      row[3 * x + 2] = frame.r.at(x, y);
    }
  }
  write_mat_png(img, path);
}

}  // namespace dynaflow
