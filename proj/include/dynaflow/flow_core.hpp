#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "dynaflow/error.hpp"

namespace dynaflow {

// Dense row-major 2D grid. Width and height are always >= 1.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, T fill = T{});
  Plane(int width, int height, std::vector<T> samples);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& at(int x, int y) { return data_[index(x, y)]; }

  std::span<const T> samples() const noexcept { return data_; }
  std::span<T> samples() noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  bool same_shape(const Plane& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Throws Dimension unless width, height >= 1 and samples == width*height.
void check_plane_shape(int width, int height, std::size_t samples);

template <typename T>
Plane<T>::Plane(int width, int height, T fill) : width_(width), height_(height) {
  check_plane_shape(width, height, static_cast<std::size_t>(width > 0 ? width : 0) *
                                       static_cast<std::size_t>(height > 0 ? height : 0));
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

template <typename T>
Plane<T>::Plane(int width, int height, std::vector<T> samples)
    : width_(width), height_(height), data_(std::move(samples)) {
  check_plane_shape(width, height, data_.size());
}

/// Dense optical flow between two frames, in pixels/frame. A point (x, y) of
/// the earlier frame is displaced to (x + u, y + v) in the later one.
///
/// Construction replaces every NaN or infinite sample by 0; the number of
/// replaced samples is kept in sanitized_count().
class FlowField {
 public:
  FlowField(Plane<float> u, Plane<float> v);
  FlowField(int width, int height, std::vector<float> u, std::vector<float> v);

  int width() const noexcept { return u_.width(); }
  int height() const noexcept { return u_.height(); }
  const Plane<float>& u() const noexcept { return u_; }
  const Plane<float>& v() const noexcept { return v_; }
  std::size_t sanitized_count() const noexcept { return sanitized_; }

  friend bool operator==(const FlowField& a, const FlowField& b) {
    return a.u_ == b.u_ && a.v_ == b.v_;
  }

 private:
  Plane<float> u_;
  Plane<float> v_;
  std::size_t sanitized_ = 0;
};

/// Temporally ordered, nonempty run of equally sized flow fields.
class FlowSequence {
 public:
  explicit FlowSequence(std::vector<FlowField> frames);

  std::size_t size() const noexcept { return frames_.size(); }
  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }
  const FlowField& operator[](std::size_t i) const { return frames_[i]; }
  const std::vector<FlowField>& frames() const noexcept { return frames_; }
  auto begin() const noexcept { return frames_.begin(); }
  auto end() const noexcept { return frames_.end(); }

 private:
  std::vector<FlowField> frames_;
};

using GrayFrame = Plane<std::uint8_t>;

struct RgbFrame {
  Plane<std::uint8_t> r;
  Plane<std::uint8_t> g;
  Plane<std::uint8_t> b;

  RgbFrame(Plane<std::uint8_t> red, Plane<std::uint8_t> green, Plane<std::uint8_t> blue);
  /// Replicates a grayscale frame into three identical planes.
  explicit RgbFrame(const GrayFrame& gray);

  int width() const noexcept { return r.width(); }
  int height() const noexcept { return r.height(); }
};

// ITU-R 601 luma, rounded half away from zero.
std::uint8_t luma(std::uint8_t red, std::uint8_t green, std::uint8_t blue) noexcept;

// --- Middlebury .flo ---------------------------------------------------------

inline constexpr float kFloTag = 202021.25f;  // bytes "PIEH"

std::vector<std::uint8_t> encode_flo(const FlowField& field);
FlowField decode_flo(std::span<const std::uint8_t> bytes);

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const FlowField& field, const std::filesystem::path& path);

// --- Raster frames -----------------------------------------------------------

bool is_raster_image(const std::filesystem::path& path);

// Regular files with the given predicate, sorted lexicographically by name.
std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir,
                                                bool (*accept)(const std::filesystem::path&));

GrayFrame read_gray(const std::filesystem::path& path);
RgbFrame read_rgb(const std::filesystem::path& path);

std::vector<GrayFrame> load_gray_sequence(const std::filesystem::path& dir);
std::vector<RgbFrame> load_rgb_sequence(const std::filesystem::path& dir);

void write_png(const GrayFrame& frame, const std::filesystem::path& path);
void write_png(const RgbFrame& frame, const std::filesystem::path& path);

// Writes to a unique temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace dynaflow
