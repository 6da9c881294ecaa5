#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dynaflow {

// Minimal NumPy .npy (format 1.0) support for C-ordered little-endian float64
// arrays, used to persist raw pooled planes.
struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

std::vector<std::uint8_t> encode_npy(std::span<const std::size_t> shape, std::span<const double> data);
NpyArray decode_npy(std::span<const std::uint8_t> bytes);

void write_npy(const std::filesystem::path& path, std::span<const std::size_t> shape, std::span<const double> data);
NpyArray read_npy(const std::filesystem::path& path);

}  // namespace dynaflow
