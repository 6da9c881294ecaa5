#include "dynaflow/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>

#include "dynaflow/error.hpp"
#include "dynaflow/flow_core.hpp"

namespace dynaflow {

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;
constexpr std::size_t kPreambleLen = 10;  // magic + version + header length

std::string shape_literal(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    out += std::to_string(shape[i]);
    if (i + 1 < shape.size() || shape.size() == 1) out += ",";
    if (i + 1 < shape.size()) out += " ";
  }
  return out + ")";
}

std::size_t element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::vector<std::uint8_t> encode_npy(std::span<const std::size_t> shape, std::span<const double> data) {
  if (element_count(shape) != data.size()) throw Error(ErrorKind::Dimension, "npy shape does not match data length");
  std::string header = "{'descr': '<f8', 'fortran_order': False, 'shape': " + shape_literal(shape) + ", }";
  const std::size_t unpadded = kPreambleLen + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<std::uint8_t>(header.size() & 0xff));
  out.push_back(static_cast<std::uint8_t>(header.size() >> 8));
  out.insert(out.end(), header.begin(), header.end());
  for (double d : data) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int shift = 0; shift < 64; shift += 8) out.push_back(static_cast<std::uint8_t>(bits >> shift));
  }
  return out;
}

NpyArray decode_npy(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreambleLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0) {
    throw Error(ErrorKind::Format, "not an npy file");
  }
  if (bytes[6] != 1) throw Error(ErrorKind::Format, "unsupported npy version");
  const std::size_t header_len = bytes[8] | (static_cast<std::size_t>(bytes[9]) << 8);
  if (bytes.size() < kPreambleLen + header_len) throw Error(ErrorKind::Length, "npy header truncated");
  const std::string header(reinterpret_cast<const char*>(bytes.data()) + kPreambleLen, header_len);
  if (header.find("'descr': '<f8'") == std::string::npos || header.find("'fortran_order': False") == std::string::npos) {
    throw Error(ErrorKind::Format, "only C-ordered little-endian float64 npy arrays are supported");
  }
  const auto open = header.find('(', header.find("'shape'"));
  const auto close = header.find(')', open);
  if (open == std::string::npos || close == std::string::npos) throw Error(ErrorKind::Format, "npy shape missing");

  NpyArray array;
  std::size_t pos = open + 1;
  while (pos < close) {
    while (pos < close && (header[pos] == ' ' || header[pos] == ',')) ++pos;
    if (pos >= close) break;
    std::size_t used = 0;
    array.shape.push_back(std::stoull(header.substr(pos, close - pos), &used));
    pos += used;
  }
  const std::size_t n = element_count(array.shape);
  const std::size_t offset = kPreambleLen + header_len;
  if (bytes.size() != offset + 8 * n) throw Error(ErrorKind::Length, "npy payload length mismatch");
  array.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[offset + 8 * i + k]) << (8 * k);
    array.data[i] = std::bit_cast<double>(bits);
  }
  return array;
}

void write_npy(const std::filesystem::path& path, std::span<const std::size_t> shape, std::span<const double> data) {
  write_file_atomic(path, encode_npy(shape, data));
}

NpyArray read_npy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_npy(bytes);
}

}  // namespace dynaflow
