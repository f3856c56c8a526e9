#pragma once

// Little-endian binary container shared by model checkpoints, feature caches and
// SVM models:
//
//   offset  size  field
//   0       4     magic "LSFB"
//   4       4     kind tag (e.g. "LSTM", "SVMM", "FEAT", "VECS", "NORM")
//   8       4     u32 format version
//   12      8     u64 payload length N
//   20      N     payload
//   20+N    32    SHA-256 of the payload
//
// Every multi-byte number inside payloads is little-endian as well.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsf {

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  const std::vector<std::uint8_t>& bytes() const& { return bytes_; }
  std::vector<std::uint8_t> bytes() && { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; throws DecodeError with the failing offset.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  float f32();
  double f64();
  std::string str();
  std::span<const std::uint8_t> raw(std::size_t n);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

using KindTag = std::array<char, 4>;

constexpr KindTag make_kind(const char (&s)[5]) { return {s[0], s[1], s[2], s[3]}; }

struct Container {
  KindTag kind{};
  std::uint32_t version = 0;
  std::vector<std::uint8_t> payload;
  std::string digest;  // hex SHA-256 of payload
};

std::vector<std::uint8_t> pack_container(KindTag kind, std::uint32_t version,
                                         std::span<const std::uint8_t> payload);
/// Validates magic, kind, length and digest.
Container unpack_container(std::span<const std::uint8_t> bytes, KindTag expected_kind);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_text(const std::filesystem::path& path, std::string_view text);

}  // namespace lsf
