#include "lsf/container.hpp"

#include <openssl/evp.h>

#include <bit>
#include <fstream>
#include <memory>
#include <sstream>

#include "lsf/error.hpp"

namespace lsf {
namespace {

constexpr std::array<char, 4> kMagic{'L', 'S', 'F', 'B'};
constexpr std::size_t kDigestBytes = 32;
constexpr std::size_t kFixedHeader = 20;

std::array<std::uint8_t, kDigestBytes> sha256_raw(std::span<const std::uint8_t> bytes) {
  std::array<std::uint8_t, kDigestBytes> out{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != kDigestBytes) {
    throw Error("SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0x0F]);
  }
  return s;
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) { return to_hex(sha256_raw(bytes)); }

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw DecodeError("unexpected end of data", pos_);
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const auto n = u32();
  auto bytes = raw(n);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto s = data_.subspan(pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_end() const {
  if (pos_ != data_.size()) throw DecodeError("trailing bytes after payload", pos_);
}

std::vector<std::uint8_t> pack_container(KindTag kind, std::uint32_t version,
                                         std::span<const std::uint8_t> payload) {
  ByteWriter w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  for (char c : kind) w.u8(static_cast<std::uint8_t>(c));
  w.u32(version);
  w.u64(payload.size());
  w.raw(payload);
  w.raw(sha256_raw(payload));
  return std::move(w).bytes();
}

Container unpack_container(std::span<const std::uint8_t> bytes, KindTag expected_kind) {
  ByteReader r(bytes);
  for (char c : kMagic) {
    if (r.u8() != static_cast<std::uint8_t>(c)) throw DecodeError("bad container magic", r.offset() - 1);
  }
  Container c;
  for (auto& k : c.kind) k = static_cast<char>(r.u8());
  if (c.kind != expected_kind) {
    throw DecodeError("container kind '" + std::string(c.kind.begin(), c.kind.end()) + "' where '" +
                          std::string(expected_kind.begin(), expected_kind.end()) + "' was expected",
                      4);
  }
  c.version = r.u32();
  const auto n = r.u64();
  if (n > r.remaining()) throw DecodeError("payload length exceeds file size", kFixedHeader);
  auto payload = r.raw(static_cast<std::size_t>(n));
  auto stored = r.raw(kDigestBytes);
  r.expect_end();
  const auto actual = sha256_raw(payload);
  if (!std::equal(actual.begin(), actual.end(), stored.begin())) {
    throw DecodeError("payload digest mismatch", kFixedHeader + payload.size());
  }
  c.payload.assign(payload.begin(), payload.end());
  c.digest = to_hex(actual);
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_file_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace lsf
