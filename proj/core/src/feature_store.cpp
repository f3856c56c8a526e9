#include "lsf/feature_store.hpp"

#include "lsf/error.hpp"

namespace lsf {
namespace {

constexpr std::uint32_t kVersion = 1;

void put_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
  w.u64(static_cast<std::uint64_t>(m.rows()));
  w.u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
  }
}

Eigen::MatrixXd get_matrix(ByteReader& r) {
  const auto rows = r.u64();
  const auto cols = r.u64();
  if (rows * cols * 8 > r.remaining()) throw DecodeError("matrix larger than payload", r.offset());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.f64();
  }
  return m;
}

void check_version(const Container& c) {
  if (c.version != kVersion) throw DecodeError("unsupported container version " + std::to_string(c.version), 8);
}

}  // namespace

std::vector<std::uint8_t> encode_feature_cache(std::span<const FeatureTensor> tensors) {
  ByteWriter w;
  const auto timesteps = tensors.empty() ? 0 : tensors.front().timesteps();
  const auto channels = tensors.empty() ? 0 : tensors.front().channels();
  w.u64(tensors.size());
  w.u32(static_cast<std::uint32_t>(timesteps));
  w.u32(static_cast<std::uint32_t>(channels));
  for (const auto& t : tensors) {
    if (t.timesteps() != timesteps || t.channels() != channels) {
      throw ParameterError("feature cache tensors must share one shape");
    }
    for (Eigen::Index i = 0; i < timesteps; ++i) {
      for (Eigen::Index c = 0; c < channels; ++c) w.f32(static_cast<float>(t.values(i, c)));
    }
  }
  return pack_container(kFeatureKind, kVersion, w.bytes());
}

std::vector<FeatureTensor> decode_feature_cache(std::span<const std::uint8_t> container_bytes) {
  const auto c = unpack_container(container_bytes, kFeatureKind);
  check_version(c);
  ByteReader r(c.payload);
  const auto n = r.u64();
  const auto timesteps = r.u32();
  const auto channels = r.u32();
  if (n * timesteps * channels * 4 != r.remaining()) {
    throw DecodeError("feature cache payload size does not match its shape", r.offset());
  }
  std::vector<FeatureTensor> out(static_cast<std::size_t>(n));
  for (auto& t : out) {
    t.values.resize(timesteps, channels);
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      for (Eigen::Index ch = 0; ch < t.values.cols(); ++ch) t.values(i, ch) = r.f32();
    }
  }
  return out;
}

void save_matrices(const std::filesystem::path& path, KindTag kind, std::span<const Eigen::MatrixXd> matrices) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(matrices.size()));
  for (const auto& m : matrices) put_matrix(w, m);
  write_file_bytes(path, pack_container(kind, kVersion, w.bytes()));
}

std::vector<Eigen::MatrixXd> load_matrices(const std::filesystem::path& path, KindTag kind) {
  const auto c = unpack_container(read_file_bytes(path), kind);
  check_version(c);
  ByteReader r(c.payload);
  std::vector<Eigen::MatrixXd> out(r.u32());
  for (auto& m : out) m = get_matrix(r);
  r.expect_end();
  return out;
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
  Eigen::MatrixXd meta(1, 2);
  meta(0, 0) = stats.epsilon;
  meta(0, 1) = stats.mode == NormMode::Channel ? 1.0 : 0.0;
  const std::vector<Eigen::MatrixXd> parts{stats.mean, stats.stddev, meta};
  save_matrices(path, kNormKind, parts);
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  auto parts = load_matrices(path, kNormKind);
  if (parts.size() != 3 || parts[2].size() != 2) throw DecodeError("malformed normalization statistics", 0);
  NormStats s;
  s.mean = std::move(parts[0]);
  s.stddev = std::move(parts[1]);
  s.epsilon = parts[2](0, 0);
  s.mode = parts[2](0, 1) != 0.0 ? NormMode::Channel : NormMode::Elementwise;
  return s;
}

}  // namespace lsf
