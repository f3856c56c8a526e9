#pragma once

// On-disk caches built on the LSFB container (see container.hpp).
//
// Feature cache, kind "FEAT", version 1, payload:
//   u64 n_tensors, u32 timesteps, u32 channels,
//   then n_tensors * timesteps * channels float32 values, tensor-major,
//   each tensor row-major [timestep][channel].
//
// Dense matrix, kind chosen by the caller (e.g. "VECS", "NORM"), version 1, payload:
//   u32 count of matrices, then per matrix u64 rows, u64 cols, rows*cols float64 row-major.

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <vector>

#include "lsf/container.hpp"
#include "lsf/preprocess.hpp"

namespace lsf {

inline constexpr KindTag kFeatureKind = make_kind("FEAT");
inline constexpr KindTag kVectorsKind = make_kind("VECS");
inline constexpr KindTag kNormKind = make_kind("NORM");

std::vector<std::uint8_t> encode_feature_cache(std::span<const FeatureTensor> tensors);
std::vector<FeatureTensor> decode_feature_cache(std::span<const std::uint8_t> container_bytes);

void save_matrices(const std::filesystem::path& path, KindTag kind, std::span<const Eigen::MatrixXd> matrices);
std::vector<Eigen::MatrixXd> load_matrices(const std::filesystem::path& path, KindTag kind);

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& path);

}  // namespace lsf
