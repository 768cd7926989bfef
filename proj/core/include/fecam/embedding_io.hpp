#pragma once

#include "fecam/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fecam {

// Binary embedding file, little-endian:
//   magic "FEMB" | version u16 | dim u32 | row_count u32 | label_domain u32
//   row_count x (label u32 | domain u32 | f32 x dim)
// label_domain is one past the largest label (0 for an empty file).
inline constexpr std::string_view kEmbeddingMagic = "FEMB";
inline constexpr std::uint16_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 18;
inline constexpr std::uint32_t kMaxEmbeddingDim = 1u << 24;

/// Values are rounded to single precision; domains default to 0.
std::vector<std::uint8_t> encode_embeddings(const FeatureMatrix& batch);
FeatureMatrix decode_embeddings(std::span<const std::uint8_t> bytes);

/// CSV twin of the binary format: header `label,domain,f0,...,f{D-1}`.
/// Parsed values are rounded to single precision, like the binary file.
std::string format_embeddings_csv(const FeatureMatrix& batch);
FeatureMatrix parse_embeddings_csv(std::string_view text);

void write_embeddings(const std::filesystem::path& path, const FeatureMatrix& batch);
void write_embeddings_csv(const std::filesystem::path& path, const FeatureMatrix& batch);

/// Reads either format, chosen by the leading magic bytes.
FeatureMatrix read_embeddings(const std::filesystem::path& path);

}  // namespace fecam
