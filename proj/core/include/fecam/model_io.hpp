#pragma once

#include "fecam/classifier.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace fecam {

// Model file, little-endian:
//   magic "FECM" | version u16 | mode u8 | D u32 | class_count u32
//   class_count x (class_id u32 | count u32 | prototype f32 x D | payload)
// payload: lower triangle f32 x D(D+1)/2 (per_class), variances f32 x D
// (diagonal), nothing otherwise. Tagged trailer sections follow, each
// "TAG" u32-length body: CONF (classifier settings), COMN (common matrix),
// SRCN (covariance sample counts), PSCR (scored prototypes), TLOG (tasks).
// Statistics are stored raw; conditioning is recomputed on load.
inline constexpr std::string_view kModelMagic = "FECM";
inline constexpr std::uint16_t kModelVersion = 1;

std::vector<std::uint8_t> serialize_model(const FeCAMModel& model);
FeCAMModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const FeCAMModel& model);
FeCAMModel load_model(const std::filesystem::path& path);

}  // namespace fecam
