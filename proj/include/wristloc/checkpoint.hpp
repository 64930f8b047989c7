#pragma once

#include "wristloc/model.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>

namespace wristloc::model {

/// Checkpoint layout. Every integer and double is little-endian; doubles are
/// IEEE-754 binary64 bit patterns.
///
///   magic          4 bytes  "WLCK"
///   version        u32      kCheckpointVersion
///   prompt version u32      data::kPromptTemplateVersion at save time
///   kind           u8       1 = adapted model, 2 = linear probe
///   backbone       i32 x 6  image_width, image_height, hue_channels,
///                           text_dim, numeric_dim, text_buckets
///                  f64 x 4  hue_sharpness, chroma_gate, bright_level, dark_level
///                  u64      seed
///   model config   (kind 1 only)
///                  i32 x 3  lora_rank, hidden, quant_block
///                  f64 x 3  lora_alpha, fusion_mixing, fusion_shift
///                  u64      seed
///   tensor count   u32
///   tensors        name (u16 length + bytes), dtype u8 (0 = f64, 1 = i8),
///                  rows u32, cols u32, rows * cols values in row-major order
///
/// Tensors are written in a fixed order and read back by name.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint8_t { Position = 1, LinearProbe = 2 };

void write_checkpoint(std::ostream& out, const PositionModel& m);
void write_checkpoint(std::ostream& out, const LinearProbe& m);
void save_checkpoint(const std::filesystem::path& path, const PositionModel& m);
void save_checkpoint(const std::filesystem::path& path, const LinearProbe& m);

/// Throws CheckpointError for a malformed file, VersionError for a format or
/// prompt-template version this build does not understand, IOFailure.
CheckpointKind checkpoint_kind(const std::filesystem::path& path);
PositionModel load_position_model(const std::filesystem::path& path);
LinearProbe load_linear_probe(const std::filesystem::path& path);
std::unique_ptr<PositionRegressor> load_regressor(const std::filesystem::path& path);

PositionModel read_position_model(std::istream& in);
LinearProbe read_linear_probe(std::istream& in);

}  // namespace wristloc::model
