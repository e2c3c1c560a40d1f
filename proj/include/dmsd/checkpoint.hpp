// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoints: "DMSDCKPT", u32 version, u32 entry count, then per entry
// u16 name length + name, u32 ndim, u32 dims[ndim], float32 values; a u64
// step counter closes the file. All integers little-endian.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmsd/params.hpp"

namespace dmsd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    /// Parameter entries; values are held at float32 precision.
    ParamStore params;
    /// Config snapshot (format_config text) of the run that produced it.
    std::string config_text;
    std::uint64_t step = 0;
};

/// Copies a store into checkpoint form, rounding every value to float32 so
/// the in-memory checkpoint equals what a save/load cycle yields.
ParamStore checkpoint_params(const ParamStore& store);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
/// Throws FormatError with the failing offset for corrupt input.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws StructuralError unless the entries are exactly the ones a model with
/// these sizes has (encoder, decoder and mixer blocks plus the head), and the
/// mixer matches the encoder entry for entry.
void check_checkpoint_shapes(const Checkpoint& ckpt, std::size_t dim, std::size_t hidden, std::size_t num_classes);

}  // namespace dmsd
