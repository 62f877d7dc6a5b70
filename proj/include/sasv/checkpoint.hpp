#pragma once

// Fusion-network checkpoints (little-endian):
//   "SASV" | version u16 = 1 | cm_dim u32 | m u32 | num_hidden u32 | hidden u32 x num_hidden |
//   f64 tensors: each CM layer W (row-major) then b, then prediction layer W then b |
//   has_adam u8 | [adam step u64 | first moments | second moments, same tensor order]

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sasv/binary_io.hpp"
#include "sasv/fusionnet.hpp"

namespace sasv {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct FusionCheckpoint {
    FusionParams params;
    AdamState adam; // empty when absent
};

std::string serialize_checkpoint(const FusionCheckpoint& checkpoint);
FusionCheckpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const FusionCheckpoint& checkpoint);
FusionCheckpoint load_checkpoint(const std::filesystem::path& path);

namespace detail {

void write_tensors(io::ByteWriter& out, const std::vector<std::span<double>>& tensors);
void read_tensors(io::ByteReader& in, const std::vector<std::span<double>>& tensors);
void write_adam(io::ByteWriter& out, const AdamState& adam);
/// Reads the optional Adam trailer shaped like `shape`.
AdamState read_adam(io::ByteReader& in, const std::vector<std::span<double>>& shape);

} // namespace detail

} // namespace sasv
