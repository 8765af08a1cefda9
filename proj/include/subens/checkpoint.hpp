#pragma once

#include <cstdint>
#include <string>

#include "subens/params.hpp"

namespace subens {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers and floats little-endian:
//   "SUBENSCK"            8-byte magic
//   u32 version
//   u64 seed
//   u32 entry count
//   per entry: u32 layer, u8 frozen, weight tensor, bias tensor
//   tensor: u32 rank, rank x u64 extents, product(extents) x f64
void write_checkpoint(const std::string& path, const ParamStore& params);
ParamStore read_checkpoint(const std::string& path);

}  // namespace subens
