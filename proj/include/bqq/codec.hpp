#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bqq/methods.hpp"

namespace bqq::bench {

// Code container, little-endian:
//   "BQQC", u16 version (1), u8 method, u8 flags (bit 0: standardization record present)
//   u32 rows, u32 cols, u32 group_rows, u32 group_cols
//   [f64 mean, f64 std, u8 constant]     if flags bit 0
//   one payload per block in tiling order
//
// Payloads (scalars are f32, bit planes packed row-major LSB-first and padded
// to a byte per matrix):
//   bqq     u32 l, u32 p, (r, s, t) per stack, u_total, then Y_1, Z_1, ..., Y_p, Z_p
//   uq      u8 bits, f32 scale, f32 bias, indices packed at `bits` bits each
//   bcq     u32 p, p scales, p sign planes (bit set means +1)
//   svd     u32 rank, left (m x rank) then right (rank x n) as f32
//   svd_uq  u32 rank, uq payload of left, uq payload of right
//   vq      u32 vec_dim, u32 k, codebook (k x vec_dim f32), assignments packed at index_bits(k)
//   vq_uq   u32 vec_dim, u32 k, uq payload of the codebook, packed assignments
//   e8      u8 scale_bits, u32 rounds; per round one u8 index per 8-vector, then
//           the uq payload of the scales (scale_bits > 0) or one f32 per vector
//
// Decoded codes carry the f32-rounded scalars; per-stack BQQ biases are not
// stored (u_total holds their sum), so decoded stacks have u = 0.

std::vector<std::uint8_t> encode(const QuantizedMatrix& q);
QuantizedMatrix decode(std::span<const std::uint8_t> bytes);

void save_code(const std::filesystem::path& path, const QuantizedMatrix& q);
QuantizedMatrix load_code(const std::filesystem::path& path);

// Fixed-width little-endian bit stream helpers (LSB-first).
std::vector<std::uint8_t> pack_bits(std::span<const std::uint32_t> values, std::uint32_t width);
std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count, std::uint32_t width);
inline std::size_t packed_size(std::size_t count, std::uint32_t width) { return (count * width + 7) / 8; }

} // namespace bqq::bench
