#pragma once

#include <span>
#include <utility>
#include <vector>

#include "blco/common.hpp"

namespace blco {

// Bit-level layout of a linearized tensor index.
//
// The interleaved (ALTO-order) index assigns bits round-robin from the LSB:
// level k = 0,1,2,... takes bit k of mode 1, mode 2, ..., skipping modes with
// fewer than k+1 bits. When the total exceeds target_bits, the uppermost
// `stripped_bits` positions become the block key and the remaining bits are
// re-encoded into contiguous per-mode fields, mode 1 at the LSB, so a
// coordinate is recovered with one shift and one mask per mode.
struct BitLayout {
  std::vector<index_t> dims;
  std::vector<int> mode_bits;   // b_n = ceil(log2 I_n), 0 when I_n == 1
  int total_bits = 0;           // sum of mode_bits
  int target_bits = 64;         // encoding budget for the re-encoded index
  int stripped_bits = 0;        // s = max(0, total_bits - target_bits)

  // LSB -> MSB: (mode, bit-position-within-mode) per interleaved position.
  std::vector<std::pair<int, int>> interleave_map;

  std::vector<int> rem_bits;     // per-mode bits kept in the re-encoded index
  std::vector<int> field_shift;  // contiguous-field shift per mode
  std::vector<index_t> field_mask;

  // Per mode: interleaved position of coordinate bit k, k < mode_bits[n].
  std::vector<std::vector<int>> mode_positions;
  // Per mode: (bit within packed key, bit within the mode's upper coordinate
  // part) for each stripped bit of that mode.
  std::vector<std::vector<std::pair<int, int>>> key_slices;

  int order() const { return static_cast<int>(dims.size()); }

  // Upper coordinate bits of `mode` carried by a packed block key.
  index_t key_upper(int mode, index_t packed_key) const {
    index_t up = 0;
    for (auto [kbit, cbit] : key_slices[mode]) up |= ((packed_key >> kbit) & 1u) << cbit;
    return up;
  }

  // Per-mode coordinate base contributed by a block key:
  // coord = base[mode] | field. Fields never overlap the base.
  std::vector<index_t> block_base(index_t packed_key) const;
};

// Builds the layout for the given mode lengths and encoding budget.
// target_bits must lie in [1, 64]; all dims must be >= 1.
BitLayout make_layout(std::span<const index_t> dims, int target_bits = 64);

// Interleaved linear index of a 0-based coordinate tuple.
alto_t linearize(const BitLayout& layout, std::span<const index_t> coords);

struct SplitIndex {
  index_t block_key = 0;   // packed uppermost stripped_bits of the alto index
  index_t reencoded = 0;   // contiguous per-mode fields, mode 1 at LSB
};

// Splits a linear index into its block key and re-encoded remainder.
SplitIndex split_block_key(const BitLayout& layout, alto_t alto);

// Fast path: key + re-encoded index straight from coordinates. Equal to
// split_block_key(layout, linearize(layout, coords)).
SplitIndex encode_coords(const BitLayout& layout, std::span<const index_t> coords);

// Exact inverse of encode_coords / linearize∘split_block_key.
void delinearize(const BitLayout& layout, index_t reencoded, index_t block_key,
                 std::span<index_t> coords_out);

// Interleaved remainder (the alto index with its key bits cleared) rebuilt
// from a re-encoded index; used to check ALTO element order inside a block.
alto_t interleaved_remainder(const BitLayout& layout, index_t reencoded);

}  // namespace blco
