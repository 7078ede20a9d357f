#include "blco/layout.hpp"

#include <algorithm>
#include <string>

namespace blco {

std::vector<index_t> BitLayout::block_base(index_t packed_key) const {
  std::vector<index_t> base(dims.size());
  for (int m = 0; m < order(); ++m)
    base[m] = key_upper(m, packed_key) << rem_bits[m];
  return base;
}

BitLayout make_layout(std::span<const index_t> dims, int target_bits) {
  if (dims.empty()) throw FormatError("layout: at least one mode required");
  if (target_bits < 1 || target_bits > 64)
    throw FormatError("layout: target_bits must lie in [1, 64], got " +
                      std::to_string(target_bits));

  BitLayout l;
  l.dims.assign(dims.begin(), dims.end());
  l.target_bits = target_bits;
  const int order = l.order();

  int max_bits = 0;
  for (int m = 0; m < order; ++m) {
    if (dims[m] < 1) throw FormatError("layout: mode length must be >= 1");
    l.mode_bits.push_back(bits_for_extent(dims[m]));
    max_bits = std::max(max_bits, l.mode_bits.back());
  }

  // Round-robin from the LSB, skipping exhausted modes.
  for (int k = 0; k < max_bits; ++k)
    for (int m = 0; m < order; ++m)
      if (k < l.mode_bits[m]) l.interleave_map.emplace_back(m, k);
  l.total_bits = static_cast<int>(l.interleave_map.size());
  if (l.total_bits > 128)
    throw FormatError("layout: tensor needs " + std::to_string(l.total_bits) +
                      " index bits, more than the 128 supported");

  l.stripped_bits = std::max(0, l.total_bits - l.target_bits);

  l.rem_bits.assign(order, 0);
  for (int p = 0; p < l.total_bits - l.stripped_bits; ++p)
    ++l.rem_bits[l.interleave_map[p].first];
  // Within a mode the interleave positions are bit-ordered, so the stripped
  // (top) entries are exactly each mode's uppermost bits.

  int shift = 0;
  for (int m = 0; m < order; ++m) {
    l.field_shift.push_back(shift);
    l.field_mask.push_back(l.rem_bits[m] == 0 ? 0 : (~index_t{0} >> (64 - l.rem_bits[m])));
    shift += l.rem_bits[m];
  }
  if (shift == 0 && l.total_bits > 0)
    throw FormatError("layout: every index bit stripped; no addressable field remains");

  l.mode_positions.assign(order, {});
  for (int m = 0; m < order; ++m) l.mode_positions[m].resize(l.mode_bits[m]);
  l.key_slices.assign(order, {});
  for (int p = 0; p < l.total_bits; ++p) {
    auto [m, k] = l.interleave_map[p];
    l.mode_positions[m][k] = p;
    if (p >= l.total_bits - l.stripped_bits)
      l.key_slices[m].emplace_back(p - (l.total_bits - l.stripped_bits), k - l.rem_bits[m]);
  }
  return l;
}

alto_t linearize(const BitLayout& layout, std::span<const index_t> coords) {
  if (coords.size() != layout.dims.size())
    throw FormatError("linearize: coordinate count does not match order");
  alto_t alto = 0;
  for (int m = 0; m < layout.order(); ++m) {
    const index_t c = coords[m];
    if (c >= layout.dims[m]) throw FormatError("linearize: coordinate out of range");
    for (int k = 0; k < layout.mode_bits[m]; ++k)
      alto |= static_cast<alto_t>((c >> k) & 1u) << layout.mode_positions[m][k];
  }
  return alto;
}

SplitIndex split_block_key(const BitLayout& layout, alto_t alto) {
  SplitIndex s;
  const int low = layout.total_bits - layout.stripped_bits;
  if (layout.stripped_bits > 0) s.block_key = static_cast<index_t>(alto >> low);
  for (int p = 0; p < low; ++p) {
    if ((alto >> p) & 1u) {
      auto [m, k] = layout.interleave_map[p];
      s.reencoded |= index_t{1} << (layout.field_shift[m] + k);
    }
  }
  return s;
}

SplitIndex encode_coords(const BitLayout& layout, std::span<const index_t> coords) {
  SplitIndex s;
  for (int m = 0; m < layout.order(); ++m) {
    const index_t c = coords[m];
    if (c >= layout.dims[m]) throw FormatError("encode: coordinate out of range");
    s.reencoded |= (c & layout.field_mask[m]) << layout.field_shift[m];
    for (auto [kbit, cbit] : layout.key_slices[m])
      s.block_key |= ((c >> (layout.rem_bits[m] + cbit)) & 1u) << kbit;
  }
  return s;
}

void delinearize(const BitLayout& layout, index_t reencoded, index_t block_key,
                 std::span<index_t> coords_out) {
  for (int m = 0; m < layout.order(); ++m)
    coords_out[m] = (layout.key_upper(m, block_key) << layout.rem_bits[m]) |
                    ((reencoded >> layout.field_shift[m]) & layout.field_mask[m]);
}

alto_t interleaved_remainder(const BitLayout& layout, index_t reencoded) {
  alto_t alto = 0;
  const int low = layout.total_bits - layout.stripped_bits;
  for (int p = 0; p < low; ++p) {
    auto [m, k] = layout.interleave_map[p];
    alto |= static_cast<alto_t>((reencoded >> (layout.field_shift[m] + k)) & 1u) << p;
  }
  return alto;
}

}  // namespace blco
