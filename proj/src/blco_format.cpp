#include "blco/blco_format.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <numeric>

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace blco {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void write_raw(std::ostream& out, const std::vector<T>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <class T>
T read_raw(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("blco: truncated payload");
  return v;
}

template <class T>
void read_raw(std::istream& in, std::vector<T>& v, std::size_t n) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw IoError("blco: truncated payload");
}

}  // namespace

bool BlcoTensor::structurally_equal(const BlcoTensor& o) const {
  if (layout.dims != o.layout.dims || layout.target_bits != o.layout.target_bits ||
      max_nnz_per_block != o.max_nnz_per_block || total_nnz != o.total_nnz ||
      blocks.size() != o.blocks.size())
    return false;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (blocks[b].key != o.blocks[b].key ||
        blocks[b].linear_indices != o.blocks[b].linear_indices ||
        blocks[b].values != o.blocks[b].values)
      return false;
  return true;
}

BlcoTensor build_blco(const SparseTensorCoo& coo, int target_bits,
                      std::uint64_t max_nnz_per_block, BuildStats* stats) {
  coo.validate();
  if (max_nnz_per_block < 1) throw FormatError("blco: max_nnz_per_block must be >= 1");

  BlcoTensor t;
  t.layout = make_layout(coo.dims, target_bits);
  t.max_nnz_per_block = max_nnz_per_block;
  t.total_nnz = coo.nnz();
  const std::size_t nnz = coo.nnz();

  auto t0 = std::chrono::steady_clock::now();
  std::vector<alto_t> altos(nnz);
  std::vector<index_t> coord(coo.order());
  for (std::size_t e = 0; e < nnz; ++e) {
    for (int m = 0; m < coo.order(); ++m) coord[m] = coo.indices[m][e];
    altos[e] = linearize(t.layout, coord);
  }
  std::vector<std::uint64_t> perm(nnz);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::uint64_t a, std::uint64_t b) { return altos[a] < altos[b]; });
  if (stats) stats->sort_seconds = seconds_since(t0);

  // Group runs of equal key, then split oversized runs into consecutive
  // chunks that keep the ALTO order across the split boundary.
  t0 = std::chrono::steady_clock::now();
  const int low_bits = t.layout.total_bits - t.layout.stripped_bits;
  auto key_of = [&](alto_t a) {
    return t.layout.stripped_bits == 0 ? index_t{0} : static_cast<index_t>(a >> low_bits);
  };
  struct Run {
    index_t key;
    std::size_t begin, end;
  };
  std::vector<Run> runs;
  for (std::size_t e = 0; e < nnz;) {
    if (e + 1 < nnz && altos[perm[e]] == altos[perm[e + 1]])
      throw FormatError("blco: duplicate coordinate tuple in input");
    const index_t key = key_of(altos[perm[e]]);
    std::size_t f = e + 1;
    while (f < nnz && key_of(altos[perm[f]]) == key) {
      if (altos[perm[f]] == altos[perm[f - 1]])
        throw FormatError("blco: duplicate coordinate tuple in input");
      ++f;
    }
    for (std::size_t s = e; s < f; s += max_nnz_per_block)
      runs.push_back({key, s, std::min(f, s + max_nnz_per_block)});
    e = f;
  }
  if (stats) stats->block_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  t.blocks.reserve(runs.size());
  for (const Run& r : runs) {
    BlcoBlock blk;
    blk.key = r.key;
    blk.linear_indices.reserve(r.end - r.begin);
    blk.values.reserve(r.end - r.begin);
    for (std::size_t e = r.begin; e < r.end; ++e) {
      blk.linear_indices.push_back(split_block_key(t.layout, altos[perm[e]]).reencoded);
      blk.values.push_back(coo.values[perm[e]]);
    }
    t.blocks.push_back(std::move(blk));
  }
  if (stats) stats->reencode_seconds = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  t.batch_quota = kDefaultBatchQuota;
  t.batch_table = compute_batch_table(t, t.batch_quota);
  if (stats) stats->batch_seconds = seconds_since(t0);
  return t;
}

std::vector<BatchSpan> compute_batch_table(const BlcoTensor& t,
                                           std::uint64_t elements_per_workgroup) {
  if (elements_per_workgroup < 1)
    throw FormatError("blco: elements_per_workgroup must be >= 1");
  std::vector<BatchSpan> table;
  for (std::uint64_t b = 0; b < t.blocks.size(); ++b) {
    const std::uint64_t n = t.blocks[b].nnz();
    for (std::uint64_t off = 0; off < n; off += elements_per_workgroup)
      table.push_back({b, off, std::min(elements_per_workgroup, n - off)});
  }
  return table;
}

void serialize_blco(const BlcoTensor& t, std::ostream& out) {
  out.write("BLCO", 4);
  write_raw<std::uint16_t>(out, 1);
  write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(t.order()));
  write_raw(out, t.layout.dims);
  write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(t.layout.target_bits));
  for (int b : t.layout.mode_bits) write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(b));
  write_raw<std::uint64_t>(out, t.max_nnz_per_block);
  write_raw<std::uint64_t>(out, t.blocks.size());
  for (const BlcoBlock& blk : t.blocks) {
    write_raw<std::uint64_t>(out, blk.key);
    write_raw<std::uint64_t>(out, blk.nnz());
    write_raw(out, blk.linear_indices);
    write_raw(out, blk.values);
  }
  if (!out) throw IoError("blco: write failed");
}

void save_blco(const BlcoTensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  serialize_blco(t, out);
}

BlcoHeader read_blco_header(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "BLCO", 4) != 0) throw FormatError("blco: bad magic");
  BlcoHeader h;
  h.version = read_raw<std::uint16_t>(in);
  if (h.version != 1)
    throw FormatError("blco: unsupported format version " + std::to_string(h.version));
  const auto order = read_raw<std::uint16_t>(in);
  if (order < 1) throw FormatError("blco: order must be >= 1");
  read_raw(in, h.dims, order);
  h.target_bits = read_raw<std::uint16_t>(in);
  std::vector<std::uint16_t> mb;
  read_raw(in, mb, order);
  h.mode_bits.assign(mb.begin(), mb.end());
  h.max_nnz_per_block = read_raw<std::uint64_t>(in);
  h.block_count = read_raw<std::uint64_t>(in);
  return h;
}

BitLayout BlcoHeader::make_layout_checked() const {
  BitLayout layout = make_layout(dims, target_bits);
  if (layout.mode_bits != mode_bits)
    throw FormatError("blco: stored mode bit widths do not match dims");
  if (max_nnz_per_block < 1) throw FormatError("blco: max_nnz_per_block must be >= 1");
  return layout;
}

BlcoBlock read_blco_block(std::istream& in, const BitLayout& layout) {
  BlcoBlock blk;
  blk.key = read_raw<std::uint64_t>(in);
  if (layout.stripped_bits < 64 && blk.key >= (index_t{1} << layout.stripped_bits))
    throw FormatError("blco: block key out of range");
  const auto n = read_raw<std::uint64_t>(in);
  read_raw(in, blk.linear_indices, n);
  read_raw(in, blk.values, n);

  const int field_bits = layout.total_bits - layout.stripped_bits;
  const index_t field_limit = field_bits >= 64 ? ~index_t{0} : (index_t{1} << field_bits);
  std::vector<index_t> coord(layout.dims.size());
  alto_t prev = 0;
  for (std::size_t e = 0; e < blk.linear_indices.size(); ++e) {
    const index_t idx = blk.linear_indices[e];
    if (field_bits < 64 && idx >= field_limit)
      throw FormatError("blco: re-encoded index exceeds field width");
    delinearize(layout, idx, blk.key, coord);
    for (int m = 0; m < layout.order(); ++m)
      if (coord[m] >= layout.dims[m])
        throw FormatError("blco: element de-linearizes outside dims");
    const alto_t rem = interleaved_remainder(layout, idx);
    if (e > 0 && rem <= prev) throw FormatError("blco: elements not in ascending ALTO order");
    prev = rem;
  }
  return blk;
}

BlcoTensor deserialize_blco(std::istream& in) {
  const BlcoHeader h = read_blco_header(in);
  BlcoTensor t;
  t.layout = h.make_layout_checked();
  t.max_nnz_per_block = h.max_nnz_per_block;
  t.blocks.reserve(h.block_count);
  index_t prev_key = 0;
  for (std::uint64_t b = 0; b < h.block_count; ++b) {
    BlcoBlock blk = read_blco_block(in, t.layout);
    if (blk.nnz() == 0) throw FormatError("blco: empty block record");
    if (blk.nnz() > t.max_nnz_per_block)
      throw FormatError("blco: block exceeds max_nnz_per_block");
    if (b > 0 && blk.key < prev_key) throw FormatError("blco: blocks not in ascending key order");
    prev_key = blk.key;
    t.total_nnz += blk.nnz();
    t.blocks.push_back(std::move(blk));
  }
  t.batch_quota = kDefaultBatchQuota;
  t.batch_table = compute_batch_table(t, t.batch_quota);
  return t;
}

BlcoTensor load_blco(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return deserialize_blco(in);
}

SparseTensorCoo delinearize_all(const BlcoTensor& t) {
  SparseTensorCoo coo;
  coo.dims = t.dims();
  coo.indices.assign(t.order(), {});
  for (auto& idx : coo.indices) idx.reserve(t.total_nnz);
  coo.values.reserve(t.total_nnz);
  std::vector<index_t> coord(t.order());
  for (const BlcoBlock& blk : t.blocks) {
    for (std::size_t e = 0; e < blk.nnz(); ++e) {
      delinearize(t.layout, blk.linear_indices[e], blk.key, coord);
      for (int m = 0; m < t.order(); ++m) coo.indices[m].push_back(coord[m]);
      coo.values.push_back(blk.values[e]);
    }
  }
  return coo;
}

}  // namespace blco
