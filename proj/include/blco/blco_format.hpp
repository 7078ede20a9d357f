#pragma once

#include <filesystem>
#include <iosfwd>

#include "blco/layout.hpp"
#include "blco/types.hpp"

namespace blco {

inline constexpr std::uint64_t kDefaultMaxNnzPerBlock = std::uint64_t{1} << 27;
inline constexpr std::uint64_t kDefaultBatchQuota = 512;  // workgroup 128 x coarsening 4

// One block: all elements sharing a block key, in ALTO order. The re-encoded
// indices are not themselves sorted — ALTO order is the interleaved order.
struct BlcoBlock {
  index_t key = 0;                       // packed stripped bits
  std::vector<index_t> linear_indices;   // re-encoded, < 2^target_bits
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
};

// One work-group span inside a batched launch. Spans never cross a block
// boundary; the final span of a block may be short.
struct BatchSpan {
  std::uint64_t block = 0;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;

  bool operator==(const BatchSpan&) const = default;
};

struct BlcoTensor {
  BitLayout layout;
  std::uint64_t max_nnz_per_block = kDefaultMaxNnzPerBlock;
  std::vector<BlcoBlock> blocks;
  std::uint64_t total_nnz = 0;
  std::uint64_t batch_quota = kDefaultBatchQuota;  // elements per work-group
  std::vector<BatchSpan> batch_table;

  int order() const { return layout.order(); }
  const std::vector<index_t>& dims() const { return layout.dims; }

  bool structurally_equal(const BlcoTensor& o) const;
};

// Construction-stage timing, mirroring the format-generation breakdown.
struct BuildStats {
  double sort_seconds = 0;      // linearization + ALTO sort
  double block_seconds = 0;     // key grouping + capacity splitting
  double reencode_seconds = 0;  // key/field re-encoding
  double batch_seconds = 0;     // batch-table construction
};

// COO -> BLCO: stable ALTO sort, group by block key, split blocks above
// max_nnz_per_block into consecutive chunks, compute batching metadata.
// Deterministic: identical input gives byte-identical serialized output.
BlcoTensor build_blco(const SparseTensorCoo& coo, int target_bits = 64,
                      std::uint64_t max_nnz_per_block = kDefaultMaxNnzPerBlock,
                      BuildStats* stats = nullptr);

// Tiles every block into consecutive spans of at most elements_per_workgroup.
std::vector<BatchSpan> compute_batch_table(const BlcoTensor& t,
                                           std::uint64_t elements_per_workgroup);

// Fixed-width little-endian container:
//   magic "BLCO", version u16, order u16, dims u64[order], target_bits u16,
//   mode_bits u16[order], max_nnz_per_block u64, block count u64, then per
//   block: packed key u64, nnz u64, indices u64[nnz], values f64[nnz].
void serialize_blco(const BlcoTensor& t, std::ostream& out);
void save_blco(const BlcoTensor& t, const std::filesystem::path& path);
BlcoTensor deserialize_blco(std::istream& in);
BlcoTensor load_blco(const std::filesystem::path& path);

struct BlcoHeader {
  std::uint16_t version = 0;
  std::vector<index_t> dims;
  int target_bits = 0;
  std::vector<int> mode_bits;
  std::uint64_t max_nnz_per_block = 0;
  std::uint64_t block_count = 0;

  BitLayout make_layout_checked() const;  // rebuilds and cross-checks mode_bits
};

// Parses the container header only; block payloads stay untouched, so
// arbitrarily large descriptors can be inspected without materializing data.
BlcoHeader read_blco_header(std::istream& in);

// Reads the block record at the current stream position. Validates the key
// range, index width, coordinate bounds and ALTO element order.
BlcoBlock read_blco_block(std::istream& in, const BitLayout& layout);

// De-linearizes every block back to coordinate form (conservation check and
// the verification path).
SparseTensorCoo delinearize_all(const BlcoTensor& t);

}  // namespace blco
