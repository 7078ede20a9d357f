#pragma once

#include <filesystem>
#include <fstream>
#include <memory>

#include "blco/mttkrp.hpp"

namespace blco {

// Simulated device memory budget for out-of-memory execution.
struct DeviceBudget {
  std::uint64_t capacity_bytes = 0;
  int num_queues = 4;                  // transfer/compute queues, typically <= 8
  std::uint64_t reservation_bytes = 0; // per-queue staging; 0 = auto from capacity
  double injected_transfer_latency_s = 0.0;  // makes overlap observable in tests
};

// Yields BLCO blocks in ascending key order without requiring the whole
// tensor in memory.
class BlockSource {
 public:
  virtual ~BlockSource() = default;
  virtual const BitLayout& layout() const = 0;
  virtual std::uint64_t block_count() const = 0;
  virtual std::uint64_t max_nnz_per_block() const = 0;
  // Next block, or false at end. Called from one thread.
  virtual bool next(BlcoBlock& out) = 0;
};

class MemoryBlockSource final : public BlockSource {
 public:
  explicit MemoryBlockSource(const BlcoTensor& t) : t_(&t) {}
  const BitLayout& layout() const override { return t_->layout; }
  std::uint64_t block_count() const override { return t_->blocks.size(); }
  std::uint64_t max_nnz_per_block() const override { return t_->max_nnz_per_block; }
  bool next(BlcoBlock& out) override;

 private:
  const BlcoTensor* t_;
  std::uint64_t cursor_ = 0;
};

// Incremental `.blco` reader: header up front, one block record per next().
class FileBlockSource final : public BlockSource {
 public:
  explicit FileBlockSource(const std::filesystem::path& path);
  const BitLayout& layout() const override { return layout_; }
  std::uint64_t block_count() const override { return header_.block_count; }
  std::uint64_t max_nnz_per_block() const override { return header_.max_nnz_per_block; }
  bool next(BlcoBlock& out) override;

 private:
  std::ifstream in_;
  BlcoHeader header_;
  BitLayout layout_;
  std::uint64_t cursor_ = 0;
};

struct StreamEvent {
  enum class Kind { Transfer, Compute };
  Kind kind;
  int queue;
  std::uint64_t block;
  double begin_s, end_s;  // relative to pipeline start
};

struct StreamReport {
  std::uint64_t blocks = 0;
  std::uint64_t bytes_streamed = 0;
  double total_seconds = 0;
  double transfer_busy_seconds = 0;  // union of transfer intervals
  double compute_busy_seconds = 0;   // union of compute intervals
  double overall_gbps = 0;
  double compute_gbps = 0;
  std::uint64_t peak_resident_bytes = 0;
  std::vector<StreamEvent> timeline;
  std::vector<int> block_queue;  // audit: queue that processed each block
};

struct ThroughputSummary {
  double overall_gbps = 0;
  double compute_only_gbps = 0;
};

ThroughputSummary throughput_report(const StreamReport& report);

// Memory-budgeted MTTKRP over streamed blocks: per-queue reusable staging
// reservations, transfer of pending blocks overlapping compute of active
// ones, results identical to the in-memory kernel (bit-identical in
// deterministic mode).
DenseMatrix stream_mttkrp(BlockSource& source, const FactorMatrices& f, int mode,
                          const DeviceBudget& budget, const ExecConfig& config = {},
                          Strategy strategy = Strategy::Auto, StreamReport* report = nullptr);

}  // namespace blco
