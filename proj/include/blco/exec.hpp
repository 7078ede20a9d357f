#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "blco/common.hpp"

namespace blco {

// Simulated device parameters. Defaults are configuration, not contract.
struct ExecConfig {
  int workgroup_size = 128;   // threads per work-group
  int tile_size = 32;         // threads per tile; divides workgroup_size
  int coarsening = 4;         // non-zero elements per thread
  int num_compute_units = 108;
  int num_factor_copies = 1;  // global output copies for the hierarchical path
  int stash_slots = 32;       // local-memory stash capacity per work-group
  bool deterministic = false; // ordered global commits, bit-stable results
  int num_threads = 0;        // host worker threads; 0 = hardware concurrency

  void validate() const;
  std::uint64_t workgroup_quota() const {
    return static_cast<std::uint64_t>(workgroup_size) * coarsening;
  }
  int host_threads() const;
};

// One work-group's element span: (block ordinal, start offset, count).
struct WorkAssignment {
  std::uint64_t block = 0;
  std::uint64_t offset = 0;
  std::uint64_t count = 0;
};

// Per-work-group scratch arena standing in for local memory. Spans stay
// valid until reset(); chunks never move.
class Scratch {
 public:
  template <class T>
  std::span<T> alloc(std::size_t n) {
    void* p = alloc_bytes(n * sizeof(T), alignof(T));
    return {static_cast<T*>(p), n};
  }
  void reset();

 private:
  void* alloc_bytes(std::size_t bytes, std::size_t align);
  struct Chunk {
    std::unique_ptr<std::byte[]> data;
    std::size_t size = 0;
    std::size_t used = 0;
  };
  std::vector<Chunk> chunks_;
};

// Shared accumulation target(s) for a launch: one buffer for the register
// path, num_factor_copies buffers for the hierarchical path. Counts commit
// events (one per WgCommit::add call) and scalar adds for instrumentation.
class GlobalAccum {
 public:
  explicit GlobalAccum(std::vector<std::span<double>> buffers);

  std::size_t num_buffers() const { return buffers_.size(); }
  std::span<double> buffer(std::size_t b) { return buffers_[b]; }
  std::uint64_t commit_events() const { return events_.load(std::memory_order_relaxed); }
  std::uint64_t scalar_adds() const { return scalars_.load(std::memory_order_relaxed); }

 private:
  friend class WgCommit;
  std::vector<std::span<double>> buffers_;
  std::atomic<std::uint64_t> events_{0};
  std::atomic<std::uint64_t> scalars_{0};
};

// Per-work-group handle for commutative accumulation into a GlobalAccum.
// Immediate mode uses atomic fetch-adds; deterministic mode records the adds
// and the scheduler applies them in ascending work-group id order.
class WgCommit {
 public:
  // One commit event: vals[i] accumulates into buffer[buf][idx + i].
  void add(std::size_t buf, std::size_t idx, std::span<const double> vals);
  void add(std::size_t buf, std::size_t idx, double v) { add(buf, idx, std::span(&v, 1)); }

 private:
  friend void run_workgroups(std::span<const WorkAssignment>, const ExecConfig&, GlobalAccum&,
                             const std::function<void(std::size_t, const WorkAssignment&,
                                                      Scratch&, WgCommit&)>&,
                             std::uint64_t);
  WgCommit(GlobalAccum& out, bool logged) : out_(&out), logged_(logged) {}
  void apply_log();

  GlobalAccum* out_;
  bool logged_;
  struct Entry {
    std::uint32_t buf;
    std::uint64_t idx;
    std::uint32_t n;
  };
  std::vector<Entry> entries_;
  std::vector<double> payload_;
};

using KernelBody =
    std::function<void(std::size_t wg_id, const WorkAssignment&, Scratch&, WgCommit&)>;

// Executes every assignment over a host thread pool. Work-groups may run in
// any order; scratch is private per work-group; all cross-work-group
// communication goes through the GlobalAccum handle. Work-group ids are
// wg_id_base + position. Kernel exceptions rethrow with the id attached.
void run_workgroups(std::span<const WorkAssignment> assignments, const ExecConfig& config,
                    GlobalAccum& out, const KernelBody& body, std::uint64_t wg_id_base = 0);

// Sub-group style primitives used inside a tile during the processing phase.

// Exclusive prefix sum of per-lane counts.
void tile_prefix_sum(std::span<const std::uint32_t> counts, std::span<std::uint32_t> out);

// Permutes lane values to computed target lanes. Throws if a target lane
// falls outside the tile or two lanes collide.
template <class T>
void tile_exchange(std::span<const T> vals, std::span<const std::uint32_t> target_lanes,
                   std::span<T> out) {
  if (vals.size() != target_lanes.size() || vals.size() != out.size())
    throw FormatError("tile_exchange: lane count mismatch");
  std::vector<bool> hit(vals.size(), false);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::uint32_t t = target_lanes[i];
    if (t >= vals.size()) throw FormatError("tile_exchange: target lane out of tile range");
    if (hit[t]) throw FormatError("tile_exchange: duplicate target lane");
    hit[t] = true;
    out[t] = vals[i];
  }
}

}  // namespace blco
