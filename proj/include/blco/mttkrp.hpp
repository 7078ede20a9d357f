#pragma once

#include "blco/blco_format.hpp"
#include "blco/exec.hpp"
#include "blco/types.hpp"

namespace blco {

enum class Strategy { Auto, Register, Hierarchical };

const char* strategy_name(Strategy s);

// Hierarchical conflict resolution pays off when the target mode is shorter
// than the simulated compute-unit count (strict); register-based atomics
// otherwise.
Strategy choose_strategy(index_t target_mode_length, const ExecConfig& config);

struct MttkrpStats {
  Strategy strategy = Strategy::Register;
  std::uint64_t workgroups = 0;
  std::uint64_t segments = 0;          // per-tile row runs over the whole launch
  std::uint64_t stash_flushes = 0;     // hierarchical only
  std::uint64_t commit_events = 0;     // global atomic commit events
  std::uint64_t scalar_adds = 0;
};

// One tile after the processing phase: elements reordered so equal target
// rows are adjacent, flags marking segment starts, everything staged in
// work-group scratch.
struct SegmentedTile {
  std::span<index_t> rows;      // target-mode row per lane
  std::span<index_t> coords;    // lane-major, order entries per lane
  std::span<double> values;
  std::span<std::uint8_t> flags;
  std::size_t count = 0;
};

// De-linearizes, reorders (stable by target row, histogram + prefix-sum
// style) and flags one work-group span, tile by tile.
std::vector<SegmentedTile> processing_phase(const BlcoBlock& block, std::uint64_t offset,
                                            std::uint64_t count, const BitLayout& layout,
                                            int mode, const ExecConfig& config,
                                            Scratch& scratch);

// Direct-mapped software cache of partial output rows in work-group scratch.
class Stash {
 public:
  Stash(Scratch& scratch, int slots, std::size_t rank);

  // Slot for `row`; a conflicting occupant is flushed through `flush(row,
  // partials)` and the slot zeroed before being reclaimed.
  template <class FlushFn>
  std::span<double> acquire(index_t row, FlushFn&& flush) {
    const std::size_t s = static_cast<std::size_t>(row % slots_);
    auto sums = sums_.subspan(s * rank_, rank_);
    if (occupied_[s]) {
      if (rows_[s] == row) return sums;
      flush(rows_[s], std::span<const double>(sums));
      ++flushes_;
      std::fill(sums.begin(), sums.end(), 0.0);
    }
    occupied_[s] = 1;
    rows_[s] = row;
    return sums;
  }

  template <class FlushFn>
  void flush_all(FlushFn&& flush) {
    for (std::size_t s = 0; s < static_cast<std::size_t>(slots_); ++s) {
      if (!occupied_[s]) continue;
      auto sums = sums_.subspan(s * rank_, rank_);
      flush(rows_[s], std::span<const double>(sums));
      ++flushes_;
      std::fill(sums.begin(), sums.end(), 0.0);
      occupied_[s] = 0;
    }
  }

  std::uint64_t flush_count() const { return flushes_; }

 private:
  std::span<index_t> rows_;
  std::span<std::uint8_t> occupied_;
  std::span<double> sums_;
  std::size_t rank_;
  int slots_;
  std::uint64_t flushes_ = 0;
};

// Rank-wise accumulation over segments; every segment boundary commits each
// active rank lane's columns straight to the final matrix (buffer
// `final_buf`) with one atomic commit per lane.
void computing_phase_register(std::span<const SegmentedTile> tiles, const FactorMatrices& f,
                              int mode, const ExecConfig& config, WgCommit& sink,
                              std::size_t final_buf, std::uint64_t* segments);

// Segment results merge into the stash; conflicting rows and the work-group
// end flush whole rows to the work-group's factor-matrix copy.
void computing_phase_hierarchical(std::span<const SegmentedTile> tiles, const FactorMatrices& f,
                                  int mode, const ExecConfig& config, Stash& stash,
                                  WgCommit& sink, std::size_t copy_buf,
                                  std::uint64_t* segments);

// Element-wise sum of the factor-matrix copies.
DenseMatrix merge_copies(std::span<const DenseMatrix> copies);

// Mode-agnostic BLCO MTTKRP: M[i,r] = sum over non-zeros with mode-`mode`
// index i of value * prod over other modes of A^(m)[coord_m, r]. The same
// code path serves every mode; `mode` is 0-based.
DenseMatrix mttkrp(const BlcoTensor& t, const FactorMatrices& f, int mode,
                   const ExecConfig& config = {}, Strategy strategy = Strategy::Auto,
                   MttkrpStats* stats = nullptr);

}  // namespace blco
