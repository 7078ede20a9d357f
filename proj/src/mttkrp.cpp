#include "blco/mttkrp.hpp"

#include <algorithm>
#include <atomic>

namespace blco {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Auto: return "auto";
    case Strategy::Register: return "register";
    case Strategy::Hierarchical: return "hierarchical";
  }
  return "?";
}

Strategy choose_strategy(index_t target_mode_length, const ExecConfig& config) {
  return target_mode_length < static_cast<index_t>(config.num_compute_units)
             ? Strategy::Hierarchical
             : Strategy::Register;
}

std::vector<SegmentedTile> processing_phase(const BlcoBlock& block, std::uint64_t offset,
                                            std::uint64_t count, const BitLayout& layout,
                                            int mode, const ExecConfig& config,
                                            Scratch& scratch) {
  const int order = layout.order();
  const std::vector<index_t> base = layout.block_base(block.key);
  const std::size_t tile = static_cast<std::size_t>(config.tile_size);

  std::vector<SegmentedTile> tiles;
  tiles.reserve((count + tile - 1) / tile);

  auto lane_rows = scratch.alloc<index_t>(tile);
  auto lane_coords = scratch.alloc<index_t>(tile * order);
  auto lane_values = scratch.alloc<double>(tile);
  auto targets = scratch.alloc<std::uint32_t>(tile);

  for (std::uint64_t t0 = 0; t0 < count; t0 += tile) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(tile, count - t0));

    // (1) coalesced load + independent per-coordinate de-linearization
    for (std::size_t i = 0; i < n; ++i) {
      const index_t idx = block.linear_indices[offset + t0 + i];
      for (int m = 0; m < order; ++m)
        lane_coords[i * order + m] =
            base[m] | ((idx >> layout.field_shift[m]) & layout.field_mask[m]);
      lane_rows[i] = lane_coords[i * order + mode];
      lane_values[i] = block.values[offset + t0 + i];
    }

    // (2)+(3) stable reorder by target row: each lane's destination is the
    // number of elements sorting strictly before it (row value, then input
    // order) — the in-register histogram/prefix-sum rank.
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t rank = 0;
      for (std::size_t j = 0; j < n; ++j)
        rank += (lane_rows[j] < lane_rows[i] || (lane_rows[j] == lane_rows[i] && j < i)) ? 1 : 0;
      targets[i] = rank;
    }

    SegmentedTile st;
    st.count = n;
    st.rows = scratch.alloc<index_t>(n);
    st.coords = scratch.alloc<index_t>(n * order);
    st.values = scratch.alloc<double>(n);
    st.flags = scratch.alloc<std::uint8_t>(n);

    tile_exchange<index_t>(lane_rows.first(n), targets.first(n), st.rows);
    tile_exchange<double>(lane_values.first(n), targets.first(n), st.values);
    for (std::size_t i = 0; i < n; ++i)
      for (int m = 0; m < order; ++m)
        st.coords[targets[i] * order + m] = lane_coords[i * order + m];

    for (std::size_t i = 0; i < n; ++i)
      st.flags[i] = (i == 0 || st.rows[i] != st.rows[i - 1]) ? 1 : 0;

    tiles.push_back(st);
  }
  return tiles;
}

Stash::Stash(Scratch& scratch, int slots, std::size_t rank) : rank_(rank), slots_(slots) {
  rows_ = scratch.alloc<index_t>(slots);
  occupied_ = scratch.alloc<std::uint8_t>(slots);
  sums_ = scratch.alloc<double>(static_cast<std::size_t>(slots) * rank);
  std::fill(occupied_.begin(), occupied_.end(), std::uint8_t{0});
  std::fill(sums_.begin(), sums_.end(), 0.0);
}

namespace {

// Walks one tile in lockstep: contribution vector per element, accumulated
// per rank lane, handed to `commit(row, acc)` at each segment boundary.
template <class CommitFn>
void walk_tile_segments(const SegmentedTile& tile, const FactorMatrices& f, int mode,
                        std::span<double> acc, std::uint64_t* segments, CommitFn&& commit) {
  const std::size_t rank = f.rank;
  const int order = f.order();
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::size_t i = 0; i < tile.count; ++i) {
    const index_t* coords = &tile.coords[i * order];
    for (std::size_t r = 0; r < rank; ++r) {
      double p = tile.values[i];
      for (int m = 0; m < order; ++m)
        if (m != mode) p *= f.factors[m](coords[m], r);
      acc[r] += p;
    }
    const bool boundary = i + 1 == tile.count || tile.flags[i + 1] != 0;
    if (boundary) {
      if (segments) ++*segments;
      commit(tile.rows[i], acc);
      std::fill(acc.begin(), acc.end(), 0.0);
    }
  }
}

}  // namespace

void computing_phase_register(std::span<const SegmentedTile> tiles, const FactorMatrices& f,
                              int mode, const ExecConfig& config, WgCommit& sink,
                              std::size_t final_buf, std::uint64_t* segments) {
  const std::size_t rank = f.rank;
  const std::size_t lanes = static_cast<std::size_t>(config.tile_size);
  const std::size_t cols_per_lane = (rank + lanes - 1) / lanes;
  std::vector<double> acc(rank);
  for (const SegmentedTile& tile : tiles) {
    walk_tile_segments(tile, f, mode, acc, segments,
                       [&](index_t row, std::span<const double> sums) {
                         // one atomic commit per active rank lane
                         for (std::size_t c0 = 0; c0 < rank; c0 += cols_per_lane) {
                           const std::size_t c1 = std::min(rank, c0 + cols_per_lane);
                           sink.add(final_buf, row * rank + c0, sums.subspan(c0, c1 - c0));
                         }
                       });
  }
}

void computing_phase_hierarchical(std::span<const SegmentedTile> tiles, const FactorMatrices& f,
                                  int mode, const ExecConfig& config, Stash& stash,
                                  WgCommit& sink, std::size_t copy_buf,
                                  std::uint64_t* segments) {
  const std::size_t rank = f.rank;
  auto flush = [&](index_t row, std::span<const double> sums) {
    sink.add(copy_buf, row * rank + 0, sums);
  };
  std::vector<double> acc(rank);
  for (const SegmentedTile& tile : tiles) {
    walk_tile_segments(tile, f, mode, acc, segments,
                       [&](index_t row, std::span<const double> sums) {
                         auto slot = stash.acquire(row, flush);
                         for (std::size_t r = 0; r < rank; ++r) slot[r] += sums[r];
                       });
  }
}

DenseMatrix merge_copies(std::span<const DenseMatrix> copies) {
  if (copies.empty()) throw FormatError("merge_copies: no copies");
  DenseMatrix m = copies[0];
  for (std::size_t c = 1; c < copies.size(); ++c) {
    if (!m.same_shape(copies[c])) throw FormatError("merge_copies: shape mismatch");
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] += copies[c].data[i];
  }
  return m;
}

DenseMatrix mttkrp(const BlcoTensor& t, const FactorMatrices& f, int mode,
                   const ExecConfig& config, Strategy strategy, MttkrpStats* stats) {
  config.validate();
  f.validate(t.dims());
  if (mode < 0 || mode >= t.order())
    throw FormatError("mttkrp: mode " + std::to_string(mode + 1) + " out of range for order " +
                      std::to_string(t.order()));
  if (strategy == Strategy::Auto) strategy = choose_strategy(t.dims()[mode], config);

  const std::uint64_t quota = config.workgroup_quota();
  std::vector<BatchSpan> recomputed;
  std::span<const BatchSpan> spans(t.batch_table);
  if (t.batch_quota != quota) {
    recomputed = compute_batch_table(t, quota);
    spans = recomputed;
  }
  std::vector<WorkAssignment> assignments(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i)
    assignments[i] = {spans[i].block, spans[i].offset, spans[i].count};

  const std::size_t rank = f.rank;
  const index_t out_rows = t.dims()[mode];
  DenseMatrix m(out_rows, rank);

  std::atomic<std::uint64_t> total_segments{0};
  std::atomic<std::uint64_t> total_flushes{0};

  const bool hier = strategy == Strategy::Hierarchical;
  std::vector<DenseMatrix> copies;
  std::vector<std::span<double>> buffers;
  if (hier) {
    copies.assign(config.num_factor_copies, DenseMatrix(out_rows, rank));
    for (auto& c : copies) buffers.push_back(c.data);
  } else {
    buffers.push_back(m.data);
  }
  GlobalAccum accum(std::move(buffers));

  auto body = [&](std::size_t wg, const WorkAssignment& a, Scratch& scratch, WgCommit& sink) {
    const BlcoBlock& block = t.blocks[a.block];
    auto tiles = processing_phase(block, a.offset, a.count, t.layout, mode, config, scratch);
    std::uint64_t segments = 0;
    if (hier) {
      Stash stash(scratch, config.stash_slots, rank);
      const std::size_t copy = wg % static_cast<std::size_t>(config.num_factor_copies);
      computing_phase_hierarchical(tiles, f, mode, config, stash, sink, copy, &segments);
      stash.flush_all(
          [&](index_t row, std::span<const double> sums) { sink.add(copy, row * rank, sums); });
      total_flushes.fetch_add(stash.flush_count(), std::memory_order_relaxed);
    } else {
      computing_phase_register(tiles, f, mode, config, sink, 0, &segments);
    }
    total_segments.fetch_add(segments, std::memory_order_relaxed);
  };

  run_workgroups(assignments, config, accum, body);

  if (hier) m = merge_copies(copies);

  if (stats) {
    stats->strategy = strategy;
    stats->workgroups = assignments.size();
    stats->segments = total_segments.load();
    stats->stash_flushes = total_flushes.load();
    stats->commit_events = accum.commit_events();
    stats->scalar_adds = accum.scalar_adds();
  }
  return m;
}

}  // namespace blco
