#include "blco/streaming.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <thread>

namespace blco {

bool MemoryBlockSource::next(BlcoBlock& out) {
  if (cursor_ >= t_->blocks.size()) return false;
  out = t_->blocks[cursor_++];
  return true;
}

FileBlockSource::FileBlockSource(const std::filesystem::path& path)
    : in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open " + path.string());
  header_ = read_blco_header(in_);
  layout_ = header_.make_layout_checked();
}

bool FileBlockSource::next(BlcoBlock& out) {
  if (cursor_ >= header_.block_count) return false;
  out = read_blco_block(in_, layout_);
  ++cursor_;
  return true;
}

ThroughputSummary throughput_report(const StreamReport& report) {
  return {report.overall_gbps, report.compute_gbps};
}

namespace {

using clock = std::chrono::steady_clock;

double union_seconds(const std::vector<StreamEvent>& events, StreamEvent::Kind kind) {
  std::vector<std::pair<double, double>> iv;
  for (const StreamEvent& e : events)
    if (e.kind == kind) iv.emplace_back(e.begin_s, e.end_s);
  std::sort(iv.begin(), iv.end());
  double total = 0, hi = -1;
  for (auto [b, e] : iv) {
    if (b > hi) {
      total += e - b;
      hi = e;
    } else if (e > hi) {
      total += e - hi;
      hi = e;
    }
  }
  return total;
}

std::uint64_t block_bytes(const BlcoBlock& b) {
  return b.nnz() * (sizeof(index_t) + sizeof(double));
}

struct StagedItem {
  BlcoBlock block;
  std::uint64_t ordinal = 0;
  std::uint64_t wg_base = 0;
};

// Single-slot mailbox between the dispatcher and one queue worker.
class Mailbox {
 public:
  void push(StagedItem&& item) {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !item_ && !closed_; });
    if (closed_) return;
    item_ = std::move(item);
    cv_.notify_all();
  }
  std::optional<StagedItem> pop() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return item_ || closed_; });
    if (!item_) return std::nullopt;
    std::optional<StagedItem> out = std::move(item_);
    item_.reset();
    cv_.notify_all();
    return out;
  }
  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<StagedItem> item_;
  bool closed_ = false;
};

}  // namespace

DenseMatrix stream_mttkrp(BlockSource& source, const FactorMatrices& f, int mode,
                          const DeviceBudget& budget, const ExecConfig& config,
                          Strategy strategy, StreamReport* report) {
  config.validate();
  const BitLayout& layout = source.layout();
  f.validate(layout.dims);
  if (mode < 0 || mode >= layout.order()) throw FormatError("stream: mode out of range");
  if (budget.num_queues < 1) throw FormatError("stream: num_queues must be >= 1");
  if (strategy == Strategy::Auto) strategy = choose_strategy(layout.dims[mode], config);
  const bool hier = strategy == Strategy::Hierarchical;

  const std::size_t rank = f.rank;
  const index_t out_rows = layout.dims[mode];

  // Factor matrices, the output and its copies stay resident for the run.
  std::uint64_t pinned = 0;
  for (const DenseMatrix& a : f.factors) pinned += a.data.size() * sizeof(double);
  const std::uint64_t out_bytes = out_rows * rank * sizeof(double);
  pinned += out_bytes * (hier ? config.num_factor_copies : 1);
  if (pinned > budget.capacity_bytes)
    throw FormatError("stream: factor matrices and output (" + std::to_string(pinned) +
                      " bytes) exceed device capacity " + std::to_string(budget.capacity_bytes));

  const int queues = budget.num_queues;
  std::uint64_t reservation = budget.reservation_bytes;
  if (reservation == 0) reservation = (budget.capacity_bytes - pinned) / queues;
  if (reservation < sizeof(index_t) + sizeof(double))
    throw FormatError("stream: budget leaves no room for a per-queue reservation");
  if (pinned + static_cast<std::uint64_t>(queues) * reservation > budget.capacity_bytes)
    throw FormatError("stream: reservations exceed device capacity");
  const std::uint64_t max_staged_elems = reservation / (sizeof(index_t) + sizeof(double));

  // Simulated device residency: pinned data plus all queue reservations.
  const std::uint64_t resident = pinned + static_cast<std::uint64_t>(queues) * reservation;

  DenseMatrix m(out_rows, rank);
  std::vector<DenseMatrix> copies;
  std::vector<std::span<double>> buffers;
  if (hier) {
    copies.assign(config.num_factor_copies, DenseMatrix(out_rows, rank));
    for (auto& c : copies) buffers.push_back(c.data);
  } else {
    buffers.push_back(m.data);
  }
  GlobalAccum accum(std::move(buffers));

  std::vector<Mailbox> mailboxes(queues);
  std::mutex report_mu;
  std::vector<StreamEvent> timeline;
  std::vector<int> block_queue;
  std::atomic<std::uint64_t> bytes_streamed{0};
  std::atomic<std::uint64_t> blocks_done{0};

  std::mutex err_mu;
  std::exception_ptr error;
  auto record_error = [&] {
    std::lock_guard lk(err_mu);
    if (!error) error = std::current_exception();
  };

  // Deterministic mode computes blocks in ascending order so the global
  // commit sequence matches the in-memory launch exactly.
  std::mutex turn_mu;
  std::condition_variable turn_cv;
  std::uint64_t compute_turn = 0;
  std::atomic<bool> aborted{false};
  auto abort_all = [&] {
    aborted.store(true);
    for (auto& mb : mailboxes) mb.close();
    std::lock_guard lk(turn_mu);
    turn_cv.notify_all();
  };

  const auto start = clock::now();
  auto now_s = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

  auto worker = [&](int q) {
    // Reused staging reservation: reserved once, assign() never reallocates.
    BlcoBlock staged;
    staged.linear_indices.reserve(max_staged_elems);
    staged.values.reserve(max_staged_elems);

    while (true) {
      std::optional<StagedItem> item = mailboxes[q].pop();
      if (!item) break;
      try {
        // Transfer: host block -> device staging, plus injected latency.
        const double t0 = now_s();
        staged.key = item->block.key;
        staged.linear_indices.assign(item->block.linear_indices.begin(),
                                     item->block.linear_indices.end());
        staged.values.assign(item->block.values.begin(), item->block.values.end());
        if (budget.injected_transfer_latency_s > 0)
          std::this_thread::sleep_for(
              std::chrono::duration<double>(budget.injected_transfer_latency_s));
        const double t1 = now_s();
        {
          std::lock_guard lk(report_mu);
          timeline.push_back({StreamEvent::Kind::Transfer, q, item->ordinal, t0, t1});
        }

        if (config.deterministic) {
          std::unique_lock lk(turn_mu);
          turn_cv.wait(lk, [&] { return compute_turn == item->ordinal || aborted.load(); });
        }
        if (aborted.load()) break;

        const double c0 = now_s();
        const std::uint64_t quota = config.workgroup_quota();
        std::vector<WorkAssignment> assignments;
        for (std::uint64_t off = 0; off < staged.nnz(); off += quota)
          assignments.push_back({0, off, std::min<std::uint64_t>(quota, staged.nnz() - off)});
        auto body = [&](std::size_t wg, const WorkAssignment& a, Scratch& scratch,
                        WgCommit& sink) {
          auto tiles = processing_phase(staged, a.offset, a.count, layout, mode, config, scratch);
          if (hier) {
            Stash stash(scratch, config.stash_slots, rank);
            const std::size_t copy = wg % static_cast<std::size_t>(config.num_factor_copies);
            computing_phase_hierarchical(tiles, f, mode, config, stash, sink, copy, nullptr);
            stash.flush_all([&](index_t row, std::span<const double> sums) {
              sink.add(copy, row * rank, sums);
            });
          } else {
            computing_phase_register(tiles, f, mode, config, sink, 0, nullptr);
          }
        };
        run_workgroups(assignments, config, accum, body, item->wg_base);
        const double c1 = now_s();
        {
          std::lock_guard lk(report_mu);
          timeline.push_back({StreamEvent::Kind::Compute, q, item->ordinal, c0, c1});
        }
        bytes_streamed.fetch_add(block_bytes(staged));
        blocks_done.fetch_add(1);

        if (config.deterministic) {
          std::lock_guard lk(turn_mu);
          ++compute_turn;
          turn_cv.notify_all();
        }
      } catch (...) {
        record_error();
        abort_all();
        break;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(queues);
  for (int q = 0; q < queues; ++q) pool.emplace_back(worker, q);

  // Dispatcher: reads blocks in order, validates them against the
  // reservation, and hands them round-robin to the queues.
  std::uint64_t ordinal = 0, wg_base = 0;
  try {
    BlcoBlock b;
    while (!aborted.load() && source.next(b)) {
      if (block_bytes(b) > reservation)
        throw FormatError("stream: block " + std::to_string(ordinal) + " (" +
                          std::to_string(block_bytes(b)) +
                          " bytes) exceeds queue reservation " + std::to_string(reservation));
      const int q = static_cast<int>(ordinal % queues);
      {
        std::lock_guard lk(report_mu);
        block_queue.push_back(q);
      }
      const std::uint64_t wgs =
          (b.nnz() + config.workgroup_quota() - 1) / config.workgroup_quota();
      mailboxes[q].push({std::move(b), ordinal, wg_base});
      b = {};
      ++ordinal;
      wg_base += wgs;
    }
  } catch (...) {
    record_error();
    abort_all();
  }
  for (auto& mb : mailboxes) mb.close();
  for (auto& th : pool) th.join();
  const double total = now_s();

  {
    std::lock_guard lk(err_mu);
    if (error) std::rethrow_exception(error);
  }

  if (hier) m = merge_copies(copies);

  if (report) {
    report->blocks = blocks_done.load();
    report->bytes_streamed = bytes_streamed.load();
    report->total_seconds = total;
    std::sort(timeline.begin(), timeline.end(),
              [](const StreamEvent& a, const StreamEvent& b) { return a.begin_s < b.begin_s; });
    report->transfer_busy_seconds = union_seconds(timeline, StreamEvent::Kind::Transfer);
    report->compute_busy_seconds = union_seconds(timeline, StreamEvent::Kind::Compute);
    const double gb = static_cast<double>(report->bytes_streamed) / 1e9;
    report->overall_gbps = total > 0 ? gb / total : 0;
    report->compute_gbps =
        report->compute_busy_seconds > 0 ? gb / report->compute_busy_seconds : 0;
    report->peak_resident_bytes = resident;
    report->timeline = std::move(timeline);
    report->block_queue = std::move(block_queue);
  }
  return m;
}

}  // namespace blco
