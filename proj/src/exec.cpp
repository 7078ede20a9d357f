#include "blco/exec.hpp"

#include <algorithm>
#include <condition_variable>
#include <mutex>
#include <string>
#include <thread>

namespace blco {

void ExecConfig::validate() const {
  if (workgroup_size < 1 || tile_size < 1 || coarsening < 1 || num_compute_units < 1 ||
      num_factor_copies < 1 || stash_slots < 1)
    throw FormatError("exec: all config counts must be >= 1");
  if (tile_size > workgroup_size)
    throw FormatError("exec: tile_size exceeds workgroup_size");
  if (workgroup_size % tile_size != 0)
    throw FormatError("exec: tile_size must divide workgroup_size");
  if (num_threads < 0) throw FormatError("exec: num_threads must be >= 0");
}

int ExecConfig::host_threads() const {
  if (num_threads > 0) return num_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void* Scratch::alloc_bytes(std::size_t bytes, std::size_t align) {
  if (bytes == 0) bytes = 1;
  for (Chunk& c : chunks_) {
    const std::size_t aligned = (c.used + align - 1) & ~(align - 1);
    if (aligned + bytes <= c.size) {
      c.used = aligned + bytes;
      return c.data.get() + aligned;
    }
  }
  Chunk c;
  c.size = std::max<std::size_t>(bytes + align, 1 << 18);
  c.data = std::make_unique<std::byte[]>(c.size);
  const std::size_t base = reinterpret_cast<std::uintptr_t>(c.data.get());
  const std::size_t aligned = ((base + align - 1) & ~(align - 1)) - base;
  c.used = aligned + bytes;
  chunks_.push_back(std::move(c));
  return chunks_.back().data.get() + aligned;
}

void Scratch::reset() {
  for (Chunk& c : chunks_) c.used = 0;
}

GlobalAccum::GlobalAccum(std::vector<std::span<double>> buffers)
    : buffers_(std::move(buffers)) {
  if (buffers_.empty()) throw FormatError("exec: accumulator needs at least one buffer");
}

namespace {
inline void atomic_add(double& slot, double v) {
  std::atomic_ref<double> ref(slot);
  double cur = ref.load(std::memory_order_relaxed);
  while (!ref.compare_exchange_weak(cur, cur + v, std::memory_order_relaxed)) {
  }
}
}  // namespace

void WgCommit::add(std::size_t buf, std::size_t idx, std::span<const double> vals) {
  out_->events_.fetch_add(1, std::memory_order_relaxed);
  out_->scalars_.fetch_add(vals.size(), std::memory_order_relaxed);
  if (logged_) {
    entries_.push_back({static_cast<std::uint32_t>(buf), idx,
                        static_cast<std::uint32_t>(vals.size())});
    payload_.insert(payload_.end(), vals.begin(), vals.end());
  } else {
    std::span<double> dst = out_->buffers_[buf];
    for (std::size_t i = 0; i < vals.size(); ++i) atomic_add(dst[idx + i], vals[i]);
  }
}

void WgCommit::apply_log() {
  std::size_t p = 0;
  for (const Entry& e : entries_) {
    std::span<double> dst = out_->buffers_[e.buf];
    for (std::uint32_t i = 0; i < e.n; ++i) dst[e.idx + i] += payload_[p++];
  }
  entries_.clear();
  payload_.clear();
}

void run_workgroups(std::span<const WorkAssignment> assignments, const ExecConfig& config,
                    GlobalAccum& out, const KernelBody& body, std::uint64_t wg_id_base) {
  config.validate();
  const std::size_t total = assignments.size();
  if (total == 0) return;

  const int workers =
      static_cast<int>(std::min<std::size_t>(config.host_threads(), total));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  // Ordered-commit state for deterministic mode.
  std::mutex turn_mu;
  std::condition_variable turn_cv;
  std::size_t commit_turn = 0;

  std::mutex err_mu;
  std::size_t err_wg = total;
  std::string err_msg;

  auto worker = [&]() {
    Scratch scratch;
    while (true) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= total) break;
      scratch.reset();
      WgCommit commit(out, config.deterministic);
      bool ok = !failed.load(std::memory_order_relaxed);
      if (ok) {
        try {
          body(wg_id_base + i, assignments[i], scratch, commit);
        } catch (const std::exception& ex) {
          ok = false;
          failed.store(true, std::memory_order_relaxed);
          std::lock_guard lk(err_mu);
          if (i < err_wg) {
            err_wg = i;
            err_msg = ex.what();
          }
        }
      }
      if (config.deterministic) {
        std::unique_lock lk(turn_mu);
        turn_cv.wait(lk, [&] { return commit_turn == i; });
        if (ok) commit.apply_log();
        ++commit_turn;
        turn_cv.notify_all();
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (err_wg != total)
    throw Error("work-group " + std::to_string(wg_id_base + err_wg) + ": " + err_msg);
}

void tile_prefix_sum(std::span<const std::uint32_t> counts, std::span<std::uint32_t> out) {
  if (counts.size() != out.size()) throw FormatError("tile_prefix_sum: size mismatch");
  std::uint32_t run = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = run;
    run += counts[i];
  }
}

}  // namespace blco
