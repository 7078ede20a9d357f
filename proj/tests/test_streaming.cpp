#include <filesystem>

#include "blco/oracle.hpp"
#include "blco/streaming.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace blco;
using namespace blco::testutil;

namespace {

std::uint64_t factor_bytes(const FactorMatrices& f, index_t out_rows) {
  std::uint64_t b = out_rows * f.rank * sizeof(double);
  for (const auto& a : f.factors) b += a.data.size() * sizeof(double);
  return b;
}

}  // namespace

TEST_CASE("streamed result equals the in-memory result under tight budgets") {
  Rng rng(83);
  auto coo = random_coo(rng, {50, 40, 60}, 600);
  auto t = build_blco(coo, 8, 64);  // many small blocks
  REQUIRE(t.blocks.size() >= 4);
  auto f = random_factors(rng, coo.dims, 4);

  ExecConfig cfg;
  cfg.workgroup_size = 32;
  cfg.tile_size = 4;
  cfg.coarsening = 1;
  cfg.num_threads = 2;
  auto want = mttkrp(t, f, 0, cfg, Strategy::Register);

  for (int queues : {1, 2, 4}) {
    DeviceBudget budget;
    budget.num_queues = queues;
    budget.reservation_bytes = t.max_nnz_per_block * 16;
    budget.capacity_bytes =
        factor_bytes(f, t.dims()[0]) + queues * budget.reservation_bytes;
    MemoryBlockSource source(t);
    StreamReport report;
    auto got = stream_mttkrp(source, f, 0, budget, cfg, Strategy::Register, &report);
    CHECK(rel_frobenius(got, want) <= 1e-12);
    CHECK(report.blocks == t.blocks.size());
    CHECK(report.peak_resident_bytes <= budget.capacity_bytes);
    // every block processed exactly once, round-robin
    REQUIRE(report.block_queue.size() == t.blocks.size());
    for (std::size_t b = 0; b < report.block_queue.size(); ++b)
      CHECK(report.block_queue[b] == static_cast<int>(b % queues));
  }
}

TEST_CASE("deterministic streaming is bit-identical to deterministic in-memory") {
  Rng rng(89);
  auto coo = random_coo(rng, {30, 50, 20}, 400);
  auto t = build_blco(coo, 9, 50);
  REQUIRE(t.blocks.size() >= 3);
  auto f = random_factors(rng, coo.dims, 4);

  ExecConfig cfg;
  cfg.workgroup_size = 16;
  cfg.tile_size = 4;
  cfg.coarsening = 1;
  cfg.deterministic = true;
  cfg.num_threads = 2;
  cfg.num_factor_copies = 2;

  for (auto strat : {Strategy::Register, Strategy::Hierarchical}) {
    auto want = mttkrp(t, f, 1, cfg, strat);
    DeviceBudget budget;
    budget.num_queues = 3;
    budget.reservation_bytes = t.max_nnz_per_block * 16;
    budget.capacity_bytes = factor_bytes(f, t.dims()[1]) * 4 + 3 * budget.reservation_bytes;
    MemoryBlockSource source(t);
    auto got = stream_mttkrp(source, f, 1, budget, cfg, strat);
    CHECK(got.data == want.data);  // bit-identical
  }
}

TEST_CASE("file source streams a .blco container incrementally") {
  Rng rng(97);
  auto coo = random_coo(rng, {40, 30, 20}, 300);
  auto t = build_blco(coo, 8, 40);
  auto path = std::filesystem::temp_directory_path() / "stream_test.blco";
  save_blco(t, path);

  auto f = random_factors(rng, coo.dims, 4);
  ExecConfig cfg;
  cfg.workgroup_size = 16;
  cfg.tile_size = 4;
  cfg.coarsening = 1;
  auto want = mttkrp(t, f, 2, cfg, Strategy::Register);

  DeviceBudget budget;
  budget.num_queues = 2;
  budget.reservation_bytes = t.max_nnz_per_block * 16;
  budget.capacity_bytes = factor_bytes(f, t.dims()[2]) + 2 * budget.reservation_bytes;
  FileBlockSource source(path);
  auto got = stream_mttkrp(source, f, 2, budget, cfg, Strategy::Register);
  CHECK(rel_frobenius(got, want) <= 1e-12);
  std::filesystem::remove(path);
}

TEST_CASE("transfer of the next block overlaps compute of the current one") {
  Rng rng(101);
  auto coo = random_coo(rng, {6, 4000}, 3000);
  auto t = build_blco(coo, 9, 512);
  REQUIRE(t.blocks.size() >= 4);
  auto f = random_factors(rng, coo.dims, 8);

  ExecConfig cfg;
  cfg.workgroup_size = 32;
  cfg.tile_size = 4;
  cfg.coarsening = 1;
  cfg.num_threads = 2;

  DeviceBudget budget;
  budget.num_queues = 2;
  budget.reservation_bytes = t.max_nnz_per_block * 16;
  budget.capacity_bytes = factor_bytes(f, t.dims()[0]) + 2 * budget.reservation_bytes;
  budget.injected_transfer_latency_s = 0.02;

  MemoryBlockSource source(t);
  StreamReport report;
  stream_mttkrp(source, f, 0, budget, cfg, Strategy::Register, &report);

  bool overlapped = false;
  for (const auto& tr : report.timeline) {
    if (tr.kind != StreamEvent::Kind::Transfer) continue;
    for (const auto& cp : report.timeline) {
      if (cp.kind != StreamEvent::Kind::Compute || cp.block == tr.block) continue;
      if (tr.begin_s < cp.end_s && cp.begin_s < tr.end_s) overlapped = true;
    }
  }
  CHECK(overlapped);
  CHECK(report.transfer_busy_seconds > 0);
  CHECK(report.compute_busy_seconds > 0);
}

TEST_CASE("throughput report fields are present and positive") {
  Rng rng(103);
  auto coo = random_coo(rng, {20, 20, 20}, 200);
  auto t = build_blco(coo, 8, 64);
  auto f = random_factors(rng, coo.dims, 4);
  ExecConfig cfg;
  cfg.workgroup_size = 16;
  cfg.tile_size = 4;
  cfg.coarsening = 1;

  DeviceBudget budget;
  budget.num_queues = 2;
  budget.reservation_bytes = t.max_nnz_per_block * 16;
  budget.capacity_bytes = factor_bytes(f, t.dims()[0]) + 2 * budget.reservation_bytes;
  MemoryBlockSource source(t);
  StreamReport report;
  stream_mttkrp(source, f, 0, budget, cfg, Strategy::Register, &report);
  auto summary = throughput_report(report);
  CHECK(summary.overall_gbps > 0);
  CHECK(summary.compute_only_gbps > 0);
  CHECK(report.bytes_streamed == t.total_nnz * 16);

  // transfer-dominated run: overall strictly below compute-only
  DeviceBudget slow = budget;
  slow.injected_transfer_latency_s = 0.01;
  MemoryBlockSource source2(t);
  StreamReport report2;
  stream_mttkrp(source2, f, 0, slow, cfg, Strategy::Register, &report2);
  auto summary2 = throughput_report(report2);
  CHECK(summary2.overall_gbps < summary2.compute_only_gbps);
}

TEST_CASE("budget errors") {
  Rng rng(107);
  auto coo = random_coo(rng, {30, 30}, 100);
  auto t = build_blco(coo, 6, 32);
  auto f = random_factors(rng, coo.dims, 4);
  ExecConfig cfg;
  cfg.workgroup_size = 16;
  cfg.tile_size = 4;
  cfg.coarsening = 1;

  SUBCASE("factors alone exceed capacity") {
    DeviceBudget budget;
    budget.capacity_bytes = 64;  // nowhere near the factor footprint
    MemoryBlockSource source(t);
    CHECK_THROWS_AS(stream_mttkrp(source, f, 0, budget, cfg), FormatError);
  }
  SUBCASE("block larger than the reservation fails before compute") {
    DeviceBudget budget;
    budget.num_queues = 2;
    budget.reservation_bytes = 8;  // smaller than any block
    budget.capacity_bytes = factor_bytes(f, t.dims()[0]) + 2 * budget.reservation_bytes;
    MemoryBlockSource source(t);
    StreamReport report;
    CHECK_THROWS_AS(stream_mttkrp(source, f, 0, budget, cfg, Strategy::Auto, &report),
                    FormatError);
  }
}

TEST_CASE("oversized budget degenerates to the in-memory result") {
  Rng rng(109);
  auto coo = random_coo(rng, {25, 25, 25}, 250);
  auto t = build_blco(coo, 64);  // single block
  auto f = random_factors(rng, coo.dims, 4);
  ExecConfig cfg;
  cfg.workgroup_size = 16;
  cfg.tile_size = 4;
  cfg.coarsening = 1;
  auto want = mttkrp(t, f, 0, cfg, Strategy::Register);
  DeviceBudget budget;
  budget.num_queues = 4;
  budget.capacity_bytes = std::uint64_t{1} << 34;  // 16 GiB simulated
  MemoryBlockSource source(t);
  auto got = stream_mttkrp(source, f, 0, budget, cfg, Strategy::Register);
  CHECK(rel_frobenius(got, want) <= 1e-12);
}
