#include <map>
#include <sstream>

#include "blco/blco_format.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace blco;
using namespace blco::testutil;

TEST_CASE("reference tensor builds the expected two blocks at width 5") {
  auto t = build_blco(golden_tensor(), 5, 6);
  REQUIRE(t.blocks.size() == 2);
  CHECK(t.total_nnz == 12);

  CHECK(t.blocks[0].key == 0);
  // third entry is coordinate (3,1,0): fields 11|01|0 -> 0b00111 = 7
  CHECK(t.blocks[0].linear_indices == std::vector<index_t>{0, 16, 17, 7, 18, 23});
  CHECK(t.blocks[0].values == std::vector<double>{1, 2, 4, 8, 6, 9});

  CHECK(t.blocks[1].key == 1);
  CHECK(t.blocks[1].linear_indices == std::vector<index_t>{1, 8, 11, 27, 30, 31});
  CHECK(t.blocks[1].values == std::vector<double>{5, 3, 10, 11, 7, 12});
}

TEST_CASE("a tensor fitting the budget yields exactly one key-0 block") {
  auto t = build_blco(golden_tensor(), 64);
  REQUIRE(t.blocks.size() == 1);
  CHECK(t.blocks[0].key == 0);
  CHECK(t.blocks[0].nnz() == 12);
}

TEST_CASE("capacity splitting preserves order and keys") {
  auto t = build_blco(golden_tensor(), 5, 4);
  REQUIRE(t.blocks.size() == 4);
  CHECK(t.blocks[0].key == 0);
  CHECK(t.blocks[1].key == 0);
  CHECK(t.blocks[2].key == 1);
  CHECK(t.blocks[3].key == 1);
  CHECK(t.blocks[0].nnz() == 4);
  CHECK(t.blocks[1].nnz() == 2);
  CHECK(t.blocks[2].nnz() == 4);
  CHECK(t.blocks[3].nnz() == 2);
  CHECK(t.blocks[0].linear_indices == std::vector<index_t>{0, 16, 17, 7});
  CHECK(t.blocks[1].linear_indices == std::vector<index_t>{18, 23});
  CHECK(t.blocks[2].linear_indices == std::vector<index_t>{1, 8, 11, 27});
  CHECK(t.blocks[3].linear_indices == std::vector<index_t>{30, 31});
}

TEST_CASE("conservation: de-linearizing all blocks recovers the input multiset") {
  Rng rng(47);
  for (int trial = 0; trial < 12; ++trial) {
    const int order = 2 + static_cast<int>(rng.below(4));
    std::vector<index_t> dims(order);
    for (auto& d : dims) d = 1 + rng.below(300);
    auto coo = random_coo(rng, dims, 200);
    const int target = 3 + static_cast<int>(rng.below(62));
    auto t = build_blco(coo, target, 1 + rng.below(64));

    std::uint64_t sum_nnz = 0;
    index_t prev_key = 0;
    for (std::size_t b = 0; b < t.blocks.size(); ++b) {
      sum_nnz += t.blocks[b].nnz();
      CHECK(t.blocks[b].nnz() <= t.max_nnz_per_block);
      if (b > 0) CHECK(t.blocks[b].key >= prev_key);
      prev_key = t.blocks[b].key;
    }
    CHECK(sum_nnz == coo.nnz());

    auto back = delinearize_all(t);
    std::map<std::vector<index_t>, double> want, got;
    for (std::size_t e = 0; e < coo.nnz(); ++e) {
      std::vector<index_t> c(order);
      for (int m = 0; m < order; ++m) c[m] = coo.indices[m][e];
      want[c] = coo.values[e];
    }
    for (std::size_t e = 0; e < back.nnz(); ++e) {
      std::vector<index_t> c(order);
      for (int m = 0; m < order; ++m) c[m] = back.indices[m][e];
      got[c] = back.values[e];
    }
    CHECK(want == got);
  }
}

TEST_CASE("build is deterministic: identical input gives identical bytes") {
  Rng rng(53);
  auto coo = random_coo(rng, {40, 40, 40}, 300);
  std::ostringstream a, b;
  serialize_blco(build_blco(coo, 9, 32), a);
  serialize_blco(build_blco(coo, 9, 32), b);
  CHECK(a.str() == b.str());
}

TEST_CASE("build rejects duplicate coordinates") {
  SparseTensorCoo t;
  t.dims = {2, 2};
  t.indices = {{0, 0}, {1, 1}};
  t.values = {1.0, 2.0};
  CHECK_THROWS_AS(build_blco(t, 64), FormatError);
}

TEST_CASE("batch table tiling") {
  auto t = build_blco(golden_tensor(), 5, 6);

  auto spans6 = compute_batch_table(t, 6);
  REQUIRE(spans6.size() == 2);
  CHECK(spans6[0] == BatchSpan{0, 0, 6});
  CHECK(spans6[1] == BatchSpan{1, 0, 6});

  auto spans4 = compute_batch_table(t, 4);
  REQUIRE(spans4.size() == 4);
  CHECK(spans4[0] == BatchSpan{0, 0, 4});
  CHECK(spans4[1] == BatchSpan{0, 4, 2});
  CHECK(spans4[2] == BatchSpan{1, 0, 4});
  CHECK(spans4[3] == BatchSpan{1, 4, 2});

  BlcoTensor empty;
  empty.layout = make_layout(std::vector<index_t>{2}, 64);
  empty.blocks.push_back({});
  CHECK(compute_batch_table(empty, 8).empty());
}

TEST_CASE("serialize/deserialize round-trip") {
  auto t = build_blco(golden_tensor(), 5, 6);
  std::ostringstream out;
  serialize_blco(t, out);
  std::istringstream in(out.str());
  auto t2 = deserialize_blco(in);
  CHECK(t.structurally_equal(t2));

  std::ostringstream out2;
  serialize_blco(t2, out2);
  CHECK(out.str() == out2.str());  // re-serialization is byte-identical
}

TEST_CASE("deserialize rejects corruption") {
  auto t = build_blco(golden_tensor(), 5, 6);
  std::ostringstream out;
  serialize_blco(t, out);
  std::string bytes = out.str();

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_WITH_AS(deserialize_blco(in), "blco: bad magic", FormatError);
  }
  SUBCASE("version mismatch") {
    bytes[4] = 9;
    std::istringstream in(bytes);
    CHECK_THROWS_AS(deserialize_blco(in), FormatError);
  }
  SUBCASE("truncated payload") {
    std::istringstream in(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(deserialize_blco(in), IoError);
  }
  SUBCASE("index outside the field width") {
    // first block's first index lives right after key+nnz of block 0
    std::size_t header = 4 + 2 + 2 + 3 * 8 + 2 + 3 * 2 + 8 + 8;
    bytes[header + 16] = char(0xff);
    std::istringstream in(bytes);
    CHECK_THROWS_AS(deserialize_blco(in), FormatError);
  }
}

TEST_CASE("header of a multi-billion-element descriptor parses without payload") {
  // Hand-built header: 3 modes of 2^20, 1.7e9 elements in 13 max-sized blocks.
  std::ostringstream out;
  auto t = BlcoTensor{};
  t.layout = make_layout(std::vector<index_t>{1 << 20, 1 << 20, 1 << 20}, 64);
  t.max_nnz_per_block = kDefaultMaxNnzPerBlock;
  serialize_blco(t, out);  // zero blocks
  std::string bytes = out.str();
  // patch the block count to 13 without materializing any block payload
  bytes[bytes.size() - 8] = 13;
  std::istringstream in(bytes);
  auto h = read_blco_header(in);
  CHECK(h.block_count == 13);
  CHECK(h.max_nnz_per_block == kDefaultMaxNnzPerBlock);
  CHECK(h.block_count * h.max_nnz_per_block > 1'700'000'000ull);
  CHECK(h.dims == std::vector<index_t>{1 << 20, 1 << 20, 1 << 20});
}
