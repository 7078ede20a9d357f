#include "blco/layout.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace blco;
using namespace blco::testutil;

TEST_CASE("layout for dims (4,4,4) at full width") {
  auto l = make_layout(std::vector<index_t>{4, 4, 4}, 64);
  CHECK(l.mode_bits == std::vector<int>{2, 2, 2});
  CHECK(l.total_bits == 6);
  CHECK(l.stripped_bits == 0);
  // LSB -> MSB: mode1,mode2,mode3,mode1,mode2,mode3
  REQUIRE(l.interleave_map.size() == 6);
  CHECK(l.interleave_map[0] == std::pair{0, 0});
  CHECK(l.interleave_map[1] == std::pair{1, 0});
  CHECK(l.interleave_map[2] == std::pair{2, 0});
  CHECK(l.interleave_map[3] == std::pair{0, 1});
  CHECK(l.interleave_map[4] == std::pair{1, 1});
  CHECK(l.interleave_map[5] == std::pair{2, 1});
}

TEST_CASE("layout for dims (4,4,4) with a 5-bit budget strips mode 3's top bit") {
  auto l = make_layout(std::vector<index_t>{4, 4, 4}, 5);
  CHECK(l.stripped_bits == 1);
  CHECK(l.interleave_map.back() == std::pair{2, 1});
  CHECK(l.rem_bits == std::vector<int>{2, 2, 1});
  CHECK(l.field_shift == std::vector<int>{0, 2, 4});
  CHECK(l.field_mask == std::vector<index_t>{3, 3, 1});
}

TEST_CASE("layout for all-singleton dims is the zero index") {
  auto l = make_layout(std::vector<index_t>{1, 1, 1}, 64);
  CHECK(l.total_bits == 0);
  CHECK(linearize(l, std::vector<index_t>{0, 0, 0}) == 0);
  index_t c[3];
  delinearize(l, 0, 0, c);
  CHECK((c[0] == 0 && c[1] == 0 && c[2] == 0));
}

TEST_CASE("layout rejects bad arguments") {
  CHECK_THROWS_AS(make_layout(std::vector<index_t>{4, 4}, 0), FormatError);
  CHECK_THROWS_AS(make_layout(std::vector<index_t>{4, 4}, 65), FormatError);
  CHECK_THROWS_AS(make_layout(std::vector<index_t>{0, 4}, 32), FormatError);
  CHECK_THROWS_AS(make_layout(std::vector<index_t>{}, 32), FormatError);
}

TEST_CASE("linearize reproduces the reference interleavings") {
  auto l = make_layout(std::vector<index_t>{4, 4, 4}, 64);
  CHECK(linearize(l, std::vector<index_t>{0, 0, 0}) == 0);
  CHECK(linearize(l, std::vector<index_t>{0, 0, 1}) == 4);
  CHECK(linearize(l, std::vector<index_t>{3, 3, 3}) == 63);
  // remaining rows of the reference tensor, in ALTO order
  CHECK(linearize(l, std::vector<index_t>{1, 0, 1}) == 5);
  CHECK(linearize(l, std::vector<index_t>{3, 1, 0}) == 11);
  CHECK(linearize(l, std::vector<index_t>{2, 0, 1}) == 12);
  CHECK(linearize(l, std::vector<index_t>{3, 1, 1}) == 15);
  CHECK(linearize(l, std::vector<index_t>{1, 0, 2}) == 33);
  CHECK(linearize(l, std::vector<index_t>{0, 2, 2}) == 48);
  CHECK(linearize(l, std::vector<index_t>{3, 2, 2}) == 57);
  CHECK(linearize(l, std::vector<index_t>{3, 2, 3}) == 61);
  CHECK(linearize(l, std::vector<index_t>{2, 3, 3}) == 62);
  CHECK_THROWS_AS(linearize(l, std::vector<index_t>{4, 0, 0}), FormatError);
}

TEST_CASE("split_block_key matches the 5-bit reference layout") {
  auto l = make_layout(std::vector<index_t>{4, 4, 4}, 5);

  auto s = split_block_key(l, 48);  // coordinate (0,2,2)
  CHECK(s.block_key == 1);
  CHECK(s.reencoded == 8);

  s = split_block_key(l, 15);  // coordinate (3,1,1)
  CHECK(s.block_key == 0);
  CHECK(s.reencoded == 23);

  s = split_block_key(l, 0);
  CHECK(s.block_key == 0);
  CHECK(s.reencoded == 0);

  // coordinate (3,1,0): mode-1 field 11, mode-2 field 01, mode-3 field 0
  // -> 0b00111 = 7 (its interleaved index is 11 = 0b001011)
  s = split_block_key(l, 11);
  CHECK(s.block_key == 0);
  CHECK(s.reencoded == 7);
}

TEST_CASE("delinearize inverts the reference rows") {
  auto l = make_layout(std::vector<index_t>{4, 4, 4}, 5);
  index_t c[3];
  delinearize(l, 23, 0, c);
  CHECK((c[0] == 3 && c[1] == 1 && c[2] == 1));
  delinearize(l, 1, 1, c);
  CHECK((c[0] == 1 && c[1] == 0 && c[2] == 2));
}

TEST_CASE("exhaustive round-trip over dims (4,4,4)") {
  for (int target : {5, 6, 64}) {
    auto l = make_layout(std::vector<index_t>{4, 4, 4}, target);
    for (index_t i = 0; i < 4; ++i)
      for (index_t j = 0; j < 4; ++j)
        for (index_t k = 0; k < 4; ++k) {
          const index_t coords[3] = {i, j, k};
          auto s = split_block_key(l, linearize(l, coords));
          index_t back[3];
          delinearize(l, s.reencoded, s.block_key, back);
          CHECK((back[0] == i && back[1] == j && back[2] == k));
        }
  }
}

TEST_CASE("encode_coords equals linearize + split over random inputs") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int order = 1 + static_cast<int>(rng.below(5));
    std::vector<index_t> dims(order);
    for (auto& d : dims) d = 1 + rng.below(1u << rng.below(21));
    int total = 0;
    for (auto d : dims) total += bits_for_extent(d);
    const int target = 1 + static_cast<int>(rng.below(64));
    if (total > 128) continue;
    auto l = make_layout(dims, target);
    std::vector<index_t> c(order);
    for (int m = 0; m < order; ++m) c[m] = rng.below(dims[m]);
    auto a = split_block_key(l, linearize(l, c));
    auto b = encode_coords(l, c);
    CHECK(a.block_key == b.block_key);
    CHECK(a.reencoded == b.reencoded);
  }
}

TEST_CASE("bijectivity over random dims up to 2^20 and 5 modes") {
  Rng rng(29);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int order = 2 + static_cast<int>(rng.below(4));
    std::vector<index_t> dims(order);
    for (auto& d : dims) d = 1 + rng.below(index_t{1} << 20);
    const int target = 4 + static_cast<int>(rng.below(61));
    auto l = make_layout(dims, target);
    std::vector<index_t> c(order), back(order);
    for (int s = 0; s < 200; ++s) {
      for (int m = 0; m < order; ++m) c[m] = rng.below(dims[m]);
      auto sp = encode_coords(l, c);
      if (l.total_bits - l.stripped_bits < 64)
        CHECK(sp.reencoded < (index_t{1} << (l.total_bits - l.stripped_bits)));
      delinearize(l, sp.reencoded, sp.block_key, back);
      CHECK(back == c);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("stripping the top bits preserves ALTO order") {
  Rng rng(31);
  std::vector<index_t> dims{37, 1024, 53, 200};
  auto l = make_layout(dims, 17);
  REQUIRE(l.stripped_bits > 0);
  std::vector<index_t> c(4);
  alto_t prev_alto = 0;
  std::pair<index_t, index_t> prev_key{};
  std::vector<std::pair<alto_t, std::pair<index_t, index_t>>> rows;
  for (int s = 0; s < 500; ++s) {
    for (int m = 0; m < 4; ++m) c[m] = rng.below(dims[m]);
    const alto_t a = linearize(l, c);
    auto sp = split_block_key(l, a);
    rows.push_back({a, {sp.block_key, static_cast<index_t>(interleaved_remainder(l, sp.reencoded))}});
  }
  std::sort(rows.begin(), rows.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i - 1].second <= rows[i].second);  // (key, remainder) sorts identically
}

TEST_CASE("mode fields are monotone in the coordinate") {
  std::vector<index_t> dims{64, 64, 64};
  auto l = make_layout(dims, 10);
  std::vector<index_t> c{5, 3, 7};
  std::pair<index_t, index_t> prev{};
  for (index_t x = 0; x < 64; ++x) {
    c[1] = x;
    auto s = encode_coords(l, c);
    std::pair<index_t, index_t> cur{l.key_upper(1, s.block_key),
                                    (s.reencoded >> l.field_shift[1]) & l.field_mask[1]};
    if (x > 0) CHECK(prev < cur);
    prev = cur;
  }
}
