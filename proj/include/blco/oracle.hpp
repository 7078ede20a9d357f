#pragma once

#include "blco/types.hpp"

namespace blco {
namespace oracle {

// Element-wise reference MTTKRP: sequential loop over non-zeros; for each,
// the Hadamard product of the N-1 non-target factor rows, scaled by the
// value, accumulates into M[target row].
DenseMatrix mttkrp_coo(const SparseTensorCoo& t, const FactorMatrices& f, int mode);

// Explicitly materializes the mode-n matricization and the full Khatri-Rao
// product (last mode's factor varying slowest, mode 1 fastest) and
// multiplies. Guarded to prod of non-target dims <= 10^6; tiny instances only.
DenseMatrix mttkrp_explicit(const SparseTensorCoo& t, const FactorMatrices& f, int mode);

// Sequential reference primitives for the parallel-phase property tests.

// Permutation that stably sorts keys ascending.
std::vector<std::size_t> stable_counting_sort(std::span<const index_t> keys);

std::vector<std::uint32_t> exclusive_scan(std::span<const std::uint32_t> counts);

// 1 marks the first element of each run of equal values.
std::vector<std::uint8_t> segment_flags(std::span<const index_t> rows);

}  // namespace oracle
}  // namespace blco
