#include "blco/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace blco {

bool DenseMatrix::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

void SparseTensorCoo::validate(bool check_duplicates) const {
  if (static_cast<std::size_t>(order()) != indices.size())
    throw FormatError("coo: index array count does not match order");
  for (int m = 0; m < order(); ++m) {
    if (dims[m] < 1) throw FormatError("coo: mode length must be >= 1");
    if (indices[m].size() != values.size())
      throw FormatError("coo: index/value arrays have mismatched lengths");
    for (index_t i : indices[m])
      if (i >= dims[m]) throw FormatError("coo: coordinate out of range");
  }
  if (check_duplicates && nnz() > 1) {
    std::vector<std::size_t> perm(nnz());
    std::iota(perm.begin(), perm.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) {
      for (int m = 0; m < order(); ++m)
        if (indices[m][a] != indices[m][b]) return indices[m][a] < indices[m][b];
      return false;
    };
    std::sort(perm.begin(), perm.end(), less);
    for (std::size_t e = 1; e < perm.size(); ++e)
      if (!less(perm[e - 1], perm[e]))
        throw FormatError("coo: duplicate coordinate tuple");
  }
}

SparseTensorCoo SparseTensorCoo::from_arrays(std::vector<index_t> dims,
                                             std::vector<std::vector<index_t>> indices,
                                             std::vector<double> values) {
  const int order = static_cast<int>(indices.size());
  if (order == 0) throw FormatError("coo: at least one mode required");
  for (const auto& idx : indices)
    if (idx.size() != values.size())
      throw FormatError("coo: index/value arrays have mismatched lengths");
  if (dims.empty()) {
    dims.assign(order, 1);
    for (int m = 0; m < order; ++m)
      for (index_t i : indices[m]) dims[m] = std::max(dims[m], i + 1);
  }

  // Stable lexicographic sort, then merge runs of equal coordinates. Stability
  // keeps the summation order (and thus the bytes) deterministic.
  std::vector<std::size_t> perm(values.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    for (int m = 0; m < order; ++m)
      if (indices[m][a] != indices[m][b]) return indices[m][a] < indices[m][b];
    return false;
  });

  SparseTensorCoo out;
  out.dims = std::move(dims);
  out.indices.assign(order, {});
  auto same = [&](std::size_t a, std::size_t b) {
    for (int m = 0; m < order; ++m)
      if (indices[m][a] != indices[m][b]) return false;
    return true;
  };
  for (std::size_t e = 0; e < perm.size();) {
    std::size_t f = e;
    double sum = values[perm[e]];
    for (++f; f < perm.size() && same(perm[e], perm[f]); ++f) sum += values[perm[f]];
    for (int m = 0; m < order; ++m) out.indices[m].push_back(indices[m][perm[e]]);
    out.values.push_back(sum);
    e = f;
  }
  out.validate();
  return out;
}

double SparseTensorCoo::norm_squared() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return s;
}

void FactorMatrices::validate(std::span<const index_t> dims) const {
  if (factors.size() != dims.size())
    throw FormatError("factors: mode count does not match tensor order");
  for (std::size_t m = 0; m < factors.size(); ++m) {
    if (factors[m].rows != dims[m] || factors[m].cols != rank)
      throw FormatError("factors: mode " + std::to_string(m + 1) + " has shape " +
                        std::to_string(factors[m].rows) + "x" + std::to_string(factors[m].cols) +
                        ", expected " + std::to_string(dims[m]) + "x" + std::to_string(rank));
    if (factors[m].data.size() != factors[m].rows * factors[m].cols)
      throw FormatError("factors: malformed matrix storage");
  }
}

namespace {
// 53-bit mantissa draw from a raw 64-bit state; avoids the
// implementation-defined behaviour of std::uniform_real_distribution.
inline double unit_double(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

// xoshiro-style splitmix64; small, seedable, portable.
struct SplitMix64 {
  std::uint64_t state;
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};
}  // namespace

FactorMatrices FactorMatrices::random(std::span<const index_t> dims, std::size_t rank,
                                      std::uint64_t seed) {
  if (rank < 1) throw FormatError("factors: rank must be >= 1");
  FactorMatrices f;
  f.rank = rank;
  SplitMix64 rng{seed};
  for (index_t dim : dims) {
    DenseMatrix a(dim, rank);
    for (double& v : a.data) v = unit_double(rng.next());
    f.factors.push_back(std::move(a));
  }
  return f;
}

FactorMatrices FactorMatrices::ones(std::span<const index_t> dims, std::size_t rank) {
  FactorMatrices f;
  f.rank = rank;
  for (index_t dim : dims) {
    DenseMatrix a(dim, rank);
    std::fill(a.data.begin(), a.data.end(), 1.0);
    f.factors.push_back(std::move(a));
  }
  return f;
}

}  // namespace blco
