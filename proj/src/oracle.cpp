#include "blco/oracle.hpp"

#include <algorithm>
#include <numeric>

namespace blco {
namespace oracle {

DenseMatrix mttkrp_coo(const SparseTensorCoo& t, const FactorMatrices& f, int mode) {
  f.validate(t.dims);
  if (mode < 0 || mode >= t.order()) throw FormatError("mttkrp: mode out of range");
  const std::size_t rank = f.rank;
  DenseMatrix m(t.dims[mode], rank);
  std::vector<double> row(rank);
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    std::fill(row.begin(), row.end(), t.values[e]);
    for (int n = 0; n < t.order(); ++n) {
      if (n == mode) continue;
      const double* a = f.factors[n].row(t.indices[n][e]).data();
      for (std::size_t r = 0; r < rank; ++r) row[r] *= a[r];
    }
    double* dst = m.row(t.indices[mode][e]).data();
    for (std::size_t r = 0; r < rank; ++r) dst[r] += row[r];
  }
  return m;
}

DenseMatrix mttkrp_explicit(const SparseTensorCoo& t, const FactorMatrices& f, int mode) {
  f.validate(t.dims);
  if (mode < 0 || mode >= t.order()) throw FormatError("mttkrp: mode out of range");

  std::size_t cols = 1;
  for (int n = 0; n < t.order(); ++n) {
    if (n == mode) continue;
    if (cols > 1'000'000 / t.dims[n]) throw FormatError("mttkrp_explicit: size guard exceeded");
    cols *= t.dims[n];
  }

  // Column index of the matricization enumerates the non-target coordinates
  // with the lowest mode fastest; the Khatri-Rao rows below use the same
  // enumeration, so the product matches the element-wise definition.
  std::vector<std::size_t> stride(t.order(), 0);
  std::size_t acc = 1;
  for (int n = 0; n < t.order(); ++n) {
    if (n == mode) continue;
    stride[n] = acc;
    acc *= t.dims[n];
  }

  DenseMatrix unfold(t.dims[mode], cols);
  for (std::size_t e = 0; e < t.nnz(); ++e) {
    std::size_t c = 0;
    for (int n = 0; n < t.order(); ++n)
      if (n != mode) c += t.indices[n][e] * stride[n];
    unfold(t.indices[mode][e], c) = t.values[e];
  }

  DenseMatrix krp(cols, f.rank);
  std::vector<index_t> digit(t.order(), 0);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < f.rank; ++r) {
      double p = 1.0;
      for (int n = 0; n < t.order(); ++n)
        if (n != mode) p *= f.factors[n](digit[n], r);
      krp(c, r) = p;
    }
    for (int n = 0; n < t.order(); ++n) {
      if (n == mode) continue;
      if (++digit[n] < t.dims[n]) break;
      digit[n] = 0;
    }
  }

  DenseMatrix m(t.dims[mode], f.rank);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = unfold(i, c);
      if (x == 0.0) continue;
      for (std::size_t r = 0; r < f.rank; ++r) m(i, r) += x * krp(c, r);
    }
  return m;
}

std::vector<std::size_t> stable_counting_sort(std::span<const index_t> keys) {
  std::vector<std::size_t> perm(keys.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return perm;
}

std::vector<std::uint32_t> exclusive_scan(std::span<const std::uint32_t> counts) {
  std::vector<std::uint32_t> out(counts.size());
  std::uint32_t run = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = run;
    run += counts[i];
  }
  return out;
}

std::vector<std::uint8_t> segment_flags(std::span<const index_t> rows) {
  std::vector<std::uint8_t> flags(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    flags[i] = (i == 0 || rows[i] != rows[i - 1]) ? 1 : 0;
  return flags;
}

}  // namespace oracle
}  // namespace blco
