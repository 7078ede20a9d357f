#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "blco/common.hpp"

namespace blco {

// Dense row-major matrix of doubles.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
};

// N-order sparse tensor in coordinate form: one index array per mode plus a
// parallel value array. Indices are 0-based; coordinate tuples are unique.
struct SparseTensorCoo {
  std::vector<index_t> dims;
  std::vector<std::vector<index_t>> indices;  // indices[mode][element]
  std::vector<double> values;

  int order() const { return static_cast<int>(dims.size()); }
  std::size_t nnz() const { return values.size(); }

  // Bounds, parallel-length and (optionally) duplicate checks. Throws
  // FormatError on violation.
  void validate(bool check_duplicates = false) const;

  // Builds a tensor from per-mode index arrays, summing duplicate
  // coordinates. dims may be empty (inferred as per-mode maxima + 1).
  static SparseTensorCoo from_arrays(std::vector<index_t> dims,
                                     std::vector<std::vector<index_t>> indices,
                                     std::vector<double> values);

  double norm_squared() const;
};

// Rank-R factor matrices, one I_n x R matrix per mode.
struct FactorMatrices {
  std::size_t rank = 0;
  std::vector<DenseMatrix> factors;

  int order() const { return static_cast<int>(factors.size()); }

  // Shape conformance against a dims vector. Throws FormatError.
  void validate(std::span<const index_t> dims) const;

  // Seeded uniform [0,1) initialization, identical across platforms.
  static FactorMatrices random(std::span<const index_t> dims, std::size_t rank,
                               std::uint64_t seed);
  static FactorMatrices ones(std::span<const index_t> dims, std::size_t rank);
};

}  // namespace blco
