#pragma once

#include "blco/types.hpp"

namespace blco {

// R x R Gram product a^T a. The result is symmetric to the last bit: the
// upper triangle is computed and mirrored.
DenseMatrix gram(const DenseMatrix& a);

// In-place element-wise product acc[i] *= b[i]. Shapes must match.
DenseMatrix& hadamard_accumulate(DenseMatrix& acc, const DenseMatrix& b);

// Solves A * V = M for A where V is R x R symmetric positive semi-definite,
// via Cholesky factorization. On factorization failure retries with a
// Tikhonov shift lambda = 1e-12 * trace(V)/R on the diagonal, escalating
// lambda x10 up to 1e-3 * trace(V)/R before giving up.
DenseMatrix solve_normal(const DenseMatrix& m, const DenseMatrix& v);

}  // namespace blco
