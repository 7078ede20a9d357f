#include "blco/dense_kernels.hpp"

#include <cmath>
#include <optional>

namespace blco {

DenseMatrix gram(const DenseMatrix& a) {
  if (!a.all_finite()) throw FormatError("gram: non-finite entry");
  const std::size_t r = a.cols;
  DenseMatrix g(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = i; j < r; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows; ++k) s += a(k, i) * a(k, j);
      g(i, j) = s;
      g(j, i) = s;
    }
  }
  return g;
}

DenseMatrix& hadamard_accumulate(DenseMatrix& acc, const DenseMatrix& b) {
  if (!acc.same_shape(b)) throw FormatError("hadamard: shape mismatch");
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] *= b.data[i];
  return acc;
}

namespace {

// Lower-triangular Cholesky of v + shift*I. Returns nullopt on a
// non-positive or non-finite pivot.
std::optional<DenseMatrix> cholesky(const DenseMatrix& v, double shift) {
  const std::size_t r = v.rows;
  DenseMatrix l(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = v(i, j) + (i == j ? shift : 0.0);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

// Solves L L^T x = b in place, one right-hand side.
void cholesky_solve(const DenseMatrix& l, std::span<double> b) {
  const std::size_t r = l.rows;
  for (std::size_t i = 0; i < r; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
  for (std::size_t ii = r; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < r; ++k) s -= l(k, ii) * b[k];
    b[ii] = s / l(ii, ii);
  }
}

}  // namespace

DenseMatrix solve_normal(const DenseMatrix& m, const DenseMatrix& v) {
  if (v.rows != v.cols) throw FormatError("solve_normal: v must be square");
  if (m.cols != v.rows) throw FormatError("solve_normal: m/v shape mismatch");
  const std::size_t r = v.rows;

  double trace = 0.0;
  for (std::size_t i = 0; i < r; ++i) trace += v(i, i);
  const double unit = trace > 0.0 ? trace / static_cast<double>(r) : 1.0;

  std::optional<DenseMatrix> l = cholesky(v, 0.0);
  for (double lam = 1e-12 * unit; !l && lam <= 1e-3 * unit * (1.0 + 1e-9); lam *= 10.0)
    l = cholesky(v, lam);
  if (!l) throw Error("solve_normal: matrix singular after maximal diagonal shift");

  // Row i of A solves V a_i = m_i (V symmetric).
  DenseMatrix a = m;
  std::vector<double> rhs(r);
  for (std::size_t i = 0; i < a.rows; ++i) {
    auto row = a.row(i);
    std::copy(row.begin(), row.end(), rhs.begin());
    cholesky_solve(*l, rhs);
    std::copy(rhs.begin(), rhs.end(), row.begin());
  }
  return a;
}

}  // namespace blco
