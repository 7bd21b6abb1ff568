#pragma once

#include <algorithm>
#include <span>
#include <vector>

namespace stencilml::kernels {

/// Dense row-major matrix.
template <class Real>
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<Real> values;

  Matrix() = default;
  Matrix(int r, int c, Real fill = Real(0)) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}

  void resize(int r, int c) {
    rows = r;
    cols = c;
    values.resize(static_cast<std::size_t>(r) * c);
  }
  void fill(Real v) { std::fill(values.begin(), values.end(), v); }

  Real* row(int i) { return values.data() + static_cast<std::size_t>(i) * cols; }
  const Real* row(int i) const { return values.data() + static_cast<std::size_t>(i) * cols; }
  Real& operator()(int i, int j) { return values[static_cast<std::size_t>(i) * cols + j]; }
  Real operator()(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
  std::size_t size() const { return values.size(); }
};

enum class Accumulate { No, Yes };

/// C = A B (or C += A B). Every element is a sequential fused multiply-add chain over
/// k in increasing order, so results are bitwise independent of thread count, of the
/// element's row position and of the blocking, and equal to reference::gemm.
template <class Real>
void gemm(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c, Accumulate acc = Accumulate::No);

template <class Real>
void transpose(const Matrix<Real>& a, Matrix<Real>& out);

/// Per-column sums accumulated in double, rows in increasing order.
template <class Real>
void column_sums(const Matrix<Real>& a, std::vector<double>& out);

/// Sum over rows of a(i, j) * b(i, j) per column, in double.
template <class Real>
void column_dot(const Matrix<Real>& a, const Matrix<Real>& b, std::vector<double>& out);

/// Number of OpenMP threads used by the kernels (<= 0 restores the runtime default).
void set_threads(int n);
int threads();

namespace reference {

/// Serial triple loop with the same per-element operation order as kernels::gemm.
template <class Real>
void gemm(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c, Accumulate acc = Accumulate::No);

template <class Real>
void column_sums(const Matrix<Real>& a, std::vector<double>& out);

}  // namespace reference

}  // namespace stencilml::kernels
