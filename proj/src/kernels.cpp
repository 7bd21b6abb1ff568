#include "stencilml/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include "stencilml/error.hpp"

namespace stencilml::kernels {

namespace {

int g_threads = 0;

int active_threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

// Register tile: kRows rows by Panel<Real>::width columns (two 512-bit vectors).
constexpr int kRows = 6;
constexpr int kDepthBlock = 256;

template <class Real>
struct Panel {
  static constexpr int width = 128 / sizeof(Real);
};

// Tile of `rows` x `cols` (rows <= kRows, cols <= width) over depth [k0, k1).
// The accumulator starts from C when `load` is set, so splitting the depth range
// reproduces one unbroken fma chain.
template <class Real, int Rows, int Cols>
inline void tile(const Real* a, int lda, const Real* b, int ldb, Real* c, int ldc, int k0, int k1, bool load) {
  Real acc[Rows][Cols];
  for (int r = 0; r < Rows; ++r) {
    for (int j = 0; j < Cols; ++j) acc[r][j] = load ? c[r * ldc + j] : Real(0);
  }
  for (int k = k0; k < k1; ++k) {
    const Real* bk = b + static_cast<std::size_t>(k) * ldb;
    for (int r = 0; r < Rows; ++r) {
      const Real av = a[static_cast<std::size_t>(r) * lda + k];
#pragma omp simd
      for (int j = 0; j < Cols; ++j) acc[r][j] = std::fma(av, bk[j], acc[r][j]);
    }
  }
  for (int r = 0; r < Rows; ++r) {
    for (int j = 0; j < Cols; ++j) c[r * ldc + j] = acc[r][j];
  }
}

// Ragged tile for the right-hand column remainder.
template <class Real>
inline void tile_ragged(const Real* a, int lda, const Real* b, int ldb, Real* c, int ldc, int rows, int cols, int k0,
                        int k1, bool load) {
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < cols; ++j) {
      Real acc = load ? c[r * ldc + j] : Real(0);
      for (int k = k0; k < k1; ++k) acc = std::fma(a[static_cast<std::size_t>(r) * lda + k], b[static_cast<std::size_t>(k) * ldb + j], acc);
      c[r * ldc + j] = acc;
    }
  }
}

template <class Real>
void check_shapes(const Matrix<Real>& a, const Matrix<Real>& b, const Matrix<Real>& c) {
  if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) throw ContractError("gemm shape mismatch");
}

}  // namespace

void set_threads(int n) { g_threads = n > 0 ? n : 0; }
int threads() { return active_threads(); }

template <class Real>
void gemm(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c, Accumulate acc) {
  check_shapes(a, b, c);
  constexpr int W = Panel<Real>::width;
  const int m = a.rows;
  const int n = b.cols;
  const int depth = a.cols;
  const int row_blocks = (m + kRows - 1) / kRows;
  if (m == 0 || n == 0) return;
  if (depth == 0) {
    if (acc == Accumulate::No) c.fill(Real(0));
    return;
  }

#pragma omp parallel num_threads(active_threads())
  for (int k0 = 0; k0 < depth; k0 += kDepthBlock) {
    const int k1 = std::min(depth, k0 + kDepthBlock);
    const bool load = acc == Accumulate::Yes || k0 > 0;
    for (int j0 = 0; j0 < n; j0 += W) {
      const int cols = std::min(W, n - j0);
#pragma omp for schedule(static)
      for (int rb = 0; rb < row_blocks; ++rb) {
        const int i0 = rb * kRows;
        const int rows = std::min(kRows, m - i0);
        const Real* ap = a.row(i0);
        const Real* bp = b.values.data() + j0;
        Real* cp = c.row(i0) + j0;
        if (cols == W && rows == kRows) {
          tile<Real, kRows, W>(ap, depth, bp, n, cp, n, k0, k1, load);
        } else if (cols == W) {
          for (int r = 0; r < rows; ++r) {
            tile<Real, 1, W>(ap + static_cast<std::size_t>(r) * depth, depth, bp, n, cp + static_cast<std::size_t>(r) * n, n, k0, k1, load);
          }
        } else {
          tile_ragged<Real>(ap, depth, bp, n, cp, n, rows, cols, k0, k1, load);
        }
      }
    }
  }
}

template <class Real>
void transpose(const Matrix<Real>& a, Matrix<Real>& out) {
  out.resize(a.cols, a.rows);
  constexpr int B = 32;
#pragma omp parallel for num_threads(active_threads()) schedule(static)
  for (int i0 = 0; i0 < a.rows; i0 += B) {
    for (int j0 = 0; j0 < a.cols; j0 += B) {
      for (int i = i0; i < std::min(a.rows, i0 + B); ++i) {
        for (int j = j0; j < std::min(a.cols, j0 + B); ++j) out(j, i) = a(i, j);
      }
    }
  }
}

template <class Real>
void column_sums(const Matrix<Real>& a, std::vector<double>& out) {
  out.assign(a.cols, 0.0);
  constexpr int B = 64;
#pragma omp parallel for num_threads(active_threads()) schedule(static)
  for (int j0 = 0; j0 < a.cols; j0 += B) {
    const int j1 = std::min(a.cols, j0 + B);
    double local[B] = {};
    for (int i = 0; i < a.rows; ++i) {
      const Real* r = a.row(i);
      for (int j = j0; j < j1; ++j) local[j - j0] += static_cast<double>(r[j]);
    }
    for (int j = j0; j < j1; ++j) out[j] = local[j - j0];
  }
}

template <class Real>
void column_dot(const Matrix<Real>& a, const Matrix<Real>& b, std::vector<double>& out) {
  if (a.rows != b.rows || a.cols != b.cols) throw ContractError("column_dot shape mismatch");
  out.assign(a.cols, 0.0);
  constexpr int B = 64;
#pragma omp parallel for num_threads(active_threads()) schedule(static)
  for (int j0 = 0; j0 < a.cols; j0 += B) {
    const int j1 = std::min(a.cols, j0 + B);
    double local[B] = {};
    for (int i = 0; i < a.rows; ++i) {
      const Real* ra = a.row(i);
      const Real* rb = b.row(i);
      for (int j = j0; j < j1; ++j) local[j - j0] += static_cast<double>(ra[j]) * static_cast<double>(rb[j]);
    }
    for (int j = j0; j < j1; ++j) out[j] = local[j - j0];
  }
}

namespace reference {

template <class Real>
void gemm(const Matrix<Real>& a, const Matrix<Real>& b, Matrix<Real>& c, Accumulate acc) {
  check_shapes(a, b, c);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      Real sum = acc == Accumulate::Yes ? c(i, j) : Real(0);
      for (int k = 0; k < a.cols; ++k) sum = std::fma(a(i, k), b(k, j), sum);
      c(i, j) = sum;
    }
  }
}

template <class Real>
void column_sums(const Matrix<Real>& a, std::vector<double>& out) {
  out.assign(a.cols, 0.0);
  for (int j = 0; j < a.cols; ++j) {
    for (int i = 0; i < a.rows; ++i) out[j] += static_cast<double>(a(i, j));
  }
}

template void gemm<float>(const Matrix<float>&, const Matrix<float>&, Matrix<float>&, Accumulate);
template void gemm<double>(const Matrix<double>&, const Matrix<double>&, Matrix<double>&, Accumulate);
template void column_sums<float>(const Matrix<float>&, std::vector<double>&);
template void column_sums<double>(const Matrix<double>&, std::vector<double>&);

}  // namespace reference

template void gemm<float>(const Matrix<float>&, const Matrix<float>&, Matrix<float>&, Accumulate);
template void gemm<double>(const Matrix<double>&, const Matrix<double>&, Matrix<double>&, Accumulate);
template void transpose<float>(const Matrix<float>&, Matrix<float>&);
template void transpose<double>(const Matrix<double>&, Matrix<double>&);
template void column_sums<float>(const Matrix<float>&, std::vector<double>&);
template void column_sums<double>(const Matrix<double>&, std::vector<double>&);
template void column_dot<float>(const Matrix<float>&, const Matrix<float>&, std::vector<double>&);
template void column_dot<double>(const Matrix<double>&, const Matrix<double>&, std::vector<double>&);

}  // namespace stencilml::kernels
