#include "kernels.hpp"

#include <algorithm>

#include "stcgan/ops.hpp"

namespace stcgan::kernels {

namespace {

constexpr std::size_t kColBlock = 256;
constexpr std::size_t kDepthBlock = 128;

// Four rows of C share every load of a B row.
template <typename T>
inline void row_block4(std::size_t n0, std::size_t n1, std::size_t k0, std::size_t k1,
                       std::size_t lda_row, std::size_t lda_col, std::size_t ldb,
                       std::size_t ldc, const T* a, const T* b, T* c) {
  T* __restrict c0 = c;
  T* __restrict c1 = c + ldc;
  T* __restrict c2 = c + 2 * ldc;
  T* __restrict c3 = c + 3 * ldc;
  for (std::size_t p = k0; p < k1; ++p) {
    const T a0 = a[0 * lda_row + p * lda_col];
    const T a1 = a[1 * lda_row + p * lda_col];
    const T a2 = a[2 * lda_row + p * lda_col];
    const T a3 = a[3 * lda_row + p * lda_col];
    const T* __restrict brow = b + p * ldb;
    for (std::size_t j = n0; j < n1; ++j) {
      const T bv = brow[j];
      c0[j] += a0 * bv;
      c1[j] += a1 * bv;
      c2[j] += a2 * bv;
      c3[j] += a3 * bv;
    }
  }
}

template <typename T>
inline void row_block1(std::size_t n0, std::size_t n1, std::size_t k0, std::size_t k1,
                       std::size_t lda_col, std::size_t ldb, const T* a, const T* b, T* c) {
  T* __restrict c0 = c;
  for (std::size_t p = k0; p < k1; ++p) {
    const T a0 = a[p * lda_col];
    const T* __restrict brow = b + p * ldb;
    for (std::size_t j = n0; j < n1; ++j) c0[j] += a0 * brow[j];
  }
}

// A element (i, p) lives at a[i * lda_row + p * lda_col].
template <typename T>
void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda_row,
                  std::size_t lda_col, const T* b, T* c) {
  const std::size_t row_groups = (m + 3) / 4;
  for (std::size_t n0 = 0; n0 < n; n0 += kColBlock) {
    const std::size_t n1 = std::min(n, n0 + kColBlock);
    for (std::size_t k0 = 0; k0 < k; k0 += kDepthBlock) {
      const std::size_t k1 = std::min(k, k0 + kDepthBlock);
#pragma omp parallel for schedule(static) if (stcgan::num_threads() > 1 && row_groups > 1) \
    num_threads(stcgan::num_threads())
      for (std::size_t g = 0; g < row_groups; ++g) {
        const std::size_t i = g * 4;
        if (i + 4 <= m) {
          row_block4(n0, n1, k0, k1, lda_row, lda_col, n, n, a + i * lda_row, b, c + i * n);
        } else {
          for (std::size_t r = i; r < m; ++r) {
            row_block1(n0, n1, k0, k1, lda_col, n, a + r * lda_row, b, c + r * n);
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  gemm_strided(m, n, k, a, k, 1, b, c);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  gemm_strided(m, n, k, a, 1, m, b, c);
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
      }
    }
  }
}

template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* col) {
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t rows = g.col_rows();
  const std::size_t cols = g.col_cols();
#pragma omp parallel for schedule(static) if (stcgan::num_threads() > 1) \
    num_threads(stcgan::num_threads())
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t c = row / kk;
    const std::size_t ky = (row % kk) / g.kernel;
    const std::size_t kx = row % g.kernel;
    const T* plane = image + c * g.height * g.width;
    T* out = col + row * cols;
    for (std::size_t oy = 0; oy < g.out_height; ++oy) {
      const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                static_cast<std::ptrdiff_t>(g.pad);
      T* dst = out + oy * g.out_width;
      if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
        std::fill(dst, dst + g.out_width, T(0));
        continue;
      }
      const T* src = plane + static_cast<std::size_t>(iy) * g.width;
      for (std::size_t ox = 0; ox < g.out_width; ++ox) {
        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width))
                      ? T(0)
                      : src[static_cast<std::size_t>(ix)];
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* image) {
  const std::size_t kk = g.kernel * g.kernel;
  const std::size_t cols = g.col_cols();
  // Parallel over channels: each channel's plane is written by one thread, and
  // within it the kernel offsets are visited in a fixed order.
#pragma omp parallel for schedule(static) if (stcgan::num_threads() > 1) \
    num_threads(stcgan::num_threads())
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = image + c * g.height * g.width;
    for (std::size_t r = 0; r < kk; ++r) {
      const std::size_t ky = r / g.kernel;
      const std::size_t kx = r % g.kernel;
      const T* src = col + (c * kk + r) * cols;
      for (std::size_t oy = 0; oy < g.out_height; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
        T* dst = plane + static_cast<std::size_t>(iy) * g.width;
        const T* s = src + oy * g.out_width;
        for (std::size_t ox = 0; ox < g.out_width; ++ox) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
          dst[static_cast<std::size_t>(ix)] += s[ox];
        }
      }
    }
  }
}

template void gemm_nn<float>(std::size_t, std::size_t, std::size_t, const float*, const float*,
                             float*);
template void gemm_nn<double>(std::size_t, std::size_t, std::size_t, const double*,
                              const double*, double*);
template void gemm_tn<float>(std::size_t, std::size_t, std::size_t, const float*, const float*,
                             float*);
template void gemm_tn<double>(std::size_t, std::size_t, std::size_t, const double*,
                              const double*, double*);
template void transpose<float>(std::size_t, std::size_t, const float*, float*);
template void transpose<double>(std::size_t, std::size_t, const double*, double*);
template void im2col<float>(const ConvGeometry&, const float*, float*);
template void im2col<double>(const ConvGeometry&, const double*, double*);
template void col2im<float>(const ConvGeometry&, const float*, float*);
template void col2im<double>(const ConvGeometry&, const double*, double*);

}  // namespace stcgan::kernels
