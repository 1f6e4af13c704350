#pragma once

// Dense kernels shared by the convolution ops. Every routine accumulates each
// output element in a fixed order, so results are independent of threading.

#include <cstddef>
#include <vector>

namespace stcgan::kernels {

// C[M,N] += A[M,K] * B[K,N], all row-major and contiguous.
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

// C[M,N] += A[K,M]^T * B[K,N].
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c);

// dst[cols, rows] = src[rows, cols]^T
template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst);

struct ConvGeometry {
  std::size_t channels;
  std::size_t height;
  std::size_t width;
  std::size_t kernel;
  std::size_t stride;
  std::size_t pad;
  std::size_t out_height;
  std::size_t out_width;

  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_height * out_width; }
};

// Unfolds one image [C,H,W] into columns [C*k*k, Ho*Wo]; padding reads as zero.
template <typename T>
void im2col(const ConvGeometry& g, const T* image, T* col);

// Adjoint of im2col: scatters columns back into the (zeroed by caller) image.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* image);

}  // namespace stcgan::kernels
