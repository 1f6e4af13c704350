#include <algorithm>
#include <vector>

#include "kernels.hpp"
#include "stcgan/ops.hpp"

namespace stcgan {

namespace {

template <typename T>
void require_rank4(const Tensor<T>& t, const char* op, const char* what) {
  if (!t.defined() || t.rank() != 4) {
    throw ConfigError(std::string(op) + ": " + what + " must be a rank-4 tensor");
  }
}

template <typename T>
void check_bias(const Tensor<T>& bias, std::size_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
    throw ConfigError(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                      " does not match " + std::to_string(channels) + " output channels");
  }
}

template <typename T>
void add_bias(const Tensor<T>& bias, std::size_t channels, std::size_t plane, T* out) {
  if (!bias.defined()) return;
  auto b = bias.data();
  for (std::size_t c = 0; c < channels; ++c) {
    std::fill(out + c * plane, out + (c + 1) * plane, b[c]);
  }
}

template <typename T>
void accumulate_bias_grad(const Tensor<T>& bias, std::span<const T> dout, std::size_t batch,
                          std::size_t channels, std::size_t plane) {
  auto db = bias.grad_buffer();
  for (std::size_t c = 0; c < channels; ++c) {
    T acc = 0;
    for (std::size_t n = 0; n < batch; ++n) {
      const T* p = dout.data() + (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
    }
    db[c] += acc;
  }
}

}  // namespace

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t pad) {
  if (stride == 0) throw ConfigError("convolution stride must be >= 1");
  if (in + 2 * pad < kernel) {
    throw ConfigError("convolution kernel " + std::to_string(kernel) +
                      " exceeds padded extent " + std::to_string(in + 2 * pad));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t conv_transpose_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                    std::size_t pad) {
  if (stride == 0) throw ConfigError("convolution stride must be >= 1");
  if (in == 0) throw ConfigError("transposed convolution on empty input");
  const std::size_t full = (in - 1) * stride + kernel;
  if (full <= 2 * pad) throw ConfigError("transposed convolution padding removes all output");
  return full - 2 * pad;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad) {
  require_rank4(input, "conv2d", "input");
  require_rank4(weight, "conv2d", "weight");
  const std::size_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin) {
    throw ConfigError("conv2d: input has " + std::to_string(cin) + " channels, weight expects " +
                      std::to_string(weight.dim(1)));
  }
  if (weight.dim(3) != k) throw ConfigError("conv2d: kernel must be square");
  check_bias(bias, cout, "conv2d");

  const kernels::ConvGeometry g{cin, h, w, k, stride, pad, conv_out_size(h, k, stride, pad),
                                conv_out_size(w, k, stride, pad)};
  const std::size_t rows = g.col_rows(), cols = g.col_cols();
  const std::size_t in_plane = cin * h * w, out_plane = cout * cols;

  std::vector<T> out(batch * out_plane, T(0));
  std::vector<T> col(rows * cols);
  auto x = input.data();
  auto wt = weight.data();
  for (std::size_t n = 0; n < batch; ++n) {
    kernels::im2col(g, x.data() + n * in_plane, col.data());
    T* dst = out.data() + n * out_plane;
    add_bias(bias, cout, cols, dst);
    kernels::gemm_nn(cout, cols, rows, wt.data(), col.data(), dst);
  }
  Tensor<T> result({batch, cout, g.out_height, g.out_width}, std::move(out));
  require_finite_or_throw(result.all_finite(), "conv2d");

  if (needs_record<T>({&input, &weight, &bias})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record(
        "conv2d", {input, weight, bias}, result,
        [input, weight, bias, result, g, batch, cout, in_plane, out_plane]() mutable {
          const std::size_t rows = g.col_rows(), cols = g.col_cols();
          auto dout = result.grad();
          std::vector<T> col(rows * cols);
          if (input.requires_grad()) {
            auto dx = input.grad_buffer();
            auto wt = weight.data();
            for (std::size_t n = 0; n < batch; ++n) {
              std::fill(col.begin(), col.end(), T(0));
              kernels::gemm_tn(rows, cols, cout, wt.data(), dout.data() + n * out_plane,
                               col.data());
              kernels::col2im(g, col.data(), dx.data() + n * in_plane);
            }
          }
          if (weight.requires_grad()) {
            auto dw = weight.grad_buffer();
            auto x = input.data();
            std::vector<T> col_t(rows * cols);
            for (std::size_t n = 0; n < batch; ++n) {
              kernels::im2col(g, x.data() + n * in_plane, col.data());
              kernels::transpose(rows, cols, col.data(), col_t.data());
              kernels::gemm_nn(cout, rows, cols, dout.data() + n * out_plane, col_t.data(),
                               dw.data());
            }
          }
          if (bias.defined() && bias.requires_grad()) {
            accumulate_bias_grad(bias, dout, batch, cout, cols);
          }
        });
  }
  return result;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, std::size_t stride, std::size_t pad) {
  require_rank4(input, "conv_transpose2d", "input");
  require_rank4(weight, "conv_transpose2d", "weight");
  const std::size_t batch = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin) {
    throw ConfigError("conv_transpose2d: input has " + std::to_string(cin) +
                      " channels, weight expects " + std::to_string(weight.dim(0)));
  }
  if (weight.dim(3) != k) throw ConfigError("conv_transpose2d: kernel must be square");
  check_bias(bias, cout, "conv_transpose2d");

  const std::size_t ho = conv_transpose_out_size(h, k, stride, pad);
  const std::size_t wo = conv_transpose_out_size(w, k, stride, pad);
  // Geometry of the forward conv that this op is the adjoint of.
  const kernels::ConvGeometry g{cout, ho, wo, k, stride, pad, h, w};
  const std::size_t rows = g.col_rows(), cols = g.col_cols();
  const std::size_t in_plane = cin * h * w, out_plane = cout * ho * wo;

  std::vector<T> out(batch * out_plane, T(0));
  std::vector<T> col(rows * cols);
  auto x = input.data();
  auto wt = weight.data();
  for (std::size_t n = 0; n < batch; ++n) {
    std::fill(col.begin(), col.end(), T(0));
    kernels::gemm_tn(rows, cols, cin, wt.data(), x.data() + n * in_plane, col.data());
    T* dst = out.data() + n * out_plane;
    kernels::col2im(g, col.data(), dst);
    if (bias.defined()) {
      auto b = bias.data();
      for (std::size_t c = 0; c < cout; ++c) {
        T* p = dst + c * ho * wo;
        for (std::size_t i = 0; i < ho * wo; ++i) p[i] += b[c];
      }
    }
  }
  Tensor<T> result({batch, cout, ho, wo}, std::move(out));
  require_finite_or_throw(result.all_finite(), "conv_transpose2d");

  if (needs_record<T>({&input, &weight, &bias})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record(
        "conv_transpose2d", {input, weight, bias}, result,
        [input, weight, bias, result, g, batch, cin, cout, in_plane, out_plane]() mutable {
          const std::size_t rows = g.col_rows(), cols = g.col_cols();
          auto dout = result.grad();
          std::vector<T> col(rows * cols);
          std::vector<T> col_t;
          const bool need_x = input.requires_grad();
          const bool need_w = weight.requires_grad();
          if (need_w) col_t.resize(rows * cols);
          auto x = input.data();
          auto wt = weight.data();
          for (std::size_t n = 0; n < batch; ++n) {
            if (!need_x && !need_w) break;
            kernels::im2col(g, dout.data() + n * out_plane, col.data());
            if (need_x) {
              auto dx = input.grad_buffer();
              kernels::gemm_nn(cin, cols, rows, wt.data(), col.data(), dx.data() + n * in_plane);
            }
            if (need_w) {
              auto dw = weight.grad_buffer();
              kernels::transpose(rows, cols, col.data(), col_t.data());
              kernels::gemm_nn(cin, rows, cols, x.data() + n * in_plane, col_t.data(), dw.data());
            }
          }
          if (bias.defined() && bias.requires_grad()) {
            accumulate_bias_grad(bias, dout, batch, cout, g.height * g.width);
          }
        });
  }
  return result;
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                              std::size_t, std::size_t);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&,
                               const Tensor<double>&, std::size_t, std::size_t);
template Tensor<float> conv_transpose2d(const Tensor<float>&, const Tensor<float>&,
                                        const Tensor<float>&, std::size_t, std::size_t);
template Tensor<double> conv_transpose2d(const Tensor<double>&, const Tensor<double>&,
                                         const Tensor<double>&, std::size_t, std::size_t);

}  // namespace stcgan
