#pragma once

#include <cstddef>
#include <cstdint>

#include "stcgan/tensor.hpp"

namespace stcgan {

// Worker threads used inside individual ops. Each output element is computed
// by the same instruction sequence regardless of the count, so results do not
// depend on it.
void set_num_threads(int threads);
int num_threads();

enum class Mode { Train, Eval };

// While one is alive on the current thread, ops with a kink (relu, leaky relu,
// l1_loss, the bce_loss clamp) fold the side of the kink each element falls
// on into a signature. Two evaluations with equal signatures ran through the
// same linear pieces.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  static KinkMonitor* active();
  void observe(unsigned side) { signature_ = (signature_ ^ side) * 0x100000001b3ULL; }
  std::uint64_t signature() const { return signature_; }
  void reset() { signature_ = 0xcbf29ce484222325ULL; }

 private:
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
  KinkMonitor* previous_;
};

enum class Activation { None, Relu, LeakyRelu, Tanh, Sigmoid };

const char* activation_name(Activation kind);

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBceEps = 1e-7;

// Output extent of a strided convolution along one axis.
std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);
// Output extent of the matching transposed convolution.
std::size_t conv_transpose_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                    std::size_t pad);

// Cross-correlation. weight is [Cout, Cin, k, k]; bias is [Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride, std::size_t pad);

// Adjoint of conv2d with the same hyperparameters. weight is [Cin, Cout, k, k].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, std::size_t stride, std::size_t pad);

template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;

  static RunningStats init(std::size_t channels) {
    return {Tensor<T>::zeros({channels}), Tensor<T>::full({channels}, T(1))};
  }
};

// Per-channel normalization over N, H and W. Train mode normalizes with the
// batch statistics and folds them into `stats` (unbiased variance); eval mode
// uses `stats` as-is.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>& stats, Mode mode, double eps = kBnEps,
                     double momentum = kBnMomentum);

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Activation kind, double slope = kLeakySlope);

template <typename T>
Tensor<T> relu(const Tensor<T>& input) { return activation(input, Activation::Relu); }
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& input, double slope = kLeakySlope) {
  return activation(input, Activation::LeakyRelu, slope);
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& input) { return activation(input, Activation::Tanh); }
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& input) { return activation(input, Activation::Sigmoid); }

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count);

// scale * x + shift, elementwise.
template <typename T>
Tensor<T> affine(const Tensor<T>& input, double scale, double shift);
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sum(const Tensor<T>& input);
template <typename T>
Tensor<T> mean(const Tensor<T>& input);

// Mean binary cross entropy. pred is clamped to [eps, 1 - eps]; clamped
// entries pass no gradient. target is a constant.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps = kBceEps);

// Mean absolute difference; target is a constant.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace stcgan
