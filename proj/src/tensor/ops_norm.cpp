#include <cmath>
#include <vector>

#include "stcgan/ops.hpp"

namespace stcgan {

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     RunningStats<T>& stats, Mode mode, double eps, double momentum) {
  if (!input.defined() || input.rank() != 4) {
    throw ConfigError("batch_norm: input must be a rank-4 tensor");
  }
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  const std::size_t count = batch * plane;
  const Tensor<T>* per_channel[] = {&gamma, &beta, &stats.mean, &stats.var};
  for (const Tensor<T>* p : per_channel) {
    if (!p->defined() || p->numel() != channels) {
      throw ConfigError("batch_norm: per-channel tensors must have " + std::to_string(channels) +
                        " entries");
    }
  }
  if (mode == Mode::Train && count < 2) {
    throw ConfigError("batch_norm: train mode needs at least 2 values per channel, got " +
                      std::to_string(count));
  }

  auto x = input.data();
  auto g = gamma.data();
  auto b = beta.data();
  std::vector<T> xhat(x.size());
  std::vector<T> inv_std(channels);
  std::vector<T> out(x.size());

  for (std::size_t c = 0; c < channels; ++c) {
    double mu = 0.0, var = 0.0;
    if (mode == Mode::Train) {
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) mu += p[i];
      }
      mu /= static_cast<double>(count);
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double d = p[i] - mu;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      auto rm = stats.mean.mutable_data();
      auto rv = stats.var.mutable_data();
      const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
      rm[c] = static_cast<T>((1.0 - momentum) * rm[c] + momentum * mu);
      rv[c] = static_cast<T>((1.0 - momentum) * rv[c] + momentum * unbiased);
    } else {
      mu = stats.mean.data()[c];
      var = stats.var.data()[c];
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[c] = static_cast<T>(is);
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const T xh = static_cast<T>((x[off + i] - mu) * is);
        xhat[off + i] = xh;
        out[off + i] = g[c] * xh + b[c];
      }
    }
  }

  Tensor<T> result(input.shape(), std::move(out));
  require_finite_or_throw(result.all_finite(), "batch_norm");

  if (needs_record<T>({&input, &gamma, &beta})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record(
        "batch_norm", {input, gamma, beta}, result,
        [input, gamma, beta, result, xhat = std::move(xhat), inv_std = std::move(inv_std), mode,
         batch, channels, plane, count]() mutable {
          auto dy = result.grad();
          auto g = gamma.data();
          const bool need_x = input.requires_grad();
          std::span<T> dx = need_x ? input.grad_buffer() : std::span<T>{};
          std::span<T> dg = gamma.requires_grad() ? gamma.grad_buffer() : std::span<T>{};
          std::span<T> db = beta.requires_grad() ? beta.grad_buffer() : std::span<T>{};
          for (std::size_t c = 0; c < channels; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
              const std::size_t off = (n * channels + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[off + i];
                sum_dy_xhat += static_cast<double>(dy[off + i]) * xhat[off + i];
              }
            }
            if (!dg.empty()) dg[c] += static_cast<T>(sum_dy_xhat);
            if (!db.empty()) db[c] += static_cast<T>(sum_dy);
            if (!need_x) continue;
            const double scale = static_cast<double>(g[c]) * inv_std[c];
            const double m = static_cast<double>(count);
            for (std::size_t n = 0; n < batch; ++n) {
              const std::size_t off = (n * channels + c) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                if (mode == Mode::Train) {
                  dx[off + i] += static_cast<T>(
                      scale * (dy[off + i] - sum_dy / m - xhat[off + i] * sum_dy_xhat / m));
                } else {
                  dx[off + i] += static_cast<T>(scale * dy[off + i]);
                }
              }
            }
          }
        });
  }
  return result;
}

template Tensor<float> batch_norm(const Tensor<float>&, const Tensor<float>&,
                                  const Tensor<float>&, RunningStats<float>&, Mode, double,
                                  double);
template Tensor<double> batch_norm(const Tensor<double>&, const Tensor<double>&,
                                   const Tensor<double>&, RunningStats<double>&, Mode, double,
                                   double);

}  // namespace stcgan
