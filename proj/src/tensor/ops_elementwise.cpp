#include <algorithm>
#include <cmath>
#include <vector>

#include "stcgan/ops.hpp"

namespace stcgan {

namespace {

int g_threads = 1;
thread_local KinkMonitor* g_kink_monitor = nullptr;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.defined() || !b.defined() || a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " +
                      (a.defined() ? shape_str(a.shape()) : "<undefined>") + " vs " +
                      (b.defined() ? shape_str(b.shape()) : "<undefined>"));
  }
}

}  // namespace

KinkMonitor::KinkMonitor() : previous_(g_kink_monitor) { g_kink_monitor = this; }
KinkMonitor::~KinkMonitor() { g_kink_monitor = previous_; }
KinkMonitor* KinkMonitor::active() { return g_kink_monitor; }

void set_num_threads(int threads) { g_threads = std::max(1, threads); }
int num_threads() { return g_threads; }

const char* activation_name(Activation kind) {
  switch (kind) {
    case Activation::None: return "--";
    case Activation::Relu: return "ReLU";
    case Activation::LeakyRelu: return "LReLU";
    case Activation::Tanh: return "Tanh";
    case Activation::Sigmoid: return "Sigmoid";
  }
  return "?";
}

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Activation kind, double slope) {
  if (kind == Activation::None) return input;
  auto x = input.data();
  std::vector<T> out(x.size());
  const T s = static_cast<T>(slope);
  switch (kind) {
    case Activation::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
      break;
    case Activation::LeakyRelu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : s * x[i];
      break;
    case Activation::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-x[i]));
      break;
    case Activation::None:
      break;
  }
  if (KinkMonitor* k = KinkMonitor::active();
      k != nullptr && (kind == Activation::Relu || kind == Activation::LeakyRelu)) {
    for (const T& v : x) k->observe(v > T(0));
  }
  Tensor<T> result(input.shape(), std::move(out));
  if (needs_record<T>({&input})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record(
        activation_name(kind), {input}, result, [input, result, kind, s]() mutable {
          auto dy = result.grad();
          auto x = input.data();
          auto y = result.data();
          auto dx = input.grad_buffer();
          for (std::size_t i = 0; i < dy.size(); ++i) {
            T d = 0;
            switch (kind) {
              case Activation::Relu: d = x[i] > T(0) ? T(1) : T(0); break;
              case Activation::LeakyRelu: d = x[i] > T(0) ? T(1) : s; break;
              case Activation::Tanh: d = T(1) - y[i] * y[i]; break;
              case Activation::Sigmoid: d = y[i] * (T(1) - y[i]); break;
              case Activation::None: d = T(1); break;
            }
            dx[i] += dy[i] * d;
          }
        });
  }
  return result;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.defined() || !b.defined() || a.rank() != 4 || b.rank() != 4) {
    throw ConfigError("concat_channels: inputs must be rank-4 tensors");
  }
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ConfigError("concat_channels: cannot join " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  }
  const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = a.dim(2) * a.dim(3);
  std::vector<T> out(batch * (ca + cb) * plane);
  auto da = a.data();
  auto db = b.data();
  for (std::size_t n = 0; n < batch; ++n) {
    T* dst = out.data() + n * (ca + cb) * plane;
    std::copy_n(da.data() + n * ca * plane, ca * plane, dst);
    std::copy_n(db.data() + n * cb * plane, cb * plane, dst + ca * plane);
  }
  Tensor<T> result({batch, ca + cb, a.dim(2), a.dim(3)}, std::move(out));
  if (needs_record<T>({&a, &b})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record(
        "concat_channels", {a, b}, result, [a, b, result, batch, ca, cb, plane]() mutable {
          auto dy = result.grad();
          for (std::size_t n = 0; n < batch; ++n) {
            const T* src = dy.data() + n * (ca + cb) * plane;
            if (a.requires_grad()) {
              T* ga = a.grad_buffer().data() + n * ca * plane;
              for (std::size_t i = 0; i < ca * plane; ++i) ga[i] += src[i];
            }
            if (b.requires_grad()) {
              T* gb = b.grad_buffer().data() + n * cb * plane;
              for (std::size_t i = 0; i < cb * plane; ++i) gb[i] += src[ca * plane + i];
            }
          }
        });
  }
  return result;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count) {
  if (!input.defined() || input.rank() != 4 || begin + count > input.dim(1) || count == 0) {
    throw ConfigError("slice_channels: channel range [" + std::to_string(begin) + ", " +
                      std::to_string(begin + count) + ") invalid for " +
                      (input.defined() ? shape_str(input.shape()) : "<undefined>"));
  }
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t plane = input.dim(2) * input.dim(3);
  std::vector<T> out(batch * count * plane);
  auto x = input.data();
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(x.data() + (n * channels + begin) * plane, count * plane,
                out.data() + n * count * plane);
  }
  Tensor<T> result({batch, count, input.dim(2), input.dim(3)}, std::move(out));
  if (needs_record<T>({&input})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record(
        "slice_channels", {input}, result,
        [input, result, batch, channels, begin, count, plane]() mutable {
          auto dy = result.grad();
          auto dx = input.grad_buffer();
          for (std::size_t n = 0; n < batch; ++n) {
            T* dst = dx.data() + (n * channels + begin) * plane;
            const T* src = dy.data() + n * count * plane;
            for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
          }
        });
  }
  return result;
}

template <typename T>
Tensor<T> affine(const Tensor<T>& input, double scale, double shift) {
  auto x = input.data();
  const T s = static_cast<T>(scale), t = static_cast<T>(shift);
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i] + t;
  Tensor<T> result(input.shape(), std::move(out));
  if (needs_record<T>({&input})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("affine", {input}, result, [input, result, s]() mutable {
      auto dy = result.grad();
      auto dx = input.grad_buffer();
      for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += s * dy[i];
    });
  }
  return result;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  Tensor<T> result(a.shape(), std::move(out));
  if (needs_record<T>({&a, &b})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("add", {a, b}, result, [a, b, result]() mutable {
      auto dy = result.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dx = t->grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  Tensor<T> result(a.shape(), std::move(out));
  if (needs_record<T>({&a, &b})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("mul", {a, b}, result, [a, b, result]() mutable {
      auto dy = result.grad();
      auto x = a.data();
      auto y = b.data();
      if (a.requires_grad()) {
        auto da = a.grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) da[i] += dy[i] * y[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad_buffer();
        for (std::size_t i = 0; i < dy.size(); ++i) db[i] += dy[i] * x[i];
      }
    });
  }
  return result;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& input) {
  double acc = 0.0;
  for (T v : input.data()) acc += v;
  Tensor<T> result = Tensor<T>::scalar(static_cast<T>(acc));
  if (needs_record<T>({&input})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("sum", {input}, result, [input, result]() mutable {
      const T g = result.grad()[0];
      for (T& d : input.grad_buffer()) d += g;
    });
  }
  return result;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& input) {
  const double n = static_cast<double>(input.numel());
  return affine(sum(input), 1.0 / n, 0.0);
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target, double eps) {
  require_same_shape(pred, target, "bce_loss");
  auto p = pred.data();
  auto t = target.data();
  const double lo = eps, hi = 1.0 - eps;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(static_cast<double>(p[i]), lo, hi);
    acc -= t[i] * std::log(pc) + (1.0 - t[i]) * std::log(1.0 - pc);
  }
  if (KinkMonitor* k = KinkMonitor::active()) {
    for (const T& v : p) k->observe(v < lo ? 0u : (v > hi ? 2u : 1u));
  }
  const double n = static_cast<double>(p.size());
  Tensor<T> result = Tensor<T>::scalar(static_cast<T>(acc / n));
  require_finite_or_throw(result.all_finite(), "bce_loss");
  if (needs_record<T>({&pred})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("bce_loss", {pred, target}, result,
                              [pred, target, result, lo, hi, n]() mutable {
                                const double g = result.grad()[0] / n;
                                auto p = pred.data();
                                auto t = target.data();
                                auto dp = pred.grad_buffer();
                                for (std::size_t i = 0; i < p.size(); ++i) {
                                  const double v = p[i];
                                  if (v < lo || v > hi) continue;
                                  dp[i] += static_cast<T>(g * (-t[i] / v + (1.0 - t[i]) / (1.0 - v)));
                                }
                              });
  }
  return result;
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "l1_loss");
  auto p = pred.data();
  auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(static_cast<double>(p[i]) - t[i]);
  if (KinkMonitor* k = KinkMonitor::active()) {
    for (std::size_t i = 0; i < p.size(); ++i) k->observe(p[i] > t[i] ? 2u : (p[i] < t[i] ? 0u : 1u));
  }
  const double n = static_cast<double>(p.size());
  Tensor<T> result = Tensor<T>::scalar(static_cast<T>(acc / n));
  require_finite_or_throw(result.all_finite(), "l1_loss");
  if (needs_record<T>({&pred})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("l1_loss", {pred, target}, result,
                              [pred, target, result, n]() mutable {
                                const T g = static_cast<T>(result.grad()[0] / n);
                                auto p = pred.data();
                                auto t = target.data();
                                auto dp = pred.grad_buffer();
                                for (std::size_t i = 0; i < p.size(); ++i) {
                                  if (p[i] > t[i]) dp[i] += g;
                                  else if (p[i] < t[i]) dp[i] -= g;
                                }
                              });
  }
  return result;
}

#define STCGAN_INSTANTIATE(T)                                                         \
  template Tensor<T> activation(const Tensor<T>&, Activation, double);               \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t);     \
  template Tensor<T> affine(const Tensor<T>&, double, double);                       \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> sum(const Tensor<T>&);                                          \
  template Tensor<T> mean(const Tensor<T>&);                                         \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&, double);           \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);

STCGAN_INSTANTIATE(float)
STCGAN_INSTANTIATE(double)

#undef STCGAN_INSTANTIATE

}  // namespace stcgan
