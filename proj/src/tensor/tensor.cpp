#include "stcgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stcgan {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void require_finite_or_throw(bool finite, std::string_view op) {
  if (!finite) throw NumericError("non-finite value produced by " + std::string(op));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape_numel(shape) != data.size()) {
    throw ConfigError("tensor shape " + shape_str(shape) + " does not match " +
                      std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::make_shared<std::vector<T>>(std::move(data));
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> data(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ConfigError("item() on tensor of shape " + shape_str(shape()));
  return (*impl_->data)[0];
}

template <typename T>
std::span<T> Tensor<T>::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data->size(), T(0));
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out;
  out.impl_ = std::make_shared<Impl>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out = detach();
  out.impl_->data = std::make_shared<std::vector<T>>(*impl_->data);
  out.impl_->requires_grad = impl_->requires_grad;
  out.impl_->grad = impl_->grad;
  return out;
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(impl_->data->begin(), impl_->data->end(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
Tape<T>*& Tape<T>::active_slot() noexcept {
  static thread_local Tape<T>* slot = nullptr;
  return slot;
}

template <typename T>
Tape<T>* Tape<T>::active() noexcept {
  return active_slot();
}

template <typename T>
void Tape<T>::record(std::string_view kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
                     std::function<void()> backward) {
  if (consumed_) throw ConfigError("recording on a tape that was already replayed");
  records_.push_back(Record{kind, std::move(inputs), std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw ConfigError("tape already replayed; record a new forward pass");
  if (loss.numel() != 1) throw ConfigError("backward() needs a scalar loss");
  consumed_ = true;
  Tensor<T> seed = loss;
  seed.grad_buffer()[0] += T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // not on a path to the loss
    it->backward();
  }
  records_.clear();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace stcgan
