#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stcgan/error.hpp"

namespace stcgan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor with shared storage. Copies of a Tensor alias the
// same buffer; use clone() for a deep copy. Image data is NCHW.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data->size(); }

  std::span<const T> data() const { return *impl_->data; }
  // Mutation is reserved for leaves: parameter updates and finite-difference probes.
  // Detached views observe the change.
  std::span<T> mutable_data() { return *impl_->data; }
  T item() const;

  bool requires_grad() const noexcept { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const noexcept { return impl_ && !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  // Allocates a zero gradient buffer on first use. Gradient accumulation is
  // the one mutation allowed through a const handle.
  std::span<T> grad_buffer() const;
  void zero_grad() const;
  void clear_grad() const { impl_->grad.clear(); }

  // Shares the value buffer; carries no gradient and is never recorded.
  Tensor detach() const;
  Tensor clone() const;

  bool all_finite() const;
  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::shared_ptr<std::vector<T>> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Ordered record of differentiable operations. Operations append themselves
// while a TapeScope for this tape is active; backward() walks the records in
// reverse, so each record's inputs were produced before it.
template <typename T>
class Tape {
 public:
  struct Record {
    std::string_view kind;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string_view kind, std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. A tape can be replayed once.
  void backward(const Tensor<T>& loss);

  std::size_t size() const noexcept { return records_.size(); }
  bool consumed() const noexcept { return consumed_; }
  const std::vector<Record>& records() const noexcept { return records_; }

  // The tape receiving records on this thread, or nullptr when gradients are off.
  static Tape* active() noexcept;

 private:
  template <typename U>
  friend class TapeScope;
  template <typename U>
  friend class NoGradScope;

  static Tape*& active_slot() noexcept;

  std::vector<Record> records_;
  bool consumed_ = false;
};

template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(Tape<T>::active_slot()) {
    Tape<T>::active_slot() = &tape;
  }
  ~TapeScope() { Tape<T>::active_slot() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape<T>::active_slot()) { Tape<T>::active_slot() = nullptr; }
  ~NoGradScope() { Tape<T>::active_slot() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
};

// True when an op over `inputs` must be recorded on the active tape.
template <typename T>
bool needs_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const Tensor<T>* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void require_finite_or_throw(bool finite, std::string_view op);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace stcgan
