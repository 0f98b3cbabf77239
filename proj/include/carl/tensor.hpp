#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "carl/errors.hpp"

namespace carl {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array that can take part in a recorded computation.
///
/// A Tensor is a handle: copies share storage, data and gradient. Parameters
/// are ordinary tensors with requires_grad set; a Tape writes their gradients
/// in place during backward. Use clone() for an independent deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor vector(std::vector<T> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows,
                       bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  /// Leading dimension; 1 for a scalar.
  std::size_t rows() const;
  /// Product of the trailing dimensions; the row length of a matrix.
  std::size_t cols() const;

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T* raw() { return impl_->data.data(); }
  const T* raw() const { return impl_->data.data(); }

  T item() const;
  T& at(std::size_t i) { return impl_->data.at(i); }
  T at(std::size_t i) const { return impl_->data.at(i); }
  T& operator()(std::size_t r, std::size_t c) { return impl_->data[r * cols() + c]; }
  T operator()(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  /// Gradient buffer, allocated as zeros on first access.
  std::span<T> mutable_grad();
  void zero_grad();
  void clear_grad() { impl_->grad.clear(); }

  /// Index of the producing node in its Tape, or -1 for leaves.
  std::int64_t node_id() const { return impl_->node_id; }
  std::uint64_t tape_id() const { return impl_->tape_id; }
  void set_origin(std::uint64_t tape_id, std::int64_t node_id) {
    impl_->tape_id = tape_id;
    impl_->node_id = node_id;
  }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }
  Tensor clone() const;
  /// Values only, detached from any record, requires_grad off.
  Tensor detach() const;

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(impl_->data[i]);
    return Tensor<U>(shape(), std::move(out));
  }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::int64_t node_id = -1;
    std::uint64_t tape_id = 0;
  };
  explicit Tensor(std::shared_ptr<Storage> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Storage> impl_;
};

/// 64-bit FNV-1a over the raw bytes of each tensor, in order.
template <typename T>
std::uint64_t checksum(std::span<const Tensor<T>> tensors);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace carl
