#include "carl/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>

namespace carl {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void validate_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor() : Tensor(Shape{}, std::vector<T>{T{0}}) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<T>(shape_numel(shape), T{0}), requires_grad) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : impl_(std::make_shared<Storage>()) {
  validate_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::vector<T> values, bool requires_grad) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows, bool requires_grad) {
  if (rows.size() == 0) throw DimensionError("matrix literal has no rows");
  const std::size_t width = rows.begin()->size();
  std::vector<T> data;
  data.reserve(rows.size() * width);
  for (const auto& row : rows) {
    if (row.size() != width) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{rows.size(), width}, std::move(data), requires_grad);
}

template <typename T>
std::size_t Tensor<T>::rows() const {
  return impl_->shape.empty() ? 1 : impl_->shape.front();
}

template <typename T>
std::size_t Tensor<T>::cols() const {
  if (impl_->shape.size() < 2) return 1;
  std::size_t c = 1;
  for (std::size_t i = 1; i < impl_->shape.size(); ++i) c *= impl_->shape[i];
  return c;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw DimensionError("item() needs a single element, tensor has shape " + shape_to_string(shape()));
  }
  return impl_->data.front();
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T{0});
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  impl_->grad.assign(impl_->data.size(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  auto copy = std::make_shared<Storage>(*impl_);
  return Tensor(std::move(copy));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(impl_->shape, impl_->data, false);
}

template <typename T>
std::uint64_t checksum(std::span<const Tensor<T>> tensors) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& t : tensors) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.raw());
    for (std::size_t i = 0; i < t.numel() * sizeof(T); ++i) {
      hash ^= bytes[i];
      hash *= 1099511628211ULL;
    }
  }
  return hash;
}

template class Tensor<float>;
template class Tensor<double>;
template std::uint64_t checksum<float>(std::span<const Tensor<float>>);
template std::uint64_t checksum<double>(std::span<const Tensor<double>>);

}  // namespace carl
