#include "lkaseg/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace lkaseg {

std::string Shape::str() const { return fmt::format("{}x{}x{}x{}", n, c, h, w); }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  if (!shape.positive()) {
    throw ShapeError("tensor extents must be positive, got " + shape.str());
  }
  data_.assign(static_cast<std::size_t>(shape.numel()), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), data_(std::move(values)) {
  if (!shape.positive()) {
    throw ShapeError("tensor extents must be positive, got " + shape.str());
  }
  if (static_cast<std::int64_t>(data_.size()) != shape.numel()) {
    throw ShapeError(fmt::format("tensor of shape {} needs {} values, got {}", shape.str(),
                                 shape.numel(), data_.size()));
  }
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  require_same_shape(shape_, other.shape_, "accumulate");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
void require_finite(const Tensor<T>& t, std::string_view op) {
  const auto values = t.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericalError(fmt::format("{}: non-finite value {} at flat index {}", op,
                                       static_cast<double>(values[i]), i));
    }
  }
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view op) {
  if (a != b) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, a.str(), b.str()));
  }
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

template class Tensor<float>;
template class Tensor<double>;
template void require_finite(const Tensor<float>&, std::string_view);
template void require_finite(const Tensor<double>&, std::string_view);
template double max_abs_diff(const Tensor<float>&, const Tensor<float>&);
template double max_abs_diff(const Tensor<double>&, const Tensor<double>&);

}  // namespace lkaseg
