#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lkaseg {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::f32; }
template <>
constexpr DType dtype_of<double>() { return DType::f64; }

/// Thrown when tensor shapes are inconsistent with an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation produces a NaN or Inf from finite inputs.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (N, C, H, W) extent of a rank-4 tensor.
struct Shape {
  std::int64_t n = 0;
  std::int64_t c = 0;
  std::int64_t h = 0;
  std::int64_t w = 0;

  [[nodiscard]] constexpr std::int64_t numel() const { return n * c * h * w; }
  [[nodiscard]] constexpr std::int64_t plane() const { return h * w; }
  [[nodiscard]] constexpr bool positive() const {
    return n > 0 && c > 0 && h > 0 && w > 0;
  }
  [[nodiscard]] std::string str() const;

  auto operator<=>(const Shape&) const = default;
};

/// Dense row-major (N, C, H, W) tensor with value semantics.
///
/// A default-constructed tensor is empty and only serves as a placeholder;
/// every other constructor requires all four extents to be positive.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(shape, T(0)); }
  static Tensor ones(Shape shape) { return Tensor(shape, T(1)); }
  static Tensor full(Shape shape, T value) { return Tensor(shape, value); }
  static Tensor scalar(T value) { return Tensor(Shape{1, 1, 1, 1}, value); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::int64_t n() const { return shape_.n; }
  [[nodiscard]] std::int64_t c() const { return shape_.c; }
  [[nodiscard]] std::int64_t h() const { return shape_.h; }
  [[nodiscard]] std::int64_t w() const { return shape_.w; }
  [[nodiscard]] std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] std::span<T> data() { return data_; }
  [[nodiscard]] std::span<const T> data() const { return data_; }
  [[nodiscard]] const std::vector<T>& values() const { return data_; }

  [[nodiscard]] std::int64_t offset(std::int64_t n, std::int64_t c, std::int64_t y,
                                    std::int64_t x) const {
    return ((n * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) {
    return data_[static_cast<std::size_t>(offset(n, c, y, x))];
  }
  [[nodiscard]] T at(std::int64_t n, std::int64_t c, std::int64_t y, std::int64_t x) const {
    return data_[static_cast<std::size_t>(offset(n, c, y, x))];
  }
  T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// Pointer to the start of the (n, c) spatial plane.
  T* plane(std::int64_t n, std::int64_t c) { return data_.data() + offset(n, c, 0, 0); }
  [[nodiscard]] const T* plane(std::int64_t n, std::int64_t c) const {
    return data_.data() + offset(n, c, 0, 0);
  }

  [[nodiscard]] bool all_finite() const;
  void fill(T value);
  /// In-place `*this += other`; shapes must match.
  Tensor& operator+=(const Tensor& other);

  template <typename U>
  [[nodiscard]] Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_{};
  std::vector<T> data_;
};

/// Throws NumericalError naming `op` if any element is NaN or Inf.
template <typename T>
void require_finite(const Tensor<T>& t, std::string_view op);

void require_same_shape(const Shape& a, const Shape& b, std::string_view op);

/// Largest elementwise |a - b|.
template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace lkaseg
