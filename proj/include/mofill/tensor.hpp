#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mofill/error.hpp"

namespace mofill {

struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

struct Size2 {
  int h = 0;
  int w = 0;
  bool operator==(const Size2&) const = default;
};

enum class Precision { standard, verification };

// Dense NCHW array, row-major with w fastest. float is the training and
// inference precision; double is used only for gradient verification.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  explicit Tensor4(Shape4 shape, T fill = T(0)) : shape_(checked(shape)), data_(shape.numel(), fill) {}
  Tensor4(int n, int c, int h, int w, T fill = T(0)) : Tensor4(Shape4{n, c, h, w}, fill) {}

  static constexpr Precision precision() {
    return sizeof(T) == sizeof(double) ? Precision::verification : Precision::standard;
  }

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // Pointer to the (n, c) image plane.
  T* plane(int n, int c) { return data_.data() + offset(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + offset(n, c, 0, 0); }
  // Pointer to sample n (all channels).
  T* sample(int n) { return data_.data() + offset(n, 0, 0, 0); }
  const T* sample(int n) const { return data_.data() + offset(n, 0, 0, 0); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const Tensor4&) const = default;

 private:
  static Shape4 checked(Shape4 s) {
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw ShapeError("negative tensor dimension in " + s.str());
    return s;
  }

  Shape4 shape_{};
  std::vector<T> data_;
};

using Tensor = Tensor4<float>;
using TensorD = Tensor4<double>;

template <typename T>
bool all_finite(std::span<const T> values);

template <typename T>
T dot(const Tensor4<T>& a, const Tensor4<T>& b);

void require_same_shape(const Shape4& a, const Shape4& b, const char* what);

}  // namespace mofill
