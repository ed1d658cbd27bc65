#include "mofill/tensor.hpp"

#include <cmath>

namespace mofill {

std::string Shape4::str() const {
  return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w);
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
T dot(const Tensor4<T>& a, const Tensor4<T>& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return static_cast<T>(s);
}

void require_same_shape(const Shape4& a, const Shape4& b, const char* what) {
  if (!(a == b))
    throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);
template float dot<float>(const Tensor4<float>&, const Tensor4<float>&);
template double dot<double>(const Tensor4<double>&, const Tensor4<double>&);

}  // namespace mofill
