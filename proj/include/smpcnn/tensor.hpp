#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smpcnn/errors.hpp"
#include "smpcnn/ring.hpp"

namespace smpcnn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  return os.str();
}

/// Dense row-major tensor.
template <class T>
struct Tensor {
  Shape dims;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape d) : dims(std::move(d)), data(numel(dims)) {}
  Tensor(Shape d, std::vector<T> values) : dims(std::move(d)), data(std::move(values)) {
    if (data.size() != numel(dims)) {
      throw ShapeError("tensor of shape " + to_string(dims) + " given " +
                       std::to_string(data.size()) + " values");
    }
  }

  std::size_t size() const noexcept { return data.size(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

using RingTensor = Tensor<ring_t>;

inline void require_same_dims(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

}  // namespace smpcnn
