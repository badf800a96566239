#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eyetrans/errors.hpp"

namespace eyetrans::nn {

// Dense row-major array. Ops in this library work on rank-2 views; vectors
// are [1, n] and scalars [1, 1].
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T(0)) : shape{rows, cols}, data(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> values) : shape{rows, cols}, data(std::move(values)) {
    if (data.size() != rows * cols) throw ShapeMismatch("tensor data length does not match shape");
  }

  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  std::size_t size() const { return data.size(); }
  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  T* row(std::size_t r) { return data.data() + r * cols(); }
  const T* row(std::size_t r) const { return data.data() + r * cols(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    out.requires_grad = requires_grad;
    return out;
  }

  bool operator==(const Tensor&) const = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)), value(rows, cols), grad(rows, cols) {
    value.requires_grad = true;
  }
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

inline std::string shape_string(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "," + std::to_string(c) + "]";
}

}  // namespace eyetrans::nn
