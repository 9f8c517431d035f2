#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hago/errors.hpp"

namespace hago {

// Dense row-major matrix. Rows are the unit of access everywhere (embedding
// rows, gradient rows), so the interface hands out spans.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void set_zero() { std::fill(data_.begin(), data_.end(), T(0)); }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw shape_error("dot: dimension mismatch");
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T squared_norm(std::span<const T> a) {
  T s = T(0);
  for (T x : a) s += x * x;
  return s;
}

template <typename T>
T norm(std::span<const T> a) {
  return std::sqrt(squared_norm(a));
}

// y += c * x
template <typename T>
void axpy(T c, std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
  for (T x : m.data()) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace hago
