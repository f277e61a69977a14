#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "memsa/core/error.hpp"

namespace memsa {

/// Dense row-major matrix. Sequences are stored one frame per row (T x d).
template <typename T>
class BasicMatrix {
 public:
  using value_type = T;

  BasicMatrix() = default;

  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  BasicMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require(data_.size() == rows_ * cols_,
                    "matrix data length " + std::to_string(data_.size()) + " does not match " +
                        std::to_string(rows_) + "x" + std::to_string(cols_));
  }

  BasicMatrix(std::initializer_list<std::initializer_list<T>> init) {
    rows_ = init.size();
    cols_ = rows_ == 0 ? 0 : init.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      detail::require(row.size() == cols_, "ragged matrix initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static BasicMatrix row_vector(std::span<const T> values) {
    return BasicMatrix(1, values.size(), std::vector<T>(values.begin(), values.end()));
  }

  template <typename U>
  BasicMatrix<U> cast() const {
    BasicMatrix<U> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.data().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool same_shape(const BasicMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  BasicMatrix& operator+=(const BasicMatrix& other) {
    require_same_shape(other, "operator+=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
    return *this;
  }

  BasicMatrix& operator-=(const BasicMatrix& other) {
    require_same_shape(other, "operator-=");
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
    return *this;
  }

  BasicMatrix& operator*=(T scale) {
    for (auto& v : data_) v *= scale;
    return *this;
  }

  friend BasicMatrix operator+(BasicMatrix a, const BasicMatrix& b) { return a += b; }
  friend BasicMatrix operator-(BasicMatrix a, const BasicMatrix& b) { return a -= b; }
  friend BasicMatrix operator*(BasicMatrix a, T s) { return a *= s; }
  friend BasicMatrix operator*(T s, BasicMatrix a) { return a *= s; }

  friend bool operator==(const BasicMatrix& a, const BasicMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

  void require_same_shape(const BasicMatrix& other, const char* where) const {
    if (!same_shape(other)) {
      throw InvalidArgument(std::string(where) + ": shape mismatch " + shape_string() + " vs " +
                            other.shape_string());
    }
  }

  std::string shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<double>;
using Vector = std::vector<double>;

/// Kernels over any pair of contiguous ranges (spans, vectors, matrix rows).
template <typename A, typename B>
auto dot(const A& a, const B& b) {
  std::remove_cvref_t<decltype(a[0] * b[0])> acc{};
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

template <typename A>
auto norm(const A& a) {
  return std::sqrt(dot(a, a));
}

/// y += alpha * x
template <typename T, typename X, typename Y>
void axpy(T alpha, const X& x, Y&& y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

/// A * B
template <typename T>
BasicMatrix<T> matmul(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.cols() == b.rows(),
                  "matmul: inner dimensions differ (" + a.shape_string() + " * " + b.shape_string() + ")");
  BasicMatrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) axpy(a(i, k), b.row(k), out_row);
  }
  return out;
}

/// A * B^T, the natural layout for applying weight matrices (out x in) to row-major frames.
template <typename T>
BasicMatrix<T> matmul_bt(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.cols() == b.cols(), "matmul_bt: column counts differ (" + a.shape_string() +
                                            " vs " + b.shape_string() + ")");
  return matmul(a, transpose(b));
}

/// A^T * B, used for weight gradients (sum over frames of outer products).
template <typename T>
BasicMatrix<T> matmul_at(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  detail::require(a.rows() == b.rows(), "matmul_at: row counts differ (" + a.shape_string() +
                                            " vs " + b.shape_string() + ")");
  BasicMatrix<T> out(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto b_row = b.row(r);
    for (std::size_t i = 0; i < a.cols(); ++i) axpy(a(r, i), b_row, out.row(i));
  }
  return out;
}

template <typename T>
BasicMatrix<T> transpose(const BasicMatrix<T>& a) {
  BasicMatrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
BasicMatrix<T> identity(std::size_t n) {
  BasicMatrix<T> out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
  return out;
}

/// Frobenius inner product.
template <typename T>
T frobenius_dot(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  a.require_same_shape(b, "frobenius_dot");
  return dot(a.data(), b.data());
}

template <typename T>
T max_abs_diff(const BasicMatrix<T>& a, const BasicMatrix<T>& b) {
  a.require_same_shape(b, "max_abs_diff");
  T worst{};
  for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::abs(a[k] - b[k]));
  return worst;
}

template <typename T>
bool all_finite(const BasicMatrix<T>& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
void require_finite(const BasicMatrix<T>& a, const std::string& what) {
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k])) throw NumericError(what + ": non-finite entry", k);
  }
}

}  // namespace memsa
