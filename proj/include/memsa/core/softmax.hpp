#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "memsa/core/error.hpp"

namespace memsa {

/// In-place softmax with max subtraction. Entries must be finite.
template <typename T>
void softmax_inplace(std::span<T> v) {
  if (v.empty()) throw InvalidArgument("softmax: empty vector");
  const T peak = *std::max_element(v.begin(), v.end());
  T total{};
  for (auto& x : v) {
    x = std::exp(x - peak);
    total += x;
  }
  const T inv = T{1} / total;
  for (auto& x : v) x *= inv;
}

template <typename T>
std::vector<T> softmax(std::span<const T> v) {
  std::vector<T> out(v.begin(), v.end());
  softmax_inplace<T>(out);
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& v) {
  return softmax<double>(std::span<const double>(v));
}

}  // namespace memsa
