#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"

namespace memsa {

/// Central-difference gradient of a scalar function, one entry at a time.
template <typename F>
Matrix finite_diff_grad(F&& f, const Matrix& x, double eps = 1e-5) {
  Matrix probe = x;
  Matrix grad(x.rows(), x.cols());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double original = probe[k];
    probe[k] = original + eps;
    const double up = f(static_cast<const Matrix&>(probe));
    probe[k] = original - eps;
    const double down = f(static_cast<const Matrix&>(probe));
    probe[k] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: function value is not finite", k);
    }
    grad[k] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// Largest entrywise |a-b| / max(|a|, |b|, floor). The floor keeps entries that are
/// both near zero from dominating through cancellation noise.
inline double max_relative_error(const Matrix& analytic, const Matrix& numeric, double floor = 1e-4) {
  analytic.require_same_shape(numeric, "max_relative_error");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double scale = std::max({std::abs(analytic[k]), std::abs(numeric[k]), floor});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / scale);
  }
  return worst;
}

}  // namespace memsa
