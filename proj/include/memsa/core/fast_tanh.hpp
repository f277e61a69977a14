#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>

namespace memsa {

/// Four-lane double vectors (GCC/Clang vector extensions; AVX2 when enabled, SSE2 pairs otherwise).
using Lane4 = double __attribute__((vector_size(32)));
using Lane4i = std::int64_t __attribute__((vector_size(32)));

inline Lane4 load4(const double* p) {
  Lane4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, Lane4 v) { std::memcpy(p, &v, sizeof v); }

inline double horizontal_sum(Lane4 v) { return (v[0] + v[1]) + (v[2] + v[3]); }

/// tanh on four lanes via 1 - 2/(e^{2|x|} + 1) with a degree-13 exp kernel. Absolute
/// error is below 4e-16 on all finite inputs; |x| is clamped at 20 where tanh rounds to 1.
inline Lane4 tanh4(Lane4 x) {
  constexpr std::int64_t kSignBit = static_cast<std::int64_t>(0x8000000000000000ULL);
  constexpr double kMagic = 0x1.8p52;  // adding it leaves round(y) in the low mantissa bits
  constexpr double kInvLn2 = 1.4426950408889634;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;

  const Lane4i bits = reinterpret_cast<Lane4i>(x);
  const Lane4i sign = bits & kSignBit;
  Lane4 ax = reinterpret_cast<Lane4>(bits & ~kSignBit);
  const Lane4 clamp = Lane4{} + 20.0;
  ax = ax > clamp ? clamp : ax;  // NaN compares false and passes through

  // e = exp(-2|x|) = 2^k exp(r), |r| <= ln2/2
  const Lane4 y = -2.0 * ax;
  const Lane4 kd = y * kInvLn2 + kMagic;
  const Lane4i k_int = reinterpret_cast<Lane4i>(kd) - reinterpret_cast<Lane4i>(Lane4{} + kMagic);
  const Lane4 k = kd - kMagic;
  const Lane4 r = (y - k * kLn2Hi) - k * kLn2Lo;

  // Estrin form of sum_{j<=13} r^j / j!
  const Lane4 r2 = r * r;
  const Lane4 r4 = r2 * r2;
  const Lane4 r8 = r4 * r4;
  const Lane4 q01 = 1.0 + r;
  const Lane4 q23 = 0.5 + r * (1.0 / 6.0);
  const Lane4 q45 = 1.0 / 24.0 + r * (1.0 / 120.0);
  const Lane4 q67 = 1.0 / 720.0 + r * (1.0 / 5040.0);
  const Lane4 q89 = 1.0 / 40320.0 + r * (1.0 / 362880.0);
  const Lane4 q1011 = 1.0 / 3628800.0 + r * (1.0 / 39916800.0);
  const Lane4 q1213 = 1.0 / 479001600.0 + r * (1.0 / 6227020800.0);
  const Lane4 q03 = q01 + r2 * q23;
  const Lane4 q47 = q45 + r2 * q67;
  const Lane4 q811 = q89 + r2 * q1011;
  const Lane4 q07 = q03 + r4 * q47;
  const Lane4 q813 = q811 + r4 * q1213;
  const Lane4 p = q07 + r8 * q813;
  const Lane4 e = reinterpret_cast<Lane4>(reinterpret_cast<Lane4i>(p) + (k_int << 52));

  const Lane4 t = (1.0 - e) / (1.0 + e);
  return reinterpret_cast<Lane4>(reinterpret_cast<Lane4i>(t) | sign);
}

/// Scalar entry point computing exactly the lane-0 result of tanh4.
inline double fast_tanh(double x) { return tanh4(Lane4{x, x, x, x})[0]; }

/// tanh over a contiguous range, four lanes at a time; the tail goes through a padded lane.
inline void tanh_inplace(double* x, std::size_t n) {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) store4(x + k, tanh4(load4(x + k)));
  if (k < n) {
    double buf[4] = {0.0, 0.0, 0.0, 0.0};
    std::memcpy(buf, x + k, (n - k) * sizeof(double));
    store4(buf, tanh4(load4(buf)));
    std::memcpy(x + k, buf, (n - k) * sizeof(double));
  }
}

/// sigmoid(x) = (1 + tanh(x / 2)) / 2, same lane layout as tanh_inplace.
inline void sigmoid_inplace(double* x, std::size_t n) {
  for (std::size_t k = 0; k < n; ++k) x[k] *= 0.5;
  tanh_inplace(x, n);
  for (std::size_t k = 0; k < n; ++k) x[k] = 0.5 + 0.5 * x[k];
}

/// Rounds a dimension up to a whole number of lanes.
constexpr std::size_t lane_padded(std::size_t n) noexcept { return (n + 3) / 4 * 4; }

}  // namespace memsa
