#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/random.hpp"

namespace memsa {

/// Similarity function between a query frame h_t and a key frame h_i.
///   Additive:  v_a . tanh(W_a [h_t; h_i])
///   General:   h_t^T W_a h_i
///   Dot:       h_t . h_i
///   ScaledDot: h_t . h_i / (|h_t| |h_i|)   (cosine similarity)
enum class ScoreKind { Additive, General, Dot, ScaledDot };

inline constexpr ScoreKind kAllScoreKinds[] = {ScoreKind::Additive, ScoreKind::General,
                                               ScoreKind::Dot, ScoreKind::ScaledDot};

inline std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Additive: return "additive";
    case ScoreKind::General: return "general";
    case ScoreKind::Dot: return "dot";
    case ScoreKind::ScaledDot: return "scaled_dot";
  }
  return "unknown";
}

inline ScoreKind parse_score_kind(std::string_view name) {
  for (ScoreKind kind : kAllScoreKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown score kind '" + std::string(name) + "'");
}

/// Norm below which the cosine score is treated as degenerate and defined as 0.
inline constexpr double kDegenerateNorm = 1e-12;

/// Learnable score weights. v_a is stored as a 1 x d_a row so every parameter is a Matrix.
/// Additive: v_a (1 x d_a), W_a (d_a x 2d). General: W_a (d x d). Dot/ScaledDot: both empty.
template <typename T>
struct BasicScoreParams {
  BasicMatrix<T> v_a;
  BasicMatrix<T> W_a;

  static BasicScoreParams zeros(ScoreKind kind, std::size_t hidden_dim, std::size_t additive_dim) {
    BasicScoreParams p;
    if (kind == ScoreKind::Additive) {
      p.v_a = BasicMatrix<T>(1, additive_dim);
      p.W_a = BasicMatrix<T>(additive_dim, 2 * hidden_dim);
    } else if (kind == ScoreKind::General) {
      p.W_a = BasicMatrix<T>(hidden_dim, hidden_dim);
    }
    return p;
  }

  static BasicScoreParams random(ScoreKind kind, std::size_t hidden_dim, std::size_t additive_dim,
                                 Rng& rng, double stddev = 0.05) {
    auto p = zeros(kind, hidden_dim, additive_dim);
    for (auto& v : p.v_a.data()) v = static_cast<T>(rng.normal(0.0, stddev));
    for (auto& v : p.W_a.data()) v = static_cast<T>(rng.normal(0.0, stddev));
    return p;
  }

  std::size_t parameter_count() const { return v_a.size() + W_a.size(); }

  template <typename U>
  BasicScoreParams<U> cast() const {
    return {v_a.template cast<U>(), W_a.template cast<U>()};
  }

  void validate(ScoreKind kind, std::size_t hidden_dim) const {
    switch (kind) {
      case ScoreKind::Additive:
        detail::require(v_a.rows() == 1 && v_a.cols() >= 1, "additive score: v_a must be 1 x d_a");
        detail::require(W_a.rows() == v_a.cols() && W_a.cols() == 2 * hidden_dim,
                        "additive score: W_a must be d_a x 2d, got " + W_a.shape_string());
        break;
      case ScoreKind::General:
        detail::require(W_a.rows() == hidden_dim && W_a.cols() == hidden_dim,
                        "general score: W_a must be d x d, got " + W_a.shape_string());
        break;
      case ScoreKind::Dot:
      case ScoreKind::ScaledDot:
        detail::require(v_a.empty() && W_a.empty(), "dot scores take no parameters");
        break;
    }
  }
};

using ScoreParams = BasicScoreParams<double>;

/// Single-pair score, evaluated directly from the definition. The attention kernels use
/// a factored form of the same expressions; this function is their reference.
/// Sets *degenerate when the cosine score meets a zero-norm vector.
template <typename T>
T score(ScoreKind kind, std::span<const T> h_t, std::span<const T> h_i,
        const BasicScoreParams<T>& params, bool* degenerate = nullptr) {
  detail::require(h_t.size() == h_i.size() && !h_t.empty(), "score: vectors must share a non-zero length");
  const std::size_t d = h_t.size();
  params.validate(kind, d);
  switch (kind) {
    case ScoreKind::Additive: {
      T acc{};
      for (std::size_t a = 0; a < params.W_a.rows(); ++a) {
        auto w = params.W_a.row(a);
        T pre{};
        for (std::size_t k = 0; k < d; ++k) pre += w[k] * h_t[k];
        for (std::size_t k = 0; k < d; ++k) pre += w[d + k] * h_i[k];
        acc += params.v_a(0, a) * std::tanh(pre);
      }
      return acc;
    }
    case ScoreKind::General: {
      T acc{};
      for (std::size_t r = 0; r < d; ++r) acc += h_t[r] * dot(params.W_a.row(r), h_i);
      return acc;
    }
    case ScoreKind::Dot:
      return dot(h_t, h_i);
    case ScoreKind::ScaledDot: {
      const T nt = norm(h_t);
      const T ni = norm(h_i);
      if (nt < kDegenerateNorm || ni < kDegenerateNorm) {
        if (degenerate) *degenerate = true;
        return T{0};
      }
      return dot(h_t, h_i) / (nt * ni);
    }
  }
  return T{0};
}

}  // namespace memsa
