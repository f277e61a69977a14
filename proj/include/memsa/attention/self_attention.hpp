#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <type_traits>
#include <vector>

#include "memsa/attention/score.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/fast_tanh.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/softmax.hpp"

namespace memsa {

/// Attention layer shape. An absent width means global attention over the whole sequence.
struct AttentionConfig {
  ScoreKind kind = ScoreKind::Additive;
  std::optional<std::size_t> width;
  std::size_t hidden_dim = 32;
  std::size_t additive_dim = 32;

  void validate() const {
    detail::require(!width || *width >= 1, "attention width must be >= 1");
    detail::require(hidden_dim >= 1, "hidden dimension must be >= 1");
    detail::require(additive_dim >= 1, "additive dimension must be >= 1");
  }
};

/// Half-width of the key/value neighbourhood for attention width L: the window around
/// frame t is [t - floor(L/2), t + floor(L/2)] clamped to the sequence.
constexpr std::size_t half_width_for(std::size_t width) noexcept { return width / 2; }

/// Per-query attention distributions in band storage. Row t holds the weights for source
/// frames first(t)..last(t). Global attention is the special case where every row spans
/// the whole sequence (dense T x T).
template <typename T>
class BasicAttentionWeights {
 public:
  BasicAttentionWeights() = default;

  BasicAttentionWeights(std::size_t frames, std::size_t half_width, bool banded)
      : frames_(frames), half_width_(half_width), banded_(banded), offsets_(frames + 1, 0) {
    for (std::size_t t = 0; t < frames_; ++t) offsets_[t + 1] = offsets_[t] + (last(t) - first(t) + 1);
    values_.assign(offsets_.back(), T{});
  }

  std::size_t frames() const noexcept { return frames_; }
  std::size_t half_width() const noexcept { return half_width_; }
  bool banded() const noexcept { return banded_; }
  std::size_t stored_entries() const noexcept { return values_.size(); }

  std::size_t first(std::size_t t) const noexcept { return t > half_width_ ? t - half_width_ : 0; }
  std::size_t last(std::size_t t) const noexcept {
    return std::min(frames_ - 1, t + std::min(half_width_, frames_));
  }
  bool contains(std::size_t t, std::size_t i) const noexcept { return i >= first(t) && i <= last(t); }

  std::span<T> row(std::size_t t) { return {values_.data() + offsets_[t], offsets_[t + 1] - offsets_[t]}; }
  std::span<const T> row(std::size_t t) const {
    return {values_.data() + offsets_[t], offsets_[t + 1] - offsets_[t]};
  }

  /// Weight of source i for query t; zero outside the band.
  T at(std::size_t t, std::size_t i) const { return contains(t, i) ? row(t)[i - first(t)] : T{}; }

  BasicMatrix<T> to_dense() const {
    BasicMatrix<T> out(frames_, frames_);
    for (std::size_t t = 0; t < frames_; ++t) {
      auto r = row(t);
      for (std::size_t k = 0; k < r.size(); ++k) out(t, first(t) + k) = r[k];
    }
    return out;
  }

  friend bool operator==(const BasicAttentionWeights&, const BasicAttentionWeights&) = default;

 private:
  std::size_t frames_ = 0;
  std::size_t half_width_ = 0;
  bool banded_ = false;
  std::vector<std::size_t> offsets_;
  std::vector<T> values_;
};

using AttentionWeights = BasicAttentionWeights<double>;

template <typename T>
struct BasicAttentionResult {
  BasicMatrix<T> attended;
  BasicAttentionWeights<T> weights;
  bool degenerate = false;  // cosine score met a zero-norm frame
};

using AttentionResult = BasicAttentionResult<double>;

template <typename T>
struct BasicAttentionGradients {
  BasicMatrix<T> hidden;
  BasicScoreParams<T> params;
};

using AttentionGradients = BasicAttentionGradients<double>;

namespace detail {

template <typename T>
BasicMatrix<T> pad_columns(const BasicMatrix<T>& m, std::size_t cols) {
  BasicMatrix<T> out(m.rows(), cols);
  for (std::size_t r = 0; r < m.rows(); ++r) std::copy(m.row(r).begin(), m.row(r).end(), out.row(r).begin());
  return out;
}

template <typename T>
BasicMatrix<T> trim_columns(const BasicMatrix<T>& m, std::size_t cols) {
  BasicMatrix<T> out(m.rows(), cols);
  for (std::size_t r = 0; r < m.rows(); ++r) std::copy_n(m.row(r).begin(), cols, out.row(r).begin());
  return out;
}

/// Per-sequence quantities that turn each score into an O(d_a) or O(d) inner loop.
/// Additive projections are zero-padded to whole lanes; padded lanes carry v_a = 0.
template <typename T>
struct ScoreContext {
  static constexpr bool kVectorized = std::is_same_v<T, double>;

  ScoreKind kind;
  const BasicMatrix<T>& hidden;
  BasicMatrix<T> query_proj;   // additive: H Wq^T (padded)   general: H W^T (row i = W h_i)
  BasicMatrix<T> key_proj;     // additive: H Wk^T (padded)
  BasicMatrix<T> w_query;      // additive: W_a[:, :d]
  BasicMatrix<T> w_key;        // additive: W_a[:, d:]
  std::vector<T> v_a;          // additive, padded
  std::vector<T> norms;        // scaled dot
  std::size_t additive_dim = 0;

  ScoreContext(ScoreKind k, const BasicMatrix<T>& h, const BasicScoreParams<T>& params)
      : kind(k), hidden(h) {
    const std::size_t d = h.cols();
    params.validate(kind, d);
    switch (kind) {
      case ScoreKind::Additive: {
        additive_dim = params.W_a.rows();
        const std::size_t width = kVectorized ? lane_padded(additive_dim) : additive_dim;
        w_query = BasicMatrix<T>(additive_dim, d);
        w_key = BasicMatrix<T>(additive_dim, d);
        for (std::size_t a = 0; a < additive_dim; ++a) {
          auto src = params.W_a.row(a);
          std::copy(src.begin(), src.begin() + d, w_query.row(a).begin());
          std::copy(src.begin() + d, src.end(), w_key.row(a).begin());
        }
        query_proj = pad_columns(matmul_bt(h, w_query), width);
        key_proj = pad_columns(matmul_bt(h, w_key), width);
        v_a.assign(width, T{});
        std::copy(params.v_a.data().begin(), params.v_a.data().end(), v_a.begin());
        break;
      }
      case ScoreKind::General:
        query_proj = matmul_bt(h, params.W_a);
        break;
      case ScoreKind::Dot:
        break;
      case ScoreKind::ScaledDot:
        norms.resize(h.rows());
        for (std::size_t t = 0; t < h.rows(); ++t) norms[t] = norm(h.row(t));
        break;
    }
  }

  std::size_t projected_width() const noexcept { return v_a.size(); }

  T additive_score(std::size_t t, std::size_t i) const {
    const T* u = query_proj.row(t).data();
    const T* key = key_proj.row(i).data();
    if constexpr (kVectorized) {
      Lane4 acc{};
      for (std::size_t a = 0; a < v_a.size(); a += 4)
        acc += load4(v_a.data() + a) * tanh4(load4(u + a) + load4(key + a));
      return horizontal_sum(acc);
    } else {
      T acc{};
      for (std::size_t a = 0; a < v_a.size(); ++a) acc += v_a[a] * std::tanh(u[a] + key[a]);
      return acc;
    }
  }

  /// Backward through one additive score: z = tanh(u_t + k_i), dv += ds z,
  /// du_t and dk_i += ds v (1 - z^2).
  void additive_backward(std::size_t t, std::size_t i, T ds, T* dv, T* du, T* dk) const {
    const T* u = query_proj.row(t).data();
    const T* key = key_proj.row(i).data();
    if constexpr (kVectorized) {
      for (std::size_t a = 0; a < v_a.size(); a += 4) {
        const Lane4 z = tanh4(load4(u + a) + load4(key + a));
        store4(dv + a, load4(dv + a) + ds * z);
        const Lane4 pre = ds * load4(v_a.data() + a) * (1.0 - z * z);
        store4(du + a, load4(du + a) + pre);
        store4(dk + a, load4(dk + a) + pre);
      }
    } else {
      for (std::size_t a = 0; a < v_a.size(); ++a) {
        const T z = std::tanh(u[a] + key[a]);
        dv[a] += ds * z;
        const T pre = ds * v_a[a] * (T{1} - z * z);
        du[a] += pre;
        dk[a] += pre;
      }
    }
  }

  /// Writes scores s_i^t for i = lo..lo+out.size()-1.
  void score_row(std::size_t t, std::size_t lo, std::span<T> out, bool& degenerate) const {
    const auto h_t = hidden.row(t);
    switch (kind) {
      case ScoreKind::Additive:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = additive_score(t, lo + k);
        break;
      case ScoreKind::General:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = dot(h_t, query_proj.row(lo + k));
        break;
      case ScoreKind::Dot:
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = dot(h_t, hidden.row(lo + k));
        break;
      case ScoreKind::ScaledDot:
        for (std::size_t k = 0; k < out.size(); ++k) {
          const std::size_t i = lo + k;
          if (norms[t] < kDegenerateNorm || norms[i] < kDegenerateNorm) {
            degenerate = true;
            out[k] = T{0};
          } else {
            out[k] = dot(h_t, hidden.row(i)) / (norms[t] * norms[i]);
          }
        }
        break;
    }
  }
};

template <typename T>
BasicAttentionResult<T> attend_impl(const BasicMatrix<T>& hidden, ScoreKind kind,
                                    const BasicScoreParams<T>& params, std::size_t half_width,
                                    bool banded) {
  const std::size_t frames = hidden.rows();
  require(frames >= 1, "attention: empty sequence");
  require(hidden.cols() >= 1, "attention: hidden dimension must be >= 1");
  ScoreContext<T> ctx(kind, hidden, params);

  BasicAttentionResult<T> result{BasicMatrix<T>(frames, hidden.cols()),
                                 BasicAttentionWeights<T>(frames, half_width, banded), false};
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t lo = result.weights.first(t);
    auto alpha = result.weights.row(t);
    ctx.score_row(t, lo, alpha, result.degenerate);
    softmax_inplace(alpha);
    auto out = result.attended.row(t);
    for (std::size_t k = 0; k < alpha.size(); ++k) axpy(alpha[k], hidden.row(lo + k), out);
  }
  return result;
}

}  // namespace detail

/// Global self-attention: every frame attends to every frame.
template <typename T>
BasicAttentionResult<T> attend_global(const BasicMatrix<T>& hidden, const BasicScoreParams<T>& params,
                                      ScoreKind kind) {
  detail::require(hidden.rows() >= 1, "attend_global: empty sequence");
  return detail::attend_impl(hidden, kind, params, hidden.rows() - 1, false);
}

/// Memory-controlled self-attention over a centered window of width L. Cost is O(T L d).
template <typename T>
BasicAttentionResult<T> attend_windowed(const BasicMatrix<T>& hidden, const AttentionConfig& config,
                                        const BasicScoreParams<T>& params) {
  config.validate();
  detail::require(config.width.has_value(), "attend_windowed: width is required");
  detail::require(hidden.rows() >= 1, "attend_windowed: empty sequence");
  return detail::attend_impl(hidden, config.kind, params, half_width_for(*config.width), true);
}

/// Dispatches on config.width (absent means global).
template <typename T>
BasicAttentionResult<T> attend(const BasicMatrix<T>& hidden, const AttentionConfig& config,
                               const BasicScoreParams<T>& params) {
  return config.width ? attend_windowed(hidden, config, params)
                      : attend_global(hidden, params, config.kind);
}

/// Gradients of the attended sequence w.r.t. the hidden sequence and score weights, given
/// the upstream gradient dL/dH~ and the weights produced by the forward pass.
template <typename T>
BasicAttentionGradients<T> attention_backward(const BasicMatrix<T>& hidden, const AttentionConfig& config,
                                              const BasicScoreParams<T>& params,
                                              const BasicAttentionWeights<T>& weights,
                                              const BasicMatrix<T>& upstream) {
  const std::size_t frames = hidden.rows();
  const std::size_t d = hidden.cols();
  hidden.require_same_shape(upstream, "attention_backward: hidden/upstream");
  detail::require(weights.frames() == frames, "attention_backward: weights do not match sequence length");
  const std::size_t expected_half = config.width ? half_width_for(*config.width) : frames - 1;
  detail::require(weights.half_width() == expected_half,
                  "attention_backward: weights were produced with a different width");

  detail::ScoreContext<T> ctx(config.kind, hidden, params);
  BasicAttentionGradients<T> grads{BasicMatrix<T>(frames, d),
                                   BasicScoreParams<T>::zeros(config.kind, d, params.v_a.cols())};

  // Additive accumulators in projected space; mapped back through W_a at the end.
  BasicMatrix<T> d_query, d_key;
  std::vector<T> d_v;
  // General: row t accumulates sum_i ds_ti h_i, giving dW = H^T (S H).
  // transposed_proj row t is W^T h_t.
  BasicMatrix<T> s_hidden, transposed_proj;
  if (config.kind == ScoreKind::Additive) {
    d_query = BasicMatrix<T>(frames, ctx.projected_width());
    d_key = BasicMatrix<T>(frames, ctx.projected_width());
    d_v.assign(ctx.projected_width(), T{});
  } else if (config.kind == ScoreKind::General) {
    s_hidden = BasicMatrix<T>(frames, d);
    transposed_proj = matmul(hidden, params.W_a);
  }

  std::vector<T> ds;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t lo = weights.first(t);
    const auto alpha = weights.row(t);
    const auto g_t = upstream.row(t);
    ds.assign(alpha.size(), T{});

    // Value path and softmax Jacobian.
    T weighted{};
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      const auto h_i = hidden.row(lo + k);
      axpy(alpha[k], g_t, grads.hidden.row(lo + k));
      ds[k] = dot(g_t, h_i);
      weighted += alpha[k] * ds[k];
    }
    for (std::size_t k = 0; k < alpha.size(); ++k) ds[k] = alpha[k] * (ds[k] - weighted);

    const auto h_t = hidden.row(t);
    switch (config.kind) {
      case ScoreKind::Additive: {
        T* du = d_query.row(t).data();
        for (std::size_t k = 0; k < alpha.size(); ++k)
          ctx.additive_backward(t, lo + k, ds[k], d_v.data(), du, d_key.row(lo + k).data());
        break;
      }
      case ScoreKind::General: {
        // s = h_t . (W h_i):  ds/dh_t = W h_i,  ds/dh_i = W^T h_t.
        auto gh_t = grads.hidden.row(t);
        auto sh_t = s_hidden.row(t);
        const auto wt_h_t = transposed_proj.row(t);
        for (std::size_t k = 0; k < alpha.size(); ++k) {
          axpy(ds[k], ctx.query_proj.row(lo + k), gh_t);
          axpy(ds[k], wt_h_t, grads.hidden.row(lo + k));
          axpy(ds[k], hidden.row(lo + k), sh_t);
        }
        break;
      }
      case ScoreKind::Dot: {
        auto gh_t = grads.hidden.row(t);
        for (std::size_t k = 0; k < alpha.size(); ++k) {
          axpy(ds[k], hidden.row(lo + k), gh_t);
          axpy(ds[k], h_t, grads.hidden.row(lo + k));
        }
        break;
      }
      case ScoreKind::ScaledDot: {
        const T n_t = ctx.norms[t];
        if (n_t < kDegenerateNorm) break;
        auto gh_t = grads.hidden.row(t);
        for (std::size_t k = 0; k < alpha.size(); ++k) {
          const std::size_t i = lo + k;
          const T n_i = ctx.norms[i];
          if (n_i < kDegenerateNorm) continue;
          const auto h_i = hidden.row(i);
          const T s = dot(h_t, h_i) / (n_t * n_i);
          const T inv = T{1} / (n_t * n_i);
          // ds/dh_t = h_i / (|h_t||h_i|) - s h_t / |h_t|^2, and symmetrically for h_i.
          axpy(ds[k] * inv, h_i, gh_t);
          axpy(-ds[k] * s / (n_t * n_t), h_t, gh_t);
          auto gh_i = grads.hidden.row(i);
          axpy(ds[k] * inv, h_t, gh_i);
          axpy(-ds[k] * s / (n_i * n_i), h_i, gh_i);
        }
        break;
      }
    }
  }

  if (config.kind == ScoreKind::Additive) {
    const std::size_t da = ctx.additive_dim;
    const BasicMatrix<T> dq = detail::trim_columns(d_query, da);
    const BasicMatrix<T> dk = detail::trim_columns(d_key, da);
    const BasicMatrix<T> dwq = matmul_at(dq, hidden);
    const BasicMatrix<T> dwk = matmul_at(dk, hidden);
    for (std::size_t a = 0; a < da; ++a) {
      auto dst = grads.params.W_a.row(a);
      std::copy(dwq.row(a).begin(), dwq.row(a).end(), dst.begin());
      std::copy(dwk.row(a).begin(), dwk.row(a).end(), dst.begin() + d);
      grads.params.v_a(0, a) = d_v[a];
    }
    grads.hidden += matmul(dq, ctx.w_query);
    grads.hidden += matmul(dk, ctx.w_key);
  } else if (config.kind == ScoreKind::General) {
    grads.params.W_a = matmul_at(hidden, s_hidden);
  }
  return grads;
}

}  // namespace memsa
