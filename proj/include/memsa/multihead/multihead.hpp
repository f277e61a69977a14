#pragma once

#include <cstddef>
#include <vector>

#include "memsa/attention/self_attention.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"

namespace memsa {

/// Widths first, first+step, ..., one per head.
inline std::vector<std::size_t> width_bank(std::size_t heads, std::size_t first = 2, std::size_t step = 5) {
  detail::require(heads >= 1, "width_bank: need at least one head");
  detail::require(first >= 1 && step >= 1, "width_bank: first and step must be >= 1");
  std::vector<std::size_t> widths(heads);
  for (std::size_t j = 0; j < heads; ++j) widths[j] = first + step * j;
  return widths;
}

/// Width-banked multi-head attention. All heads share one score function; the only
/// per-head parameters are the scalars w_j. Head j enters the output with coefficient
/// w_j / L_j, without renormalisation across heads.
template <typename T>
struct BasicMultiHeadConfig {
  std::vector<std::size_t> widths;
  BasicMatrix<T> head_weights;  // 1 x p
  ScoreKind kind = ScoreKind::Additive;
  BasicScoreParams<T> params;

  static BasicMultiHeadConfig with_unit_weights(std::vector<std::size_t> widths, ScoreKind kind,
                                                BasicScoreParams<T> params) {
    BasicMultiHeadConfig cfg{std::move(widths), {}, kind, std::move(params)};
    cfg.head_weights = BasicMatrix<T>(1, cfg.widths.size(), T{1});
    return cfg;
  }

  std::size_t heads() const noexcept { return widths.size(); }

  T coefficient(std::size_t j) const { return head_weights(0, j) / static_cast<T>(widths[j]); }

  AttentionConfig head_config(std::size_t j, std::size_t hidden_dim) const {
    return AttentionConfig{kind, widths[j], hidden_dim, params.v_a.empty() ? hidden_dim : params.v_a.cols()};
  }

  void validate(std::size_t hidden_dim) const {
    detail::require(!widths.empty(), "multi-head: need at least one head");
    for (std::size_t j = 0; j < widths.size(); ++j) {
      detail::require(widths[j] >= 1, "multi-head: widths must be >= 1");
      detail::require(j == 0 || widths[j] > widths[j - 1], "multi-head: widths must be strictly increasing");
    }
    detail::require(head_weights.rows() == 1 && head_weights.cols() == widths.size(),
                    "multi-head: need one weight per head");
    require_finite(head_weights, "multi-head head weights");
    params.validate(kind, hidden_dim);
  }
};

using MultiHeadConfig = BasicMultiHeadConfig<double>;

template <typename T>
struct BasicMultiHeadResult {
  BasicMatrix<T> attended;
  std::vector<BasicMatrix<T>> head_outputs;
  std::vector<BasicAttentionWeights<T>> head_weights;
  bool degenerate = false;

  /// Effective dense weights sum_j c_j A_j, i.e. the linear map from H to H~.
  BasicMatrix<T> combined_weights(const BasicMultiHeadConfig<T>& cfg) const {
    const std::size_t frames = attended.rows();
    BasicMatrix<T> out(frames, frames);
    for (std::size_t j = 0; j < head_weights.size(); ++j) {
      const T c = cfg.coefficient(j);
      for (std::size_t t = 0; t < frames; ++t) {
        auto r = head_weights[j].row(t);
        const std::size_t lo = head_weights[j].first(t);
        for (std::size_t k = 0; k < r.size(); ++k) out(t, lo + k) += c * r[k];
      }
    }
    return out;
  }
};

using MultiHeadResult = BasicMultiHeadResult<double>;

template <typename T>
struct BasicMultiHeadGradients {
  BasicMatrix<T> hidden;
  BasicScoreParams<T> params;
  BasicMatrix<T> head_weights;  // 1 x p
};

using MultiHeadGradients = BasicMultiHeadGradients<double>;

template <typename T>
BasicMultiHeadResult<T> multihead_attend(const BasicMatrix<T>& hidden, const BasicMultiHeadConfig<T>& cfg) {
  detail::require(hidden.rows() >= 1, "multihead_attend: empty sequence");
  cfg.validate(hidden.cols());
  BasicMultiHeadResult<T> result;
  result.attended = BasicMatrix<T>(hidden.rows(), hidden.cols());
  for (std::size_t j = 0; j < cfg.heads(); ++j) {
    auto head = attend_windowed(hidden, cfg.head_config(j, hidden.cols()), cfg.params);
    axpy(cfg.coefficient(j), std::span<const T>(head.attended.data()), result.attended.data());
    result.degenerate = result.degenerate || head.degenerate;
    result.head_outputs.push_back(std::move(head.attended));
    result.head_weights.push_back(std::move(head.weights));
  }
  return result;
}

/// Backward pass reusing a forward result computed with the same inputs.
template <typename T>
BasicMultiHeadGradients<T> multihead_backward(const BasicMatrix<T>& hidden, const BasicMultiHeadConfig<T>& cfg,
                                              const BasicMultiHeadResult<T>& forward,
                                              const BasicMatrix<T>& upstream) {
  hidden.require_same_shape(upstream, "multihead_backward: hidden/upstream");
  cfg.validate(hidden.cols());
  detail::require(forward.head_outputs.size() == cfg.heads(), "multihead_backward: forward result has wrong head count");

  const std::size_t d = hidden.cols();
  BasicMultiHeadGradients<T> grads{BasicMatrix<T>(hidden.rows(), d),
                                   BasicScoreParams<T>::zeros(cfg.kind, d, cfg.params.v_a.cols()),
                                   BasicMatrix<T>(1, cfg.heads())};
  for (std::size_t j = 0; j < cfg.heads(); ++j) {
    const T inv_width = T{1} / static_cast<T>(cfg.widths[j]);
    grads.head_weights(0, j) = frobenius_dot(forward.head_outputs[j], upstream) * inv_width;
    BasicMatrix<T> head_upstream = upstream * cfg.coefficient(j);
    auto head = attention_backward(hidden, cfg.head_config(j, d), cfg.params, forward.head_weights[j], head_upstream);
    grads.hidden += head.hidden;
    grads.params.v_a += head.params.v_a;
    grads.params.W_a += head.params.W_a;
  }
  return grads;
}

template <typename T>
BasicMultiHeadGradients<T> multihead_backward(const BasicMatrix<T>& hidden, const BasicMultiHeadConfig<T>& cfg,
                                              const BasicMatrix<T>& upstream) {
  return multihead_backward(hidden, cfg, multihead_attend(hidden, cfg), upstream);
}

}  // namespace memsa
