#pragma once

#include <cmath>
#include <vector>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/random.hpp"
#include "memsa/core/softmax.hpp"

namespace memsa {

/// Projection weights for standard transformer multi-head attention. Kept as a contrast
/// to the width-banked heads: every head sees the full sequence through its own
/// learned projections.
struct TransformerMhaParams {
  std::vector<Matrix> w_query;  // p matrices, d x d_k
  std::vector<Matrix> w_key;
  std::vector<Matrix> w_value;
  Matrix w_out;                 // (p * d_k) x d

  static TransformerMhaParams random(std::size_t heads, std::size_t hidden_dim, std::size_t key_dim, Rng& rng,
                                     double stddev = 0.3) {
    TransformerMhaParams p;
    for (std::size_t j = 0; j < heads; ++j) {
      p.w_query.push_back(init_normal(hidden_dim, key_dim, rng, 0.0, stddev));
      p.w_key.push_back(init_normal(hidden_dim, key_dim, rng, 0.0, stddev));
      p.w_value.push_back(init_normal(hidden_dim, key_dim, rng, 0.0, stddev));
    }
    p.w_out = init_normal(heads * key_dim, hidden_dim, rng, 0.0, stddev);
    return p;
  }

  std::size_t heads() const noexcept { return w_query.size(); }
  std::size_t key_dim() const noexcept { return w_query.empty() ? 0 : w_query.front().cols(); }

  void validate(std::size_t hidden_dim) const {
    detail::require(!w_query.empty(), "transformer MHA: need at least one head");
    detail::require(w_key.size() == heads() && w_value.size() == heads(), "transformer MHA: head count mismatch");
    const std::size_t dk = key_dim();
    detail::require(dk >= 1, "transformer MHA: d_k must be >= 1");
    for (std::size_t j = 0; j < heads(); ++j) {
      for (const Matrix* m : {&w_query[j], &w_key[j], &w_value[j]}) {
        detail::require(m->rows() == hidden_dim && m->cols() == dk,
                        "transformer MHA: projection must be d x d_k, got " + m->shape_string());
      }
    }
    detail::require(w_out.rows() == heads() * dk && w_out.cols() == hidden_dim,
                    "transformer MHA: W_O must be (p d_k) x d, got " + w_out.shape_string());
  }
};

/// Concat_j(softmax(Q_j K_j^T / sqrt(d_k)) V_j) W_O over the full sequence.
inline Matrix transformer_mha_reference(const Matrix& hidden, const TransformerMhaParams& params) {
  detail::require(hidden.rows() >= 1, "transformer_mha_reference: empty sequence");
  params.validate(hidden.cols());
  const std::size_t frames = hidden.rows();
  const std::size_t dk = params.key_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix concat(frames, params.heads() * dk);
  std::vector<double> row(frames);
  for (std::size_t j = 0; j < params.heads(); ++j) {
    const Matrix q = matmul(hidden, params.w_query[j]);
    const Matrix k = matmul(hidden, params.w_key[j]);
    const Matrix v = matmul(hidden, params.w_value[j]);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t i = 0; i < frames; ++i) row[i] = dot(q.row(t), k.row(i)) * scale;
      softmax_inplace<double>(row);
      auto out = concat.row(t).subspan(j * dk, dk);
      for (std::size_t i = 0; i < frames; ++i) axpy(row[i], v.row(i), out);
    }
  }
  return matmul(concat, params.w_out);
}

}  // namespace memsa
