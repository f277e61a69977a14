#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "memsa/core/error.hpp"
#include "memsa/core/fast_tanh.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/random.hpp"

namespace memsa {

/// Single-layer unidirectional GRU, h_0 = 0:
///   z = sigmoid(W_z x + U_z h + b_z)
///   r = sigmoid(W_r x + U_r h + b_r)
///   n = tanh(W_n x + U_n (r * h) + b_n)
///   h' = (1 - z) * n + z * h
/// Input weights are d x F, recurrent weights d x d, biases 1 x d.
struct GruParams {
  Matrix W_z, W_r, W_n;
  Matrix U_z, U_r, U_n;
  Matrix b_z, b_r, b_n;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
    GruParams p;
    for (Matrix* w : {&p.W_z, &p.W_r, &p.W_n}) *w = Matrix(hidden_dim, input_dim);
    for (Matrix* u : {&p.U_z, &p.U_r, &p.U_n}) *u = Matrix(hidden_dim, hidden_dim);
    for (Matrix* b : {&p.b_z, &p.b_r, &p.b_n}) *b = Matrix(1, hidden_dim);
    return p;
  }

  static GruParams random(std::size_t input_dim, std::size_t hidden_dim, Rng& rng, double stddev = 0.05) {
    GruParams p = zeros(input_dim, hidden_dim);
    for (Matrix* m : {&p.W_z, &p.W_r, &p.W_n, &p.U_z, &p.U_r, &p.U_n}) *m = init_normal(m->rows(), m->cols(), rng, 0.0, stddev);
    return p;
  }

  std::size_t input_dim() const noexcept { return W_z.cols(); }
  std::size_t hidden_dim() const noexcept { return W_z.rows(); }

  void validate() const {
    const std::size_t d = hidden_dim();
    const std::size_t f = input_dim();
    detail::require(d >= 1 && f >= 1, "gru: empty parameters");
    for (const Matrix* w : {&W_z, &W_r, &W_n})
      detail::require(w->rows() == d && w->cols() == f, "gru: input weight shape " + w->shape_string());
    for (const Matrix* u : {&U_z, &U_r, &U_n})
      detail::require(u->rows() == d && u->cols() == d, "gru: recurrent weight shape " + u->shape_string());
    for (const Matrix* b : {&b_z, &b_r, &b_n})
      detail::require(b->rows() == 1 && b->cols() == d, "gru: bias shape " + b->shape_string());
  }
};

/// Per-step activations kept for backpropagation through time.
struct GruCache {
  Matrix z, r, n;
  Matrix hidden;  // T x d, h_1..h_T
};

namespace detail {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Matrix add_bias(Matrix m, const Matrix& bias) {
  for (std::size_t t = 0; t < m.rows(); ++t) axpy(1.0, bias.row(0), m.row(t));
  return m;
}

}  // namespace detail

inline GruCache gru_forward_cached(const Matrix& input, const GruParams& p) {
  p.validate();
  detail::require(input.rows() >= 1, "gru: need at least one frame");
  detail::require(input.cols() == p.input_dim(), "gru: input has " + std::to_string(input.cols()) +
                                                     " features, expected " + std::to_string(p.input_dim()));
  const std::size_t frames = input.rows();
  const std::size_t d = p.hidden_dim();
  const Matrix xz = detail::add_bias(matmul_bt(input, p.W_z), p.b_z);
  const Matrix xr = detail::add_bias(matmul_bt(input, p.W_r), p.b_r);
  const Matrix xn = detail::add_bias(matmul_bt(input, p.W_n), p.b_n);

  GruCache c{Matrix(frames, d), Matrix(frames, d), Matrix(frames, d), Matrix(frames, d)};
  // column k of U is row k of U^T, so U h accumulates as sum_k h_k U^T_k
  const Matrix uz_t = transpose(p.U_z), ur_t = transpose(p.U_r), un_t = transpose(p.U_n);
  Vector prev(d, 0.0), gated(d), az(d), ar(d), an(d);
  for (std::size_t t = 0; t < frames; ++t) {
    std::copy(xz.row(t).begin(), xz.row(t).end(), az.begin());
    std::copy(xr.row(t).begin(), xr.row(t).end(), ar.begin());
    std::copy(xn.row(t).begin(), xn.row(t).end(), an.begin());
    for (std::size_t k = 0; k < d; ++k) {
      axpy(prev[k], uz_t.row(k), az);
      axpy(prev[k], ur_t.row(k), ar);
    }
    sigmoid_inplace(az.data(), d);
    sigmoid_inplace(ar.data(), d);
    for (std::size_t k = 0; k < d; ++k) {
      c.z(t, k) = az[k];
      c.r(t, k) = ar[k];
      gated[k] = c.r(t, k) * prev[k];
    }
    for (std::size_t k = 0; k < d; ++k) axpy(gated[k], un_t.row(k), an);
    tanh_inplace(an.data(), d);
    for (std::size_t k = 0; k < d; ++k) {
      c.n(t, k) = an[k];
      c.hidden(t, k) = (1.0 - c.z(t, k)) * c.n(t, k) + c.z(t, k) * prev[k];
      prev[k] = c.hidden(t, k);
    }
  }
  return c;
}

inline Matrix gru_forward(const Matrix& input, const GruParams& p) { return gru_forward_cached(input, p).hidden; }

struct GruGradients {
  Matrix input;
  GruParams params;
};

/// BPTT given dLoss/dH (T x d).
inline GruGradients gru_backward(const Matrix& input, const GruParams& p, const GruCache& c, const Matrix& upstream) {
  c.hidden.require_same_shape(upstream, "gru_backward: upstream");
  const std::size_t frames = input.rows();
  const std::size_t d = p.hidden_dim();
  Matrix dz_pre(frames, d), dr_pre(frames, d), dn_pre(frames, d);
  Matrix prev_h(frames, d), gated_h(frames, d);  // h_{t-1} and r_t * h_{t-1}, rows per step

  Vector carry(d, 0.0), dgated(d);
  for (std::size_t t = frames; t-- > 0;) {
    for (std::size_t k = 0; k < d; ++k) {
      prev_h(t, k) = t == 0 ? 0.0 : c.hidden(t - 1, k);
      gated_h(t, k) = c.r(t, k) * prev_h(t, k);
    }
    Vector dprev(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const double dh = upstream(t, k) + carry[k];
      const double z = c.z(t, k);
      const double n = c.n(t, k);
      dn_pre(t, k) = dh * (1.0 - z) * (1.0 - n * n);
      dz_pre(t, k) = dh * (prev_h(t, k) - n) * z * (1.0 - z);
      dprev[k] = dh * z;
    }
    std::fill(dgated.begin(), dgated.end(), 0.0);
    for (std::size_t k = 0; k < d; ++k) axpy(dn_pre(t, k), p.U_n.row(k), dgated);
    for (std::size_t k = 0; k < d; ++k) {
      const double r = c.r(t, k);
      dr_pre(t, k) = dgated[k] * prev_h(t, k) * r * (1.0 - r);
      dprev[k] += dgated[k] * r;
    }
    for (std::size_t k = 0; k < d; ++k) {
      axpy(dz_pre(t, k), p.U_z.row(k), dprev);
      axpy(dr_pre(t, k), p.U_r.row(k), dprev);
    }
    carry = dprev;
  }

  GruGradients g{matmul(dz_pre, p.W_z) + matmul(dr_pre, p.W_r) + matmul(dn_pre, p.W_n), {}};
  g.params.W_z = matmul_at(dz_pre, input);
  g.params.W_r = matmul_at(dr_pre, input);
  g.params.W_n = matmul_at(dn_pre, input);
  g.params.U_z = matmul_at(dz_pre, prev_h);
  g.params.U_r = matmul_at(dr_pre, prev_h);
  g.params.U_n = matmul_at(dn_pre, gated_h);
  g.params.b_z = matmul_at(Matrix(frames, 1, 1.0), dz_pre);
  g.params.b_r = matmul_at(Matrix(frames, 1, 1.0), dr_pre);
  g.params.b_n = matmul_at(Matrix(frames, 1, 1.0), dn_pre);
  return g;
}

}  // namespace memsa
