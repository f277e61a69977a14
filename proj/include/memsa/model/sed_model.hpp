#pragma once

#include <charconv>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "memsa/attention/score.hpp"
#include "memsa/attention/self_attention.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/random.hpp"
#include "memsa/model/gru.hpp"
#include "memsa/multihead/multihead.hpp"

namespace memsa {

enum class VariantKind { None, Global, Windowed, MultiHead };

/// Attention layer placed between the GRU and the classifier.
/// Names: Baseline, SelfAttn, SelfAttn_<L>, MultiHead (= MultiHead_11_2_5), MultiHead_<p>_<first>_<step>.
struct AttentionVariant {
  VariantKind kind = VariantKind::None;
  std::size_t width = 0;  // Windowed
  std::size_t heads = 0;  // MultiHead bank
  std::size_t first = 2;
  std::size_t step = 5;

  static AttentionVariant none() { return {}; }
  static AttentionVariant global() { return {VariantKind::Global}; }
  static AttentionVariant windowed(std::size_t width) { return {VariantKind::Windowed, width}; }
  static AttentionVariant multihead(std::size_t heads, std::size_t first = 2, std::size_t step = 5) {
    return {VariantKind::MultiHead, 0, heads, first, step};
  }

  std::vector<std::size_t> widths() const { return width_bank(heads, first, step); }

  std::string name() const {
    switch (kind) {
      case VariantKind::None: return "Baseline";
      case VariantKind::Global: return "SelfAttn";
      case VariantKind::Windowed: return "SelfAttn_" + std::to_string(width);
      case VariantKind::MultiHead:
        if (heads == 11 && first == 2 && step == 5) return "MultiHead";
        return "MultiHead_" + std::to_string(heads) + "_" + std::to_string(first) + "_" + std::to_string(step);
    }
    return "unknown";
  }

  void validate() const {
    if (kind == VariantKind::Windowed) detail::require(width >= 1, "attention width must be >= 1");
    if (kind == VariantKind::MultiHead) {
      detail::require(heads >= 1, "multi-head: need at least one head");
      detail::require(first >= 1 && step >= 1, "multi-head: first width and step must be >= 1");
    }
  }

  friend bool operator==(const AttentionVariant&, const AttentionVariant&) = default;
};

namespace detail {

inline std::vector<std::size_t> parse_counts(std::string_view text, std::string_view whole) {
  std::vector<std::size_t> out;
  while (true) {
    const auto cut = text.find('_');
    const std::string_view part = text.substr(0, cut);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size())
      throw InvalidArgument("malformed variant name '" + std::string(whole) + "'");
    out.push_back(value);
    if (cut == std::string_view::npos) return out;
    text.remove_prefix(cut + 1);
  }
}

}  // namespace detail

inline AttentionVariant parse_variant(std::string_view name) {
  AttentionVariant v;
  if (name == "Baseline") {
    v = AttentionVariant::none();
  } else if (name == "SelfAttn") {
    v = AttentionVariant::global();
  } else if (name.starts_with("SelfAttn_")) {
    const auto n = detail::parse_counts(name.substr(9), name);
    if (n.size() != 1) throw InvalidArgument("malformed variant name '" + std::string(name) + "'");
    v = AttentionVariant::windowed(n[0]);
  } else if (name == "MultiHead") {
    v = AttentionVariant::multihead(11);
  } else if (name.starts_with("MultiHead_")) {
    const auto n = detail::parse_counts(name.substr(10), name);
    if (n.size() != 3) throw InvalidArgument("MultiHead variant needs <p>_<first>_<step>: '" + std::string(name) + "'");
    v = AttentionVariant::multihead(n[0], n[1], n[2]);
  } else {
    throw InvalidArgument("unknown variant '" + std::string(name) + "'");
  }
  v.validate();
  return v;
}

struct ModelConfig {
  std::size_t input_dim = 40;
  std::size_t hidden_dim = 32;
  std::size_t classes = 10;
  AttentionVariant variant;
  ScoreKind score = ScoreKind::Additive;
  std::size_t additive_dim = 0;  // 0: same as hidden_dim
  double threshold = 0.5;
  std::size_t epochs = 30;
  double lr = 1e-3;
  double decay = 1e-6;
  double init_std = 0.05;
  RngSeed seed{};

  std::size_t score_dim() const noexcept { return additive_dim == 0 ? hidden_dim : additive_dim; }

  void validate() const {
    detail::require(input_dim >= 1 && hidden_dim >= 1 && classes >= 1, "model: F, d and C must be >= 1");
    detail::require(threshold > 0.0 && threshold < 1.0, "model: threshold must lie in (0, 1)");
    detail::require(lr >= 0.0 && decay >= 0.0, "model: lr and decay must be >= 0");
    detail::require(init_std > 0.0, "model: init std must be positive");
    variant.validate();
  }
};

/// Every learnable array. Attention entries are empty for the Baseline.
struct ModelParams {
  Matrix enc_W, enc_b;  // d x F, 1 x d
  GruParams gru;
  ScoreParams score;
  Matrix head_weights;  // 1 x p, MultiHead only
  Matrix out_W, out_b;  // C x d, 1 x C

  /// Visits (name, matrix) in a fixed order; used by the optimiser and checkpoints.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f("encoder.W", self.enc_W);
    f("encoder.b", self.enc_b);
    f("gru.W_z", self.gru.W_z);
    f("gru.W_r", self.gru.W_r);
    f("gru.W_n", self.gru.W_n);
    f("gru.U_z", self.gru.U_z);
    f("gru.U_r", self.gru.U_r);
    f("gru.U_n", self.gru.U_n);
    f("gru.b_z", self.gru.b_z);
    f("gru.b_r", self.gru.b_r);
    f("gru.b_n", self.gru.b_n);
    f("attention.v_a", self.score.v_a);
    f("attention.W_a", self.score.W_a);
    f("attention.head_weights", self.head_weights);
    f("classifier.W", self.out_W);
    f("classifier.b", self.out_b);
  }
  template <typename F>
  void for_each(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](std::string_view, const Matrix& m) { n += m.size(); });
    return n;
  }

  ModelParams zeros_like() const {
    ModelParams out = *this;
    out.for_each([](std::string_view, Matrix& m) { m.fill(0.0); });
    return out;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    bool same = true;
    std::vector<const Matrix*> rhs;
    b.for_each([&](std::string_view, const Matrix& m) { rhs.push_back(&m); });
    std::size_t k = 0;
    a.for_each([&](std::string_view, const Matrix& m) { same = same && m == *rhs[k++]; });
    return same;
  }
};

struct SedModel {
  ModelConfig config;
  ModelParams params;

  /// Encoder, GRU and classifier draw from their own seed streams so every variant built
  /// from one seed shares identical non-attention initial weights.
  static SedModel create(const ModelConfig& cfg) {
    cfg.validate();
    SedModel m{cfg, {}};
    const std::size_t f = cfg.input_dim, d = cfg.hidden_dim, c = cfg.classes;
    Rng enc_rng(derive_seed(cfg.seed, 1));
    m.params.enc_W = init_normal(d, f, enc_rng, 0.0, cfg.init_std);
    m.params.enc_b = Matrix(1, d);
    Rng gru_rng(derive_seed(cfg.seed, 2));
    m.params.gru = GruParams::random(d, d, gru_rng, cfg.init_std);
    if (cfg.variant.kind != VariantKind::None) {
      Rng att_rng(derive_seed(cfg.seed, 3));
      m.params.score = ScoreParams::random(cfg.score, d, cfg.score_dim(), att_rng, cfg.init_std);
    }
    if (cfg.variant.kind == VariantKind::MultiHead) m.params.head_weights = Matrix(1, cfg.variant.heads, 1.0);
    Rng out_rng(derive_seed(cfg.seed, 4));
    m.params.out_W = init_normal(c, d, out_rng, 0.0, cfg.init_std);
    m.params.out_b = Matrix(1, c);
    return m;
  }

  AttentionConfig attention_config() const {
    AttentionConfig a{config.score, std::nullopt, config.hidden_dim, config.score_dim()};
    if (config.variant.kind == VariantKind::Windowed) a.width = config.variant.width;
    return a;
  }

  MultiHeadConfig multihead_config() const {
    return MultiHeadConfig{config.variant.widths(), params.head_weights, config.score, params.score};
  }
};

/// Everything the backward pass needs, plus the attention maps for export.
struct ForwardPass {
  Matrix encoded;
  GruCache gru;
  std::optional<AttentionResult> attention;  // Global / Windowed
  std::optional<MultiHeadResult> multihead;
  Matrix attended;
  Matrix posteriogram;
  bool degenerate = false;

  const Matrix& hidden() const noexcept { return gru.hidden; }
};

inline ForwardPass model_forward(const SedModel& model, const Matrix& features) {
  detail::require(features.cols() == model.config.input_dim,
                  "model: features have " + std::to_string(features.cols()) + " columns, expected " +
                      std::to_string(model.config.input_dim));
  detail::require(features.rows() >= 1, "model: empty feature sequence");
  const ModelParams& p = model.params;
  ForwardPass fp;
  fp.encoded = detail::add_bias(matmul_bt(features, p.enc_W), p.enc_b);
  fp.gru = gru_forward_cached(fp.encoded, p.gru);
  switch (model.config.variant.kind) {
    case VariantKind::None:
      fp.attended = fp.gru.hidden;
      break;
    case VariantKind::Global:
    case VariantKind::Windowed:
      fp.attention = attend(fp.gru.hidden, model.attention_config(), p.score);
      fp.attended = fp.attention->attended;
      fp.degenerate = fp.attention->degenerate;
      break;
    case VariantKind::MultiHead:
      fp.multihead = multihead_attend(fp.gru.hidden, model.multihead_config());
      fp.attended = fp.multihead->attended;
      fp.degenerate = fp.multihead->degenerate;
      break;
  }
  fp.posteriogram = detail::add_bias(matmul_bt(fp.attended, p.out_W), p.out_b);
  for (auto& v : fp.posteriogram.data()) v = detail::sigmoid(v);
  return fp;
}

inline Matrix predict(const SedModel& model, const Matrix& features) {
  return model_forward(model, features).posteriogram;
}

/// Parameter gradients given dLoss/dlogits (T x C), the gradient before the output sigmoid.
inline ModelParams model_backward(const SedModel& model, const Matrix& features, const ForwardPass& fp,
                                  const Matrix& dlogits) {
  fp.posteriogram.require_same_shape(dlogits, "model_backward: dlogits");
  const ModelParams& p = model.params;
  const Matrix ones(features.rows(), 1, 1.0);
  ModelParams g = p.zeros_like();
  g.out_W = matmul_at(dlogits, fp.attended);
  g.out_b = matmul_at(ones, dlogits);
  const Matrix d_attended = matmul(dlogits, p.out_W);

  Matrix d_hidden;
  switch (model.config.variant.kind) {
    case VariantKind::None:
      d_hidden = d_attended;
      break;
    case VariantKind::Global:
    case VariantKind::Windowed: {
      auto ag = attention_backward(fp.gru.hidden, model.attention_config(), p.score, fp.attention->weights, d_attended);
      d_hidden = std::move(ag.hidden);
      g.score = std::move(ag.params);
      break;
    }
    case VariantKind::MultiHead: {
      auto mg = multihead_backward(fp.gru.hidden, model.multihead_config(), *fp.multihead, d_attended);
      d_hidden = std::move(mg.hidden);
      g.score = std::move(mg.params);
      g.head_weights = std::move(mg.head_weights);
      break;
    }
  }
  auto gg = gru_backward(fp.encoded, p.gru, fp.gru, d_hidden);
  g.gru = std::move(gg.params);
  g.enc_W = matmul_at(gg.input, features);
  g.enc_b = matmul_at(ones, gg.input);
  return g;
}

}  // namespace memsa
