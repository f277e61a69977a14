#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/metrics/annotations.hpp"
#include "memsa/model/sed_model.hpp"

namespace memsa {

inline constexpr double kProbabilityClip = 1e-7;

/// Mean binary cross-entropy over all T x C cells, probabilities clipped to [1e-7, 1 - 1e-7].
inline double bce_loss(const Matrix& probs, const Matrix& targets) {
  probs.require_same_shape(targets, "bce_loss");
  detail::require(!probs.empty(), "bce_loss: empty input");
  double total = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = std::clamp(probs[k], kProbabilityClip, 1.0 - kProbabilityClip);
    const double y = targets[k];
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

/// dLoss/dlogit for P = sigmoid(logit). Cells pinned by the clip get zero gradient.
inline Matrix bce_logit_gradient(const Matrix& probs, const Matrix& targets) {
  probs.require_same_shape(targets, "bce_logit_gradient");
  const double scale = 1.0 / static_cast<double>(probs.size());
  Matrix g(probs.rows(), probs.cols());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double p = probs[k];
    if (p < kProbabilityClip || p > 1.0 - kProbabilityClip) continue;
    g[k] = (p - targets[k]) * scale;
  }
  return g;
}

/// 1 where p >= threshold.
inline Matrix binarize(const Matrix& probs, double threshold = 0.5) {
  detail::require(threshold > 0.0 && threshold < 1.0, "binarize: threshold must lie in (0, 1)");
  Matrix out(probs.rows(), probs.cols());
  for (std::size_t k = 0; k < probs.size(); ++k) out[k] = probs[k] >= threshold ? 1.0 : 0.0;
  return out;
}

/// Each maximal run of active frames per class becomes one event [start / rate, (end + 1) / rate).
/// Events come out sorted by class, then onset.
inline std::vector<EventAnnotation> frames_to_events(const Matrix& active, double frame_rate,
                                                     const std::vector<std::string>& labels) {
  detail::require(frame_rate > 0.0, "frames_to_events: frame rate must be positive");
  detail::require(labels.size() == active.cols(), "frames_to_events: need one label per class column");
  std::vector<EventAnnotation> events;
  for (std::size_t c = 0; c < active.cols(); ++c) {
    std::size_t t = 0;
    while (t < active.rows()) {
      if (active(t, c) == 0.0) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      while (t < active.rows() && active(t, c) != 0.0) ++t;
      events.push_back({labels[c], static_cast<double>(start) / frame_rate, static_cast<double>(t) / frame_rate});
    }
  }
  return events;
}

/// Frame-level target matrix: frame t is active for an event when its centre lies in [onset, offset).
inline Matrix events_to_frames(const std::vector<EventAnnotation>& events, std::size_t frames, double frame_rate,
                               const std::vector<std::string>& labels) {
  detail::require(frame_rate > 0.0, "events_to_frames: frame rate must be positive");
  Matrix out(frames, labels.size());
  for (const auto& e : events) {
    const auto it = std::find(labels.begin(), labels.end(), e.label);
    if (it == labels.end()) throw DataError("unknown label '" + e.label + "'");
    const std::size_t c = static_cast<std::size_t>(it - labels.begin());
    for (std::size_t t = 0; t < frames; ++t) {
      const double centre = (static_cast<double>(t) + 0.5) / frame_rate;
      if (centre >= e.onset && centre < e.offset) out(t, c) = 1.0;
    }
  }
  return out;
}

struct LossAndGradient {
  double loss = 0.0;
  ModelParams grad;
  bool degenerate = false;
};

inline double model_loss(const SedModel& model, const Matrix& features, const Matrix& targets) {
  return bce_loss(predict(model, features), targets);
}

inline LossAndGradient model_loss_and_gradient(const SedModel& model, const Matrix& features, const Matrix& targets) {
  const ForwardPass fp = model_forward(model, features);
  LossAndGradient out;
  out.loss = bce_loss(fp.posteriogram, targets);
  out.grad = model_backward(model, features, fp, bce_logit_gradient(fp.posteriogram, targets));
  out.degenerate = fp.degenerate;
  return out;
}

}  // namespace memsa
