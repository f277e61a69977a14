#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <spdlog/spdlog.h>

#include "memsa/core/adam.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/random.hpp"
#include "memsa/metrics/event.hpp"
#include "memsa/metrics/segment.hpp"
#include "memsa/model/loss.hpp"
#include "memsa/model/sed_model.hpp"
#include "memsa/synth/soundscape.hpp"

namespace memsa {

enum class SelectionMetric { EventF1, SegmentF1 };

struct EvalConfig {
  double frame_rate = 50.0;
  double clip_duration = 10.0;
  double collar = 0.25;
  double segment_length = 1.0;
  std::vector<std::string> classes;
};

struct TrainOptions {
  std::size_t batch_size = 1;
  bool shuffle = true;
  SelectionMetric selection = SelectionMetric::EventF1;
  EvalConfig eval;
};

struct Evaluation {
  MetricsReport segment;
  MetricsReport event;
  double loss = 0.0;
  EventsByClip predictions;
};

/// Runs the model on every clip and scores the thresholded output.
inline Evaluation evaluate(const SedModel& model, const std::vector<SoundscapeClip>& clips, const EvalConfig& eval) {
  Evaluation out;
  EventsByClip ref;
  double total = 0.0;
  for (const auto& clip : clips) {
    const Matrix probs = predict(model, clip.features);
    total += bce_loss(probs, events_to_frames(clip.events, clip.features.rows(), eval.frame_rate, eval.classes));
    out.predictions[clip.id] = frames_to_events(binarize(probs, model.config.threshold), eval.frame_rate, eval.classes);
    ref[clip.id] = clip.events;
  }
  out.loss = clips.empty() ? 0.0 : total / static_cast<double>(clips.size());
  out.segment = segment_metrics(ref, out.predictions, eval.clip_duration, eval.classes, eval.segment_length);
  out.event = event_metrics(ref, out.predictions, {eval.collar, false});
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_event_f1 = 0.0;
  double val_segment_f1 = 0.0;
  double val_event_er = 0.0;
  double val_segment_er = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainResult {
  SedModel model;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Adam state for every parameter array, in ModelParams visit order.
struct ModelOptimizer {
  AdamConfig config;
  std::vector<AdamState> states;

  ModelOptimizer(const ModelParams& params, AdamConfig cfg) : config(cfg) {
    params.for_each([&](std::string_view, const Matrix& m) { states.push_back(AdamState::zeros_like(m)); });
  }

  void step(ModelParams& params, const ModelParams& grad) {
    std::vector<const Matrix*> g;
    grad.for_each([&](std::string_view, const Matrix& m) { g.push_back(&m); });
    std::size_t k = 0;
    params.for_each([&](std::string_view, Matrix& m) {
      if (!m.empty()) adam_update(m, *g[k], states[k], config);
      ++k;
    });
  }
};

namespace detail {

inline void accumulate(ModelParams& into, const ModelParams& g, double scale) {
  std::vector<const Matrix*> src;
  g.for_each([&](std::string_view, const Matrix& m) { src.push_back(&m); });
  std::size_t k = 0;
  into.for_each([&](std::string_view, Matrix& m) {
    axpy(scale, src[k]->data(), m.data());
    ++k;
  });
}

}  // namespace detail

/// Per-clip (or per-minibatch) Adam on mean BCE. Deterministic given model.config.seed.
/// Keeps the parameters of the epoch with the best validation score.
inline TrainResult train(SedModel model, const std::vector<SoundscapeClip>& train_set,
                         const std::vector<SoundscapeClip>& val_set, const TrainOptions& opt) {
  detail::require(!train_set.empty(), "train: empty training set");
  detail::require(opt.batch_size >= 1, "train: batch size must be >= 1");
  detail::require(!opt.eval.classes.empty(), "train: class vocabulary is empty");
  const std::string name = model.config.variant.name();

  std::vector<Matrix> targets;
  for (const auto& clip : train_set)
    targets.push_back(events_to_frames(clip.events, clip.features.rows(), opt.eval.frame_rate, opt.eval.classes));

  ModelOptimizer optimizer(model.params, AdamConfig{model.config.lr, 0.9, 0.999, 1e-8, model.config.decay});
  Rng order_rng(derive_seed(model.config.seed, 5));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{model, {}, 0};
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= model.config.epochs; ++epoch) {
    if (opt.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(order_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      ModelParams batch_grad;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t n = order[b];
        auto lg = model_loss_and_gradient(model, train_set[n].features, targets[n]);
        if (!std::isfinite(lg.loss))
          throw NumericError("train: non-finite loss for " + name + " at epoch " + std::to_string(epoch) + ", clip " +
                             train_set[n].id);
        total += lg.loss;
        if (b == start) {
          batch_grad = std::move(lg.grad);
          if (stop - start > 1) batch_grad.for_each([&](std::string_view, Matrix& m) { m *= 1.0 / static_cast<double>(stop - start); });
        } else {
          detail::accumulate(batch_grad, lg.grad, 1.0 / static_cast<double>(stop - start));
        }
      }
      optimizer.step(model.params, batch_grad);
    }

    EpochRecord rec{epoch, total / static_cast<double>(train_set.size())};
    if (!val_set.empty()) {
      const Evaluation ev = evaluate(model, val_set, opt.eval);
      rec.val_loss = ev.loss;
      rec.val_event_f1 = ev.event.f1;
      rec.val_segment_f1 = ev.segment.f1;
      rec.val_event_er = ev.event.error_rate;
      rec.val_segment_er = ev.segment.error_rate;
    }
    result.history.push_back(rec);
    const double score = opt.selection == SelectionMetric::EventF1 ? rec.val_event_f1 : rec.val_segment_f1;
    if (val_set.empty() || score > best) {
      best = score;
      result.model = model;
      result.best_epoch = epoch;
    }
    spdlog::debug("{} epoch {}: loss {:.5f} val loss {:.5f} val event F1 {:.2f} segment F1 {:.2f}", name, epoch,
                  rec.train_loss, rec.val_loss, rec.val_event_f1, rec.val_segment_f1);
  }
  if (result.history.empty()) result.model = model;
  return result;
}

}  // namespace memsa
