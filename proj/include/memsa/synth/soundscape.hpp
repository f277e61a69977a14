#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "memsa/core/error.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/random.hpp"
#include "memsa/metrics/annotations.hpp"

namespace memsa {

/// Ten urban sound class names; larger vocabularies continue as class_10, class_11, ...
inline std::vector<std::string> default_class_names(std::size_t classes) {
  static const char* kNames[] = {"air_conditioner", "car_horn", "children_playing", "dog_bark", "drilling",
                                 "engine_idling",   "gun_shot", "jackhammer",       "siren",    "street_music"};
  std::vector<std::string> out;
  for (std::size_t c = 0; c < classes; ++c) out.push_back(c < 10 ? kNames[c] : "class_" + std::to_string(c));
  return out;
}

struct SoundscapeConfig {
  double duration = 10.0;    // seconds
  double frame_rate = 50.0;  // frames per second
  std::size_t feature_dim = 40;
  std::size_t classes = 10;
  std::size_t min_events = 1;
  std::size_t max_events = 9;
  double min_event_duration = 0.5;
  double max_event_duration = 4.0;
  double background_level = 1.0;     // stationary std of the background walk
  double background_memory = 0.99;   // AR(1) coefficient of the walk
  double snr = 0.35;                 // prototype amplitude (prototypes have unit RMS)
  double noise_level = 1.0;          // white noise std
  std::size_t max_polyphony = 0;     // 0: unlimited
  RngSeed seed{};                    // fixes the class prototypes

  std::size_t frames() const { return static_cast<std::size_t>(std::llround(duration * frame_rate)); }
  std::size_t min_event_frames() const { return static_cast<std::size_t>(std::llround(min_event_duration * frame_rate)); }
  std::size_t max_event_frames() const { return static_cast<std::size_t>(std::llround(max_event_duration * frame_rate)); }
  std::vector<std::string> class_names() const { return default_class_names(classes); }

  void validate() const {
    detail::require(duration > 0.0 && frame_rate > 0.0, "soundscape: duration and frame rate must be positive");
    detail::require(feature_dim >= 1 && classes >= 1, "soundscape: feature dim and class count must be >= 1");
    detail::require(min_events >= 1 && min_events <= max_events, "soundscape: need 1 <= min events <= max events");
    detail::require(min_event_duration > 0.0 && min_event_duration <= max_event_duration,
                    "soundscape: need 0 < min event duration <= max event duration");
    detail::require(max_event_duration <= duration, "soundscape: event durations exceed the clip length");
    detail::require(min_event_frames() >= 1, "soundscape: events shorter than one frame");
    detail::require(background_level >= 0.0 && noise_level >= 0.0, "soundscape: noise levels must be >= 0");
    detail::require(background_memory >= 0.0 && background_memory < 1.0, "soundscape: background memory must lie in [0, 1)");
    detail::require(snr > 0.0, "soundscape: snr must be positive");
  }
};

struct SoundscapeClip {
  std::string id;
  Matrix features;  // T x F
  EventList events;
};

/// The three additive parts of a clip's features, kept separate for inspection.
struct ClipComponents {
  Matrix background;
  Matrix signal;  // snr * prototype over active frames
  Matrix noise;
  Matrix activity;  // T x C, 1 where a class is active
  EventList events;
};

/// One unit-RMS random pattern per class, fixed by the config seed.
inline Matrix class_prototypes(const SoundscapeConfig& cfg) {
  Matrix protos(cfg.classes, cfg.feature_dim);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    Rng rng(derive_seed(cfg.seed, 1000 + c));
    auto row = protos.row(c);
    for (auto& v : row) v = rng.normal();
    const double rms = norm(row) / std::sqrt(static_cast<double>(row.size()));
    for (auto& v : row) v /= rms;
  }
  return protos;
}

namespace detail {

struct FrameEvent {
  std::size_t cls, start, length;
};

inline std::vector<FrameEvent> draw_events(const SoundscapeConfig& cfg, Rng& rng) {
  const std::size_t frames = cfg.frames();
  const auto count = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(cfg.min_events),
                                                              static_cast<std::int64_t>(cfg.max_events)));
  const std::size_t lo = cfg.min_event_frames();
  const std::size_t hi = std::min(cfg.max_event_frames(), frames);
  std::vector<FrameEvent> events;
  std::vector<std::size_t> polyphony(frames, 0);
  for (std::size_t n = 0; n < count; ++n) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      FrameEvent e;
      e.cls = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.classes) - 1));
      e.length = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
      e.start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(frames - e.length)));
      if (cfg.max_polyphony > 0) {
        const auto peak = *std::max_element(polyphony.begin() + static_cast<std::ptrdiff_t>(e.start),
                                            polyphony.begin() + static_cast<std::ptrdiff_t>(e.start + e.length));
        if (peak >= cfg.max_polyphony) continue;
      }
      for (std::size_t t = e.start; t < e.start + e.length; ++t) ++polyphony[t];
      events.push_back(e);
      break;
    }
  }
  return events;
}

}  // namespace detail

/// Events get a uniform class, a uniform whole-frame duration and a uniform onset frame
/// that keeps them inside the clip; onsets and offsets therefore sit on the frame grid.
inline ClipComponents generate_clip_components(const SoundscapeConfig& cfg, RngSeed clip_seed) {
  cfg.validate();
  const std::size_t frames = cfg.frames();
  const std::size_t dim = cfg.feature_dim;
  const auto names = cfg.class_names();
  const Matrix protos = class_prototypes(cfg);

  Rng event_rng(derive_seed(clip_seed, 0));
  const auto drawn = detail::draw_events(cfg, event_rng);

  ClipComponents out{Matrix(frames, dim), Matrix(frames, dim), Matrix(frames, dim), Matrix(frames, cfg.classes), {}};
  for (const auto& e : drawn) {
    out.events.push_back({names[e.cls], static_cast<double>(e.start) / cfg.frame_rate,
                          static_cast<double>(e.start + e.length) / cfg.frame_rate});
    for (std::size_t t = e.start; t < e.start + e.length; ++t) out.activity(t, e.cls) = 1.0;
  }
  std::sort(out.events.begin(), out.events.end());
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < cfg.classes; ++c)
      if (out.activity(t, c) != 0.0) axpy(cfg.snr, protos.row(c), out.signal.row(t));

  if (cfg.background_level > 0.0) {
    Rng walk_rng(derive_seed(clip_seed, 1));
    const double rho = cfg.background_memory;
    const double innovation = cfg.background_level * std::sqrt(1.0 - rho * rho);
    for (std::size_t k = 0; k < dim; ++k) out.background(0, k) = walk_rng.normal(0.0, cfg.background_level);
    for (std::size_t t = 1; t < frames; ++t)
      for (std::size_t k = 0; k < dim; ++k)
        out.background(t, k) = rho * out.background(t - 1, k) + walk_rng.normal(0.0, innovation);
  }
  if (cfg.noise_level > 0.0) {
    Rng noise_rng(derive_seed(clip_seed, 2));
    for (auto& v : out.noise.data()) v = noise_rng.normal(0.0, cfg.noise_level);
  }
  return out;
}

inline SoundscapeClip generate_clip(const SoundscapeConfig& cfg, RngSeed clip_seed, std::string id = "clip") {
  auto parts = generate_clip_components(cfg, clip_seed);
  return {std::move(id), parts.background + parts.signal + parts.noise, std::move(parts.events)};
}

enum class DurationProfile { Short, Long, Mixed };

inline std::string to_string(DurationProfile p) {
  switch (p) {
    case DurationProfile::Short: return "short";
    case DurationProfile::Long: return "long";
    case DurationProfile::Mixed: return "mixed";
  }
  return "unknown";
}

inline DurationProfile parse_duration_profile(const std::string& name) {
  for (auto p : {DurationProfile::Short, DurationProfile::Long, DurationProfile::Mixed})
    if (to_string(p) == name) return p;
  throw InvalidArgument("unknown duration profile '" + name + "'");
}

/// Short: 0.5-1.0 s, Long: 3.0-4.0 s, Mixed: 0.5-4.0 s.
inline SoundscapeConfig duration_skew_profile(SoundscapeConfig cfg, DurationProfile profile) {
  switch (profile) {
    case DurationProfile::Short: cfg.min_event_duration = 0.5, cfg.max_event_duration = 1.0; break;
    case DurationProfile::Long: cfg.min_event_duration = 3.0, cfg.max_event_duration = 4.0; break;
    case DurationProfile::Mixed: cfg.min_event_duration = 0.5, cfg.max_event_duration = 4.0; break;
  }
  return cfg;
}

}  // namespace memsa
