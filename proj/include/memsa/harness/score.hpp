#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "memsa/core/error.hpp"
#include "memsa/metrics/annotations.hpp"
#include "memsa/metrics/event.hpp"
#include "memsa/metrics/segment.hpp"

namespace memsa {

enum class ScoreMode { Segment, Event };

inline ScoreMode parse_score_mode(const std::string& s) {
  if (s == "segment") return ScoreMode::Segment;
  if (s == "event") return ScoreMode::Event;
  throw InvalidArgument("unknown scoring mode '" + s + "' (segment or event)");
}

struct ScoringOptions {
  ScoreMode mode = ScoreMode::Segment;
  double collar = 0.25;
  double segment_length = 1.0;
  double duration = 10.0;            // segment mode: stretched to the latest offset if needed
  std::vector<std::string> classes;  // empty: every label seen in either file, sorted
  bool substitutions = false;        // event mode
};

struct ScoreOutcome {
  MetricsReport report;
  std::vector<std::string> unknown_clips;  // in pred but not in ref; all their events count as FP
};

inline ScoreOutcome score_annotations(const EventsByClip& ref, const EventsByClip& pred, const ScoringOptions& opt) {
  ScoreOutcome out;
  for (const auto& [clip, events] : pred) {
    if (ref.contains(clip)) continue;
    out.unknown_clips.push_back(clip);
    spdlog::warn("prediction clip '{}' is not in the reference; its {} event(s) count as false positives", clip,
                 events.size());
  }
  if (opt.mode == ScoreMode::Event) {
    out.report = event_metrics(ref, pred, {opt.collar, opt.substitutions});
    return out;
  }
  std::vector<std::string> classes = opt.classes;
  if (classes.empty()) {
    auto labels = labels_in(ref);
    labels.merge(labels_in(pred));
    classes.assign(labels.begin(), labels.end());
  }
  double duration = opt.duration;
  for (const auto* side : {&ref, &pred})
    for (const auto& [clip, events] : *side)
      for (const auto& e : events) duration = std::max(duration, e.offset);
  if (duration > opt.duration) spdlog::warn("events run to {:.3f} s; scoring clips of that length", duration);
  if (classes.empty()) {  // nothing annotated on either side
    out.report.finalize();
    return out;
  }
  out.report = segment_metrics(ref, pred, duration, classes, opt.segment_length);
  return out;
}

inline ScoreOutcome score_files(const std::string& ref_path, const std::string& pred_path, const ScoringOptions& opt) {
  return score_annotations(read_annotations_csv(ref_path), read_annotations_csv(pred_path), opt);
}

}  // namespace memsa
