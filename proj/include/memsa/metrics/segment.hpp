#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "memsa/core/error.hpp"
#include "memsa/metrics/annotations.hpp"
#include "memsa/metrics/report.hpp"

namespace memsa {

/// Per-clip activity on a fixed segment grid, segments x classes.
struct SegmentActivity {
  std::size_t segments = 0;
  std::vector<std::string> classes;
  double segment_length = 1.0;
  std::vector<char> cells;

  SegmentActivity() = default;
  SegmentActivity(std::size_t segments, std::vector<std::string> classes, double segment_length)
      : segments(segments), classes(std::move(classes)), segment_length(segment_length),
        cells(segments * this->classes.size(), 0) {}

  bool active(std::size_t k, std::size_t c) const { return cells[k * classes.size() + c] != 0; }
  void set(std::size_t k, std::size_t c, bool v = true) { cells[k * classes.size() + c] = v ? 1 : 0; }
  std::size_t count_active() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }

  friend bool operator==(const SegmentActivity&, const SegmentActivity&) = default;
};

/// Tolerance for events that end at the clip boundary up to rounding.
inline constexpr double kBoundarySlack = 1e-9;

inline std::size_t segment_count(double duration, double segment_length) {
  detail::require(segment_length > 0.0, "segment length must be positive");
  detail::require(duration > 0.0, "clip duration must be positive");
  return static_cast<std::size_t>(std::ceil(duration / segment_length - kBoundarySlack));
}

/// Cell (k, c) is active iff an event of class c overlaps [k len, (k+1) len) by a strictly
/// positive amount.
inline SegmentActivity segment_rollup(const EventList& events, double duration, const std::vector<std::string>& classes,
                                      double segment_length = 1.0) {
  SegmentActivity act(segment_count(duration, segment_length), classes, segment_length);
  for (const auto& e : events) {
    e.validate();
    if (e.offset > duration + kBoundarySlack)
      throw InvalidArgument("event '" + e.label + "' ends after the clip (" + format_double(e.offset) + " s > " +
                            format_double(duration) + " s)");
    const auto it = std::find(classes.begin(), classes.end(), e.label);
    if (it == classes.end()) throw InvalidArgument("event label '" + e.label + "' is not in the class vocabulary");
    const std::size_t c = static_cast<std::size_t>(it - classes.begin());
    for (std::size_t k = 0; k < act.segments; ++k) {
      const double lo = static_cast<double>(k) * segment_length;
      const double hi = static_cast<double>(k + 1) * segment_length;
      if (std::min(hi, e.offset) - std::max(lo, e.onset) > 0.0) act.set(k, c);
    }
  }
  return act;
}

/// Micro-averaged segment-based metrics with per-segment substitution accounting.
inline MetricsReport segment_metrics(const std::vector<SegmentActivity>& ref, const std::vector<SegmentActivity>& pred) {
  detail::require(ref.size() == pred.size(), "segment_metrics: clip counts differ");
  MetricsReport r;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    const auto& a = ref[n];
    const auto& b = pred[n];
    detail::require(a.segments == b.segments && a.classes == b.classes,
                    "segment_metrics: clip " + std::to_string(n) + " shape mismatch");
    for (const auto& label : a.classes) r.per_class[label];
    for (std::size_t k = 0; k < a.segments; ++k) {
      std::size_t tp = 0, fp = 0, fn = 0, nref = 0;
      for (std::size_t c = 0; c < a.classes.size(); ++c) {
        const bool x = a.active(k, c), y = b.active(k, c);
        auto& cc = r.per_class[a.classes[c]];
        nref += x;
        if (x && y) ++tp, ++cc.tp;
        if (!x && y) ++fp, ++cc.fp;
        if (x && !y) ++fn, ++cc.fn;
      }
      r.tp += tp;
      r.fp += fp;
      r.fn += fn;
      r.reference_count += nref;
      r.substitutions += std::min(fn, fp);
      r.deletions += fn > fp ? fn - fp : 0;
      r.insertions += fp > fn ? fp - fn : 0;
    }
  }
  r.finalize();
  return r;
}

/// Rolls both sides up per clip (clips from either side; missing clips have no events)
/// and scores them. Every clip has the same duration.
inline MetricsReport segment_metrics(const EventsByClip& ref, const EventsByClip& pred, double duration,
                                     const std::vector<std::string>& classes, double segment_length = 1.0) {
  std::vector<SegmentActivity> a, b;
  std::set<std::string> clips;
  for (const auto& [clip, _] : ref) clips.insert(clip);
  for (const auto& [clip, _] : pred) clips.insert(clip);
  static const EventList kNone;
  for (const auto& clip : clips) {
    const auto ra = ref.find(clip);
    const auto pa = pred.find(clip);
    a.push_back(segment_rollup(ra == ref.end() ? kNone : ra->second, duration, classes, segment_length));
    b.push_back(segment_rollup(pa == pred.end() ? kNone : pa->second, duration, classes, segment_length));
  }
  return segment_metrics(a, b);
}

}  // namespace memsa
