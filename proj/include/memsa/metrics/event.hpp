#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "memsa/core/error.hpp"
#include "memsa/metrics/annotations.hpp"
#include "memsa/metrics/report.hpp"

namespace memsa {

struct EventMetricsOptions {
  double collar = 0.25;           // seconds, onset only
  bool substitutions = false;     // off: cross-class onset matches count as FP + FN
};

/// Size of a maximum one-to-one matching of predicted to reference onsets within the
/// collar. Both inputs must be sorted. Every reference accepts the interval
/// [r - collar, r + collar] and those intervals are ordered like their centres, so taking
/// the earliest compatible pair is optimal.
inline std::size_t match_onsets(const std::vector<double>& ref, const std::vector<double>& pred, double collar,
                                std::vector<char>* ref_matched = nullptr, std::vector<char>* pred_matched = nullptr) {
  if (ref_matched) ref_matched->assign(ref.size(), 0);
  if (pred_matched) pred_matched->assign(pred.size(), 0);
  std::size_t i = 0, j = 0, matches = 0;
  while (i < ref.size() && j < pred.size()) {
    if (std::abs(ref[i] - pred[j]) <= collar) {
      if (ref_matched) (*ref_matched)[i] = 1;
      if (pred_matched) (*pred_matched)[j] = 1;
      ++matches, ++i, ++j;
    } else if (pred[j] < ref[i]) {
      ++j;
    } else {
      ++i;
    }
  }
  return matches;
}

namespace detail {

inline std::vector<double> sorted_onsets(const EventList& events, const std::string& label) {
  std::vector<double> out;
  for (const auto& e : events)
    if (e.label == label) out.push_back(e.onset);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Micro-averaged onset-only event metrics. Clips missing on one side have no events there.
inline MetricsReport event_metrics(const EventsByClip& ref, const EventsByClip& pred, const EventMetricsOptions& opt = {}) {
  detail::require(opt.collar >= 0.0, "event_metrics: collar must be >= 0");
  MetricsReport r;
  std::set<std::string> clips;
  for (const auto& [clip, _] : ref) clips.insert(clip);
  for (const auto& [clip, _] : pred) clips.insert(clip);
  static const EventList kNone;
  const auto all_labels = [&] {
    auto s = labels_in(ref);
    s.merge(labels_in(pred));
    return s;
  }();
  for (const auto& label : all_labels) r.per_class[label];

  for (const auto& clip : clips) {
    const auto ra = ref.find(clip);
    const auto pa = pred.find(clip);
    const EventList& re = ra == ref.end() ? kNone : ra->second;
    const EventList& pe = pa == pred.end() ? kNone : pa->second;
    for (const auto& e : re) e.validate();
    for (const auto& e : pe) e.validate();

    std::vector<double> left_ref, left_pred;  // unmatched onsets, any class
    std::size_t clip_fn = 0, clip_fp = 0;
    for (const auto& label : all_labels) {
      const auto a = detail::sorted_onsets(re, label);
      const auto b = detail::sorted_onsets(pe, label);
      std::vector<char> am, bm;
      const std::size_t tp = match_onsets(a, b, opt.collar, &am, &bm);
      auto& cc = r.per_class[label];
      cc.tp += tp;
      cc.fp += b.size() - tp;
      cc.fn += a.size() - tp;
      r.tp += tp;
      clip_fp += b.size() - tp;
      clip_fn += a.size() - tp;
      r.reference_count += a.size();
      for (std::size_t k = 0; k < a.size(); ++k)
        if (!am[k]) left_ref.push_back(a[k]);
      for (std::size_t k = 0; k < b.size(); ++k)
        if (!bm[k]) left_pred.push_back(b[k]);
    }
    r.fp += clip_fp;
    r.fn += clip_fn;
    std::size_t subs = 0;
    if (opt.substitutions) {
      std::sort(left_ref.begin(), left_ref.end());
      std::sort(left_pred.begin(), left_pred.end());
      subs = match_onsets(left_ref, left_pred, opt.collar);
    }
    r.substitutions += subs;
    r.deletions += clip_fn - subs;
    r.insertions += clip_fp - subs;
  }
  r.finalize();
  return r;
}

struct ClassF1 {
  std::string label;
  ClassCounts counts;
  F1Value f1;
};

/// Event F1 per class, no cross-class aggregation. `classes` lists the vocabulary; labels
/// that only occur in the predictions are appended (their events are all FP).
inline std::vector<ClassF1> classwise_event_f(const EventsByClip& ref, const EventsByClip& pred,
                                              const std::vector<std::string>& classes, double collar = 0.25) {
  const MetricsReport r = event_metrics(ref, pred, {collar, false});
  std::vector<std::string> order = classes;
  for (const auto& [label, _] : r.per_class)
    if (std::find(order.begin(), order.end(), label) == order.end()) order.push_back(label);
  std::vector<ClassF1> out;
  for (const auto& label : order) {
    const auto it = r.per_class.find(label);
    const ClassCounts c = it == r.per_class.end() ? ClassCounts{} : it->second;
    out.push_back({label, c, c.f1()});
  }
  return out;
}

inline EventsByClip filter_label(const EventsByClip& events, const std::string& label) {
  EventsByClip out;
  for (const auto& [clip, list] : events) {
    auto& dst = out[clip];
    for (const auto& e : list)
      if (e.label == label) dst.push_back(e);
  }
  return out;
}

}  // namespace memsa
