#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "../support/oracles.hpp"

using namespace memsa;

namespace {

const std::vector<std::string> kAB = {"A", "B"};

SegmentActivity activity(std::size_t segments, std::size_t classes, std::initializer_list<std::pair<std::size_t, std::size_t>> on) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back(std::string(1, static_cast<char>('A' + c)));
  SegmentActivity a(segments, names, 1.0);
  for (auto [k, c] : on) a.set(k, c);
  return a;
}

EventsByClip random_events(std::mt19937_64& gen, std::size_t clips, std::size_t max_events) {
  EventsByClip out;
  std::uniform_real_distribution<double> onset(0.0, 3.0);
  for (std::size_t n = 0; n < clips; ++n) {
    auto& list = out["c" + std::to_string(n)];
    const std::size_t count = gen() % (max_events + 1);
    for (std::size_t k = 0; k < count; ++k) {
      const double on = onset(gen);
      list.push_back({kAB[gen() % 2], on, on + 0.1 + onset(gen)});
    }
  }
  return out;
}

}  // namespace

TEST(SegmentRollup, NoEventsIsAllFalse) {
  const auto a = segment_rollup({}, 10.0, kAB);
  EXPECT_EQ(a.segments, 10u);
  EXPECT_EQ(a.count_active(), 0u);
}

TEST(SegmentRollup, FullCoverage) {
  const auto a = segment_rollup({{"A", 0.0, 10.0}}, 10.0, kAB);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_TRUE(a.active(k, 0));
    EXPECT_FALSE(a.active(k, 1));
  }
}

TEST(SegmentRollup, PartialOverlapArithmetic) {
  const auto a = segment_rollup({{"A", 1.2, 2.4}}, 10.0, kAB);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(a.active(k, 0), k == 1 || k == 2) << k;
  EXPECT_EQ(a.count_active(), 2u);
}

TEST(SegmentRollup, BoundaryTouchDoesNotActivate) {
  const auto a = segment_rollup({{"B", 1.0, 2.0}}, 4.0, kAB);
  EXPECT_FALSE(a.active(0, 1));
  EXPECT_TRUE(a.active(1, 1));
  EXPECT_FALSE(a.active(2, 1));
}

TEST(SegmentRollup, PartialLastSegmentAndErrors) {
  EXPECT_EQ(segment_rollup({}, 2.5, kAB).segments, 3u);
  EXPECT_THROW(segment_rollup({{"A", 1.0, 11.0}}, 10.0, kAB), InvalidArgument);
  EXPECT_THROW(segment_rollup({{"C", 1.0, 2.0}}, 10.0, kAB), InvalidArgument);
  EXPECT_THROW(segment_rollup({{"A", 2.0, 1.0}}, 10.0, kAB), InvalidArgument);
  EXPECT_THROW(segment_rollup({}, 10.0, kAB, 0.0), InvalidArgument);
}

TEST(SegmentRollup, MatchesFrameLevelActivity) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 100; ++trial) {
    EventList events;
    for (int k = 0; k < 5; ++k) {
      const std::size_t start = gen() % 400;
      events.push_back({kAB[gen() % 2], start / 50.0, (start + 1 + gen() % 100) / 50.0});
    }
    const auto seg = segment_rollup(events, 10.0, kAB);
    const Matrix frames = events_to_frames(events, 500, 50.0, kAB);
    for (std::size_t k = 0; k < 10; ++k)
      for (std::size_t c = 0; c < 2; ++c) {
        bool any = false;
        for (std::size_t t = 50 * k; t < 50 * k + 50; ++t) any = any || frames(t, c) != 0.0;
        EXPECT_EQ(seg.active(k, c), any);
      }
  }
}

TEST(SegmentMetrics, HandCase) {
  // 1 clip, 1 class, 3 segments: ref {0, 1}, pred {1, 2}
  const auto r = segment_metrics({activity(3, 1, {{0, 0}, {1, 0}})}, {activity(3, 1, {{1, 0}, {2, 0}})});
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.f1, 50.0);
  EXPECT_EQ(r.deletions, 1u);
  EXPECT_EQ(r.insertions, 1u);
  EXPECT_EQ(r.substitutions, 0u);
  EXPECT_EQ(r.reference_count, 2u);
  EXPECT_EQ(r.error_rate, 1.0);
}

TEST(SegmentMetrics, PerfectAndEmptyPredictions) {
  const auto ref = activity(4, 2, {{0, 0}, {1, 1}, {3, 0}});
  const auto perfect = segment_metrics({ref}, {ref});
  EXPECT_EQ(perfect.f1, 100.0);
  EXPECT_EQ(perfect.error_rate, 0.0);
  const auto miss = segment_metrics({ref}, {activity(4, 2, {})});
  EXPECT_EQ(miss.f1, 0.0);
  EXPECT_EQ(miss.error_rate, 1.0);
  EXPECT_FALSE(miss.f1_undefined);
}

TEST(SegmentMetrics, SubstitutionWithinSegment) {
  // segment 0: ref A, pred B -> S = 1
  const auto r = segment_metrics({activity(1, 2, {{0, 0}})}, {activity(1, 2, {{0, 1}})});
  EXPECT_EQ(r.substitutions, 1u);
  EXPECT_EQ(r.deletions + r.insertions, 0u);
  EXPECT_EQ(r.error_rate, 1.0);
}

TEST(SegmentMetrics, EmptyBothSidesIsFlagged) {
  const auto r = segment_metrics({activity(3, 1, {})}, {activity(3, 1, {})});
  EXPECT_TRUE(r.f1_undefined);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_TRUE(r.error_rate_undefined);
}

TEST(SegmentMetrics, ShapeMismatchThrows) {
  EXPECT_THROW(segment_metrics({activity(3, 1, {})}, {activity(4, 1, {})}), InvalidArgument);
  EXPECT_THROW(segment_metrics({activity(3, 1, {})}, {}), InvalidArgument);
}

TEST(EventMetrics, ExactOnsetIsTruePositive) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}}}};
  const EventsByClip pred{{"c", {{"A", 1.0, 1.5}}}};  // offsets ignored
  const auto r = event_metrics(ref, pred);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.f1, 100.0);
  EXPECT_EQ(r.error_rate, 0.0);
}

TEST(EventMetrics, OffsetBeyondCollarIsMiss) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}}}};
  const EventsByClip pred{{"c", {{"A", 1.3, 2.0}}}};
  const auto r = event_metrics(ref, pred, {0.25});
  EXPECT_EQ(r.tp, 0u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.error_rate, 2.0);
}

TEST(EventMetrics, OneToOneMaximumMatching) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}, {"A", 1.3, 2.0}}}};
  const EventsByClip pred{{"c", {{"A", 1.2, 2.0}}}};
  const auto r = event_metrics(ref, pred);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.fp, 0u);
  EXPECT_NEAR(r.f1, 200.0 / 3.0, 1e-12);
  EXPECT_EQ(r.error_rate, 0.5);
}

TEST(EventMetrics, ClassesNeverCrossMatch) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}}}};
  const EventsByClip pred{{"c", {{"B", 1.0, 2.0}}}};
  const auto r = event_metrics(ref, pred);
  EXPECT_EQ(r.tp, 0u);
  EXPECT_EQ(r.error_rate, 2.0);
  const auto with_s = event_metrics(ref, pred, {0.25, true});
  EXPECT_EQ(with_s.substitutions, 1u);
  EXPECT_EQ(with_s.error_rate, 1.0);
  EXPECT_EQ(with_s.f1, r.f1);
}

TEST(EventMetrics, ClipsMatchOnlyWithinThemselves) {
  const EventsByClip ref{{"x", {{"A", 1.0, 2.0}}}, {"y", {}}};
  const EventsByClip pred{{"x", {}}, {"y", {{"A", 1.0, 2.0}}}};
  const auto r = event_metrics(ref, pred);
  EXPECT_EQ(r.tp, 0u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
}

TEST(EventMetrics, UnknownPredictionClipCountsAsFalsePositives) {
  const EventsByClip ref{{"x", {{"A", 1.0, 2.0}}}};
  const EventsByClip pred{{"x", {{"A", 1.0, 2.0}}}, {"ghost", {{"A", 3.0, 4.0}, {"B", 0.0, 1.0}}}};
  const auto r = event_metrics(ref, pred);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fp, 2u);
}

TEST(EventMetrics, CollarBoundaryIsInclusive) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}}}};
  const EventsByClip pred{{"c", {{"A", 1.25, 2.0}}}};
  EXPECT_EQ(event_metrics(ref, pred, {0.25}).tp, 1u);
  EXPECT_THROW(event_metrics(ref, pred, {-0.1}), InvalidArgument);
}

TEST(EventMetrics, PerfectPredictionFixedPoint) {
  std::mt19937_64 gen(5);
  const auto ref = random_events(gen, 10, 6);
  const auto r = event_metrics(ref, ref);
  EXPECT_EQ(r.f1, 100.0);
  EXPECT_EQ(r.error_rate, 0.0);
}

TEST(EventMetrics, SwappingSidesSwapsErrors) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_events(gen, 4, 6);
    const auto b = random_events(gen, 4, 6);
    const auto ab = event_metrics(a, b);
    const auto ba = event_metrics(b, a);
    EXPECT_EQ(ab.tp, ba.tp);
    EXPECT_EQ(ab.fp, ba.fn);
    EXPECT_EQ(ab.fn, ba.fp);
    EXPECT_EQ(ab.f1, ba.f1);
  }
}

TEST(EventMetrics, WiderCollarNeverLosesMatches) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_events(gen, 3, 6);
    const auto b = random_events(gen, 3, 6);
    std::size_t last = 0;
    for (double collar : {0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 3.0}) {
      const std::size_t tp = event_metrics(a, b, {collar}).tp;
      EXPECT_GE(tp, last);
      last = tp;
    }
  }
}

TEST(EventMatching, GreedyEqualsExhaustiveMaximum) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> onset(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> ref(gen() % 7), pred(gen() % 7);
    for (auto& v : ref) v = onset(gen);
    for (auto& v : pred) v = onset(gen);
    std::sort(ref.begin(), ref.end());
    std::sort(pred.begin(), pred.end());
    EXPECT_EQ(match_onsets(ref, pred, 0.25), oracle::exhaustive_onset_matching(ref, pred, 0.25)) << trial;
  }
}

TEST(EventMetrics, MicroAveragingDiffersFromPerClipAveraging) {
  // clip x: 1 TP; clip y: 0 TP, 3 FN, 0 FP
  const EventsByClip ref{{"x", {{"A", 1.0, 2.0}}}, {"y", {{"A", 1.0, 2.0}, {"A", 3.0, 4.0}, {"A", 5.0, 6.0}}}};
  const EventsByClip pred{{"x", {{"A", 1.0, 2.0}}}, {"y", {}}};
  const auto micro = event_metrics(ref, pred);
  EXPECT_NEAR(micro.f1, 100.0 * 2.0 / 5.0, 1e-12);
  double per_clip = 0.0;
  for (const auto& clip : {"x", "y"}) {
    per_clip += event_metrics({{clip, ref.at(clip)}}, {{clip, pred.at(clip)}}).f1 / 2.0;
  }
  EXPECT_NEAR(per_clip, 50.0, 1e-12);
  EXPECT_GT(std::abs(per_clip - micro.f1), 1.0);
  // summed counts reproduce the micro value
  EXPECT_EQ(f1_score(micro.tp, micro.fp, micro.fn).percent, micro.f1);
}

TEST(ClasswiseEventF, SingleClassEqualsOverall) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}, {"A", 4.0, 5.0}}}};
  const EventsByClip pred{{"c", {{"A", 1.1, 2.0}, {"A", 7.0, 8.0}}}};
  const auto cw = classwise_event_f(ref, pred, {"A"});
  ASSERT_EQ(cw.size(), 1u);
  EXPECT_EQ(cw[0].f1.percent, event_metrics(ref, pred).f1);
}

TEST(ClasswiseEventF, EmptyClassIsFlagged) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}}}};
  const auto cw = classwise_event_f(ref, ref, {"A", "B"});
  ASSERT_EQ(cw.size(), 2u);
  EXPECT_EQ(cw[1].label, "B");
  EXPECT_TRUE(cw[1].f1.undefined);
  EXPECT_EQ(cw[1].f1.percent, 0.0);
}

TEST(ClasswiseEventF, UnknownPredictedClassIsFalsePositive) {
  const EventsByClip ref{{"c", {{"A", 1.0, 2.0}}}};
  const EventsByClip pred{{"c", {{"A", 1.0, 2.0}, {"Z", 1.0, 2.0}}}};
  const auto cw = classwise_event_f(ref, pred, {"A"});
  ASSERT_EQ(cw.size(), 2u);
  EXPECT_EQ(cw[1].label, "Z");
  EXPECT_EQ(cw[1].counts.fp, 1u);
  EXPECT_EQ(cw[1].f1.percent, 0.0);
}

TEST(ClasswiseEventF, MatchesFilterAndRecompute) {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ref = random_events(gen, 5, 6);
    const auto pred = random_events(gen, 5, 6);
    for (const auto& c : classwise_event_f(ref, pred, kAB)) {
      const auto direct = event_metrics(filter_label(ref, c.label), filter_label(pred, c.label));
      EXPECT_EQ(c.f1.percent, direct.f1);
      EXPECT_EQ(c.counts.tp, direct.tp);
    }
  }
}

TEST(AnnotationCsv, RoundTripIncludingEmptyClips) {
  const EventsByClip events{{"a", {{"dog_bark", 0.1, 0.30000000000000004}, {"siren", 2.0, 9.98}}}, {"b", {}}};
  std::stringstream buf;
  write_annotations_csv(events, buf);
  EXPECT_EQ(read_annotations_csv(buf), events);
}

TEST(AnnotationCsv, MalformedLineReportsLineNumber) {
  std::stringstream buf("clip_id,label,onset,offset\nx,A,1.0,2.0\nx,A,oops,2.0\n");
  try {
    read_annotations_csv(buf, "pred.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("pred.csv line 3"), std::string::npos) << e.what();
  }
  std::stringstream short_row("x,A,1.0\n");
  EXPECT_THROW(read_annotations_csv(short_row), DataError);
  std::stringstream reversed("x,A,2.0,1.0\n");
  EXPECT_THROW(read_annotations_csv(reversed), DataError);
}

TEST(Report, JsonAndTextCarryCounts) {
  const auto r = segment_metrics({activity(3, 1, {{0, 0}, {1, 0}})}, {activity(3, 1, {{1, 0}, {2, 0}})});
  const auto j = to_json(r);
  EXPECT_EQ(j["f1"], 50.0);
  EXPECT_EQ(j["error_rate"], 1.0);
  EXPECT_EQ(j["per_class"]["A"]["tp"], 1);
  std::ostringstream text;
  write_report_text(r, "segment", text);
  EXPECT_NE(text.str().find("F1 50.00 %"), std::string::npos) << text.str();
}
