#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "memsa/memsa.hpp"

using namespace memsa;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("memsa_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) { return read_file_bytes(p); }

EventsByClip parse_csv(const std::string& text) {
  std::istringstream in(text);
  return read_annotations_csv(in, "test.csv");
}

/// Ten 4 s clips; small enough that two epochs take well under a second per variant.
ExperimentSpec tiny_spec(std::vector<std::string> variants) {
  ExperimentSpec s;
  s.seed = RngSeed{5};
  s.dataset.config.duration = 4.0;
  s.dataset.config.feature_dim = 8;
  s.dataset.config.classes = 3;
  s.dataset.config.min_event_duration = 0.5;
  s.dataset.config.max_event_duration = 2.0;
  s.dataset.config.max_events = 3;
  s.dataset.config.seed = s.seed;
  s.dataset.train = 6;
  s.dataset.validation = 2;
  s.dataset.test = 2;
  s.variants = std::move(variants);
  s.model.hidden_dim = 6;
  s.model.epochs = 2;
  return s;
}

SedModel small_model(const std::string& variant, std::size_t features = 4) {
  ModelConfig mc;
  mc.input_dim = features;
  mc.hidden_dim = 5;
  mc.classes = 2;
  mc.variant = parse_variant(variant);
  mc.seed = RngSeed{9};
  mc.init_std = 0.5;
  return SedModel::create(mc);
}

SoundscapeClip random_clip(std::size_t frames, std::size_t features = 4) {
  return {"c", init_normal(frames, features, RngSeed{3}, 0.0, 1.0), {}};
}

std::vector<std::vector<std::optional<double>>> read_csv_cells(const fs::path& p) {
  std::ifstream in(p);
  return read_weights_csv(in);
}

}  // namespace

// ---- experiment spec ----

TEST(ExperimentSpec, DefaultsToSevenVariants) {
  const auto s = experiment_spec_from_json(nlohmann::json::object());
  EXPECT_EQ(s.variants, default_variants());
  EXPECT_EQ(s.variants.size(), 7u);
  EXPECT_EQ(s.dataset.train, 300u);
  EXPECT_EQ(s.dataset.validation, 100u);
  EXPECT_EQ(s.dataset.test, 100u);
  EXPECT_EQ(s.model.epochs, 30u);
  EXPECT_EQ(s.model.hidden_dim, 32u);
  EXPECT_EQ(s.training.selection, SelectionMetric::EventF1);
  EXPECT_EQ(s.training.eval.collar, 0.25);
  EXPECT_EQ(s.training.eval.segment_length, 1.0);
}

TEST(ExperimentSpec, ParsesEverySection) {
  const auto j = nlohmann::json::parse(R"({
    "seed": 11, "out": "runs/x", "variants": ["Baseline", "SelfAttn_50"],
    "dataset": {"generate": {"profile": "short", "classes": 4}, "train": 9, "val": 3, "test": 3},
    "model": {"epochs": 4, "hidden_dim": 8, "score": "general"},
    "training": {"batch_size": 2, "shuffle": false, "selection": "segment_f1"},
    "metrics": {"collar": 0.2, "segment_length": 0.5}})");
  const auto s = experiment_spec_from_json(j);
  EXPECT_EQ(s.seed.value, 11u);
  EXPECT_EQ(s.out, fs::path("runs/x"));
  EXPECT_EQ(s.dataset.config.max_event_duration, 1.0);
  EXPECT_EQ(s.dataset.config.classes, 4u);
  EXPECT_EQ(s.dataset.config.seed.value, 11u);
  EXPECT_EQ(s.dataset.train, 9u);
  EXPECT_EQ(s.model.epochs, 4u);
  EXPECT_EQ(s.model.score, ScoreKind::General);
  EXPECT_EQ(s.training.batch_size, 2u);
  EXPECT_FALSE(s.training.shuffle);
  EXPECT_EQ(s.training.selection, SelectionMetric::SegmentF1);
  EXPECT_EQ(s.training.eval.collar, 0.2);
  EXPECT_EQ(s.training.eval.segment_length, 0.5);
  // canonical form round-trips
  const auto again = experiment_spec_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(to_json(again).dump(), to_json(s).dump());
}

TEST(ExperimentSpec, RejectsBadInput) {
  EXPECT_THROW(experiment_spec_from_json(nlohmann::json::parse(R"({"epochs": 3})")), DataError);
  EXPECT_THROW(experiment_spec_from_json(nlohmann::json::parse(R"({"model": {"variant": "SelfAttn"}})")), DataError);
  EXPECT_THROW(experiment_spec_from_json(nlohmann::json::parse(R"({"training": {"selection": "loss"}})")), DataError);
  EXPECT_THROW(experiment_spec_from_json(nlohmann::json::parse(R"({"seed": "one"})")), DataError);
  ExperimentSpec s;
  s.variants.clear();
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.variants = {"SelfAttn_x"};
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.variants = {"Baseline"};
  s.dataset.path = fs::temp_directory_path() / "memsa_no_such_dataset";
  EXPECT_THROW(s.validate(), DataError);
}

// ---- run_experiment ----

TEST(Experiment, BaselineSmokeRunFillsAllFourCells) {
  auto spec = tiny_spec({"Baseline"});
  spec.out = scratch("smoke");
  const auto run = run_experiment(spec);
  ASSERT_EQ(run.table.rows.size(), 1u);
  const auto& row = run.table.rows[0];
  EXPECT_FALSE(row.failed);
  EXPECT_EQ(row.history.size(), 2u);
  for (double v : {row.segment.f1, row.event.f1, row.segment.error_rate, row.event.error_rate}) EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(row.segment.reference_count, 0u);
  EXPECT_GT(row.event.reference_count, 0u);
  const auto j = nlohmann::json::parse(slurp(spec.out / "results.json"));
  const auto& r = j.at("rows").at(0);
  for (const char* key : {"segment_f1", "event_f1", "segment_er", "event_er"}) EXPECT_TRUE(r.at(key).is_number()) << key;
  EXPECT_FALSE(j.dump().find("seconds") != std::string::npos);
  for (const char* f : {"results.txt", "results.csv", "classwise.csv", "timing.json", "spec.json",
                        "history/Baseline.csv", "checkpoints/Baseline.json", "predictions/Baseline.csv"})
    EXPECT_TRUE(fs::exists(spec.out / f)) << f;
  // the saved checkpoint is the model that produced the table
  const SedModel reloaded = load_checkpoint(spec.out / "checkpoints" / "Baseline.json");
  EXPECT_TRUE(reloaded.params == run.models[0].params);
}

TEST(Experiment, TextTableHasExactlyTheFourResultColumns) {
  ResultTable t;
  VariantOutcome ok;
  ok.variant = "SelfAttn_50";
  ok.segment.f1 = 50.0;
  ok.event.f1 = 12.345;
  ok.segment.error_rate = 0.75;
  ok.event.error_rate = 1.5;
  VariantOutcome bad;
  bad.variant = "SelfAttn";
  bad.failed = true;
  t.rows = {ok, bad};
  std::ostringstream out;
  write_result_text(t, out);
  std::istringstream lines(out.str());
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  std::istringstream words(header);
  std::vector<std::string> cols{std::istream_iterator<std::string>(words), {}};
  EXPECT_EQ(cols, (std::vector<std::string>{"Variant", "F1", "segment", "F1", "event", "ER", "segment", "ER", "event"}));
  EXPECT_NE(first.find("50.00"), std::string::npos);
  EXPECT_NE(first.find("12.35"), std::string::npos);
  EXPECT_NE(second.find("failed"), std::string::npos);
  std::ostringstream csv;
  write_result_csv(t, csv);
  EXPECT_EQ(csv.str(), "variant,status,segment_f1,event_f1,segment_er,event_er\nSelfAttn_50,ok,50,12.345,0.75,1.5\n"
                       "SelfAttn,failed,,,,\n");
}

TEST(Experiment, RerunGivesByteIdenticalTable) {
  auto a = tiny_spec({"Baseline", "SelfAttn_10", "MultiHead_2_2_5"});
  auto b = a;
  a.out = scratch("rerun_a");
  b.out = scratch("rerun_b");
  run_experiment(a);
  run_experiment(b);
  EXPECT_EQ(slurp(a.out / "results.json"), slurp(b.out / "results.json"));
  EXPECT_EQ(slurp(a.out / "results.csv"), slurp(b.out / "results.csv"));
  EXPECT_EQ(slurp(a.out / "history" / "SelfAttn_10.csv"), slurp(b.out / "history" / "SelfAttn_10.csv"));
  auto c = a;
  c.seed = RngSeed{6};
  c.dataset.config.seed = c.seed;
  c.out = scratch("rerun_c");
  run_experiment(c);
  EXPECT_NE(slurp(a.out / "results.json"), slurp(c.out / "results.json"));
}

TEST(Experiment, VariantsShareNonAttentionInitialization) {
  const auto spec = tiny_spec({"Baseline", "SelfAttn", "SelfAttn_2", "MultiHead_3_2_5"});
  const auto ds = resolve_dataset(spec);
  auto one_epoch = spec;
  one_epoch.model.epochs = 1;
  const auto run = run_experiment(one_epoch, ds);
  ASSERT_EQ(run.table.rows.size(), 4u);
  for (const auto& r : run.table.rows) EXPECT_EQ(r.init_checksum, run.table.rows[0].init_checksum) << r.variant;
  // and the checksum does see those weights
  ModelConfig mc;
  mc.input_dim = 8;
  mc.hidden_dim = 6;
  mc.classes = 3;
  mc.seed = RngSeed{5};
  const auto m5 = SedModel::create(mc);
  mc.seed = RngSeed{6};
  EXPECT_NE(shared_parameter_checksum(m5.params), shared_parameter_checksum(SedModel::create(mc).params));
  EXPECT_EQ(shared_parameter_checksum(m5.params), run.table.rows[0].init_checksum);
}

TEST(Experiment, DivergentVariantIsMarkedFailedAndRunContinues) {
  const auto spec = tiny_spec({"SelfAttn_10", "Baseline"});
  auto ds = resolve_dataset(spec);
  ds.train[2].features(7, 1) = std::numeric_limits<double>::quiet_NaN();
  auto out_spec = spec;
  out_spec.out = scratch("failed");
  const auto run = run_experiment(out_spec, ds);
  ASSERT_EQ(run.table.rows.size(), 2u);
  for (const auto& r : run.table.rows) {
    EXPECT_TRUE(r.failed) << r.variant;
    EXPECT_NE(r.failure.find("non-finite"), std::string::npos);
    EXPECT_NE(r.failure.find(r.variant), std::string::npos);
  }
  const auto j = nlohmann::json::parse(slurp(out_spec.out / "results.json"));
  EXPECT_EQ(j["rows"][0]["status"], "failed");
  EXPECT_EQ(j["rows"][1]["status"], "failed");
  EXPECT_NE(slurp(out_spec.out / "results.txt").find("failed"), std::string::npos);
}

TEST(Experiment, LoadsDatasetFromDisk) {
  auto spec = tiny_spec({"Baseline"});
  const fs::path data = scratch("dataset");
  save_dataset(resolve_dataset(spec), data);
  auto from_disk = spec;
  from_disk.dataset.path = data;
  const auto a = run_experiment(spec);
  const auto b = run_experiment(from_disk);
  EXPECT_EQ(a.table.dataset_checksum, b.table.dataset_checksum);
  EXPECT_EQ(to_json(a.table)["rows"].dump(), to_json(b.table)["rows"].dump());
}

TEST(Experiment, ClasswiseTableCoversEveryClass) {
  auto spec = tiny_spec({"Baseline"});
  const auto run = run_experiment(spec);
  const auto& row = run.table.rows[0];
  std::vector<std::string> labels;
  for (const auto& c : row.classwise) labels.push_back(c.label);
  EXPECT_EQ(labels, spec.dataset.config.class_names());
  ResultTable t = run.table;
  std::ostringstream out;
  write_classwise_csv(t, out);
  const std::string text = out.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 3);
}

// ---- heatmap ----

TEST(Heatmap, GlobalFourFramesIsDense) {
  const fs::path dir = scratch("heat_global");
  const auto files = export_attention_heatmap(small_model("SelfAttn"), random_clip(4), dir);
  ASSERT_EQ(files.size(), 2u);
  const auto rows = read_csv_cells(dir / "c_attention.csv");
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    ASSERT_EQ(r.size(), 4u);
    for (const auto& c : r) EXPECT_TRUE(c.has_value());
  }
}

TEST(Heatmap, NarrowBandLeavesCellsEmptyAndRowsSumToOne) {
  const fs::path dir = scratch("heat_band");
  export_attention_heatmap(small_model("SelfAttn_2"), random_clip(10), dir);
  const auto rows = read_csv_cells(dir / "c_attention.csv");
  ASSERT_EQ(rows.size(), 10u);
  for (const auto& r : rows) {
    ASSERT_EQ(r.size(), 10u);
    std::size_t populated = 0;
    double sum = 0.0;
    for (const auto& c : r)
      if (c) ++populated, sum += *c;
    EXPECT_LE(populated, 3u);
    EXPECT_GE(populated, 2u);
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Heatmap, MultiHeadWritesEveryHeadAndTheCombination) {
  const fs::path dir = scratch("heat_mh");
  const SedModel m = small_model("MultiHead_3_2_5");
  const auto files = export_attention_heatmap(m, random_clip(16), dir);
  EXPECT_EQ(files.size(), 8u);
  for (const char* stem : {"c_head1_L2", "c_head2_L7", "c_head3_L12", "c_combined"}) {
    EXPECT_TRUE(fs::exists(dir / (std::string(stem) + ".csv"))) << stem;
    EXPECT_TRUE(fs::exists(dir / (std::string(stem) + ".svg"))) << stem;
  }
  // unit head weights: each combined row sums to 1/2 + 1/7 + 1/12
  const auto rows = read_csv_cells(dir / "c_combined.csv");
  ASSERT_EQ(rows.size(), 16u);
  for (const auto& r : rows) {
    double sum = 0.0;
    for (const auto& c : r) sum += c.value();
    EXPECT_NEAR(sum, 1.0 / 2 + 1.0 / 7 + 1.0 / 12, 1e-9);
  }
}

TEST(Heatmap, BaselineIsUnsupported) {
  EXPECT_THROW(export_attention_heatmap(small_model("Baseline"), random_clip(4), scratch("heat_base")),
               UnsupportedVariant);
}

TEST(Heatmap, SvgIsSelfContainedGrayscaleWithLabelledAxes) {
  std::ostringstream out;
  const HeatmapCell cell = [](std::size_t t, std::size_t i) -> std::optional<double> {
    if (t > i + 1 || i > t + 1) return std::nullopt;
    return t == i ? 1.0 : 0.5;
  };
  write_heatmap_svg(cell, 4, "demo", out);
  const std::string svg = out.str();
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
  EXPECT_NE(svg.find("rgb(0,0,0)"), std::string::npos);        // peak
  EXPECT_NE(svg.find("rgb(128,128,128)"), std::string::npos);  // half of peak
  EXPECT_NE(svg.find("query frame"), std::string::npos);
  EXPECT_NE(svg.find("source frame"), std::string::npos);
  EXPECT_NE(svg.find("(0.06 s)"), std::string::npos);  // frame 3 at 50 fps
  // 4 diagonal + 6 off-diagonal band cells drawn, none outside
  std::size_t rects = 0;
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
  EXPECT_EQ(rects, 1u + 10u);
}

TEST(Heatmap, LongSequencesAreBlockAveraged) {
  std::ostringstream out;
  HeatmapOptions opt;
  opt.max_cells = 10;
  write_heatmap_svg([](std::size_t, std::size_t) -> std::optional<double> { return 1.0; }, 95, "big", out, opt);
  std::size_t rects = 0;
  const std::string svg = out.str();
  for (auto p = svg.find("<rect"); p != std::string::npos; p = svg.find("<rect", p + 1)) ++rects;
  EXPECT_EQ(rects, 1u + 100u);
}

// ---- bench ----

TEST(Bench, ReportsEveryCellWithPositiveTimes) {
  BenchConfig cfg;
  cfg.frames = {1, 64, 128};
  cfg.widths = {4, 50};
  cfg.hidden_dim = 8;
  cfg.repetitions = 3;
  const auto r = bench_attention(cfg);
  EXPECT_EQ(r.cells.size(), 9u);
  for (const auto& c : r.cells) {
    EXPECT_GT(c.median_seconds, 0.0);
    EXPECT_GT(c.working_set_bytes, 0u);
  }
  // T = 1: every mode stores a single weight
  EXPECT_EQ(r.find(1, std::nullopt)->working_set_bytes, r.find(1, 50)->working_set_bytes);
  // banded storage is T x (2 floor(L/2) + 1) minus the clipped corners, global T x T
  EXPECT_EQ(r.find(128, std::nullopt)->working_set_bytes, attention_working_set(128, 128 * 128, 8, ScoreKind::Additive));
  EXPECT_EQ(r.find(128, 4)->working_set_bytes, attention_working_set(128, 128 * 5 - 6, 8, ScoreKind::Additive));
  std::ostringstream csv, txt;
  write_bench_csv(r, csv);
  write_bench_text(r, txt);
  const std::string table = csv.str();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 10);
  EXPECT_EQ(table.substr(0, table.find('\n')), "frames,width,mode,median_seconds,working_set_bytes");
  EXPECT_NE(table.find("\n64,,global,"), std::string::npos);
  EXPECT_NE(txt.str().find("banded"), std::string::npos);
}

TEST(Bench, RejectsEmptySizes) {
  BenchConfig cfg;
  cfg.frames = {0};
  EXPECT_THROW(bench_attention(cfg), InvalidArgument);
  cfg.frames = {};
  EXPECT_THROW(bench_attention(cfg), InvalidArgument);
}

// ---- score ----

TEST(Score, IdenticalFilesScoreHundred) {
  const auto ref = parse_csv("clip_id,label,onset,offset\na,dog,0.5,2.0\na,car,1.0,3.5\nb,dog,4.0,6.0\n");
  for (auto mode : {ScoreMode::Segment, ScoreMode::Event}) {
    ScoringOptions opt;
    opt.mode = mode;
    const auto r = score_annotations(ref, ref, opt).report;
    EXPECT_EQ(r.f1, 100.0);
    EXPECT_EQ(r.error_rate, 0.0);
  }
}

TEST(Score, EmptyPredictionsGiveZeroF1AndUnitErrorRate) {
  const auto ref = parse_csv("clip_id,label,onset,offset\na,dog,0.5,2.0\nb,car,1.0,3.5\n");
  const auto pred = parse_csv("");
  for (auto mode : {ScoreMode::Segment, ScoreMode::Event}) {
    ScoringOptions opt;
    opt.mode = mode;
    const auto r = score_annotations(ref, pred, opt).report;
    EXPECT_EQ(r.f1, 0.0);
    EXPECT_EQ(r.error_rate, 1.0);
  }
}

TEST(Score, SegmentHandCaseFromFiles) {
  const fs::path dir = scratch("score_hand");
  write_file_bytes(dir / "ref.csv", "clip_id,label,onset,offset\nclip,A,0,2\n");
  write_file_bytes(dir / "pred.csv", "clip_id,label,onset,offset\nclip,A,1,3\n");
  ScoringOptions opt;
  opt.duration = 3.0;
  const auto r = score_files((dir / "ref.csv").string(), (dir / "pred.csv").string(), opt).report;
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.f1, 50.0);
  EXPECT_EQ(r.error_rate, 1.0);
}

TEST(Score, UnknownPredictionClipsCountAsFalsePositives) {
  const auto ref = parse_csv("clip_id,label,onset,offset\na,dog,0.5,2.0\n");
  const auto pred = parse_csv("clip_id,label,onset,offset\na,dog,0.5,2.0\nzz,dog,1.0,2.0\nzz,car,3.0,4.0\n");
  ScoringOptions opt;
  opt.mode = ScoreMode::Event;
  const auto out = score_annotations(ref, pred, opt);
  EXPECT_EQ(out.unknown_clips, std::vector<std::string>{"zz"});
  EXPECT_EQ(out.report.tp, 1u);
  EXPECT_EQ(out.report.fp, 2u);
  EXPECT_EQ(out.report.fn, 0u);
  opt.mode = ScoreMode::Segment;
  const auto seg = score_annotations(ref, pred, opt).report;
  EXPECT_EQ(seg.tp, 2u);
  EXPECT_EQ(seg.fp, 2u);
}

TEST(Score, MalformedFileReportsLineNumber) {
  const fs::path dir = scratch("score_bad");
  write_file_bytes(dir / "ref.csv", "clip_id,label,onset,offset\na,dog,0.5,2.0\na,dog,zero,2.0\n");
  write_file_bytes(dir / "pred.csv", "clip_id,label,onset,offset\n");
  try {
    score_files((dir / "ref.csv").string(), (dir / "pred.csv").string(), {});
    FAIL() << "expected a parse error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Score, SegmentDurationStretchesToLatestOffset) {
  const auto ref = parse_csv("clip_id,label,onset,offset\na,dog,11.0,12.0\n");
  ScoringOptions opt;
  const auto r = score_annotations(ref, ref, opt).report;
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.f1, 100.0);
}
