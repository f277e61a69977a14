#pragma once

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "memsa/core/error.hpp"
#include "memsa/core/format.hpp"
#include "memsa/metrics/event.hpp"
#include "memsa/metrics/report.hpp"
#include "memsa/model/checkpoint.hpp"
#include "memsa/model/trainer.hpp"
#include "memsa/synth/dataset.hpp"

namespace memsa {

inline std::vector<std::string> default_variants() {
  return {"Baseline", "SelfAttn", "SelfAttn_2", "SelfAttn_10", "SelfAttn_50", "SelfAttn_100", "MultiHead"};
}

/// Either an on-disk dataset (save_dataset layout) or a generation recipe.
struct DatasetSpec {
  std::optional<std::filesystem::path> path;
  SoundscapeConfig config;
  std::size_t train = 300, validation = 100, test = 100;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  std::vector<std::string> variants = default_variants();
  ModelConfig model;  // input_dim, classes, variant and seed are filled per run
  TrainOptions training;
  std::filesystem::path out;
  RngSeed seed{1};

  void validate() const {
    detail::require(!variants.empty(), "experiment: at least one variant is required");
    for (const auto& v : variants) parse_variant(v);
    if (dataset.path) {
      if (!std::filesystem::exists(*dataset.path / "manifest.json"))
        throw DataError("experiment: no dataset manifest under '" + dataset.path->string() + "'");
    } else {
      dataset.config.validate();
      detail::require(dataset.train >= 1 && dataset.validation >= 1 && dataset.test >= 1,
                      "experiment: every split needs at least one clip");
    }
    detail::require(training.eval.collar >= 0.0, "experiment: collar must be >= 0");
    detail::require(training.eval.segment_length > 0.0, "experiment: segment length must be positive");
  }
};

inline std::string to_string(SelectionMetric m) { return m == SelectionMetric::EventF1 ? "event_f1" : "segment_f1"; }

inline SelectionMetric parse_selection_metric(const std::string& s) {
  if (s == "event_f1") return SelectionMetric::EventF1;
  if (s == "segment_f1") return SelectionMetric::SegmentF1;
  throw DataError("unknown selection metric '" + s + "' (event_f1 or segment_f1)");
}

/// Canonical JSON form; `out` is left out so the hash does not depend on where a run is written.
inline nlohmann::ordered_json to_json(const ExperimentSpec& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed.value;
  if (s.dataset.path) {
    j["dataset"] = {{"path", s.dataset.path->generic_string()}};
  } else {
    j["dataset"] = {{"generate", to_json(s.dataset.config)},
                    {"train", s.dataset.train},
                    {"val", s.dataset.validation},
                    {"test", s.dataset.test}};
  }
  j["variants"] = s.variants;
  const ModelConfig& m = s.model;
  j["model"] = {{"hidden_dim", m.hidden_dim}, {"score", std::string(to_string(m.score))},
                {"additive_dim", m.additive_dim}, {"threshold", m.threshold}, {"epochs", m.epochs},
                {"lr", m.lr}, {"decay", m.decay}, {"init_std", m.init_std}};
  j["training"] = {{"batch_size", s.training.batch_size}, {"shuffle", s.training.shuffle},
                   {"selection", to_string(s.training.selection)}};
  j["metrics"] = {{"collar", s.training.eval.collar}, {"segment_length", s.training.eval.segment_length}};
  return j;
}

namespace detail {

template <typename F>
void for_keys(const nlohmann::json& j, const std::string& where, F&& f) {
  if (!j.is_object()) throw DataError("experiment spec: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!f(key, value)) throw DataError("experiment spec: unknown key '" + key + "' in '" + where + "'");
}

}  // namespace detail

/// Schema (every key optional):
///   {"seed": 1, "out": "runs/a",
///    "dataset": {"path": "data/"} | {"generate": {<dataset config>, "profile": "short"},
///                                   "train": 300, "val": 100, "test": 100},
///    "variants": ["Baseline", "SelfAttn_50", ...],
///    "model": {"hidden_dim", "score", "additive_dim", "threshold", "epochs", "lr", "decay", "init_std"},
///    "training": {"batch_size", "shuffle", "selection": "event_f1" | "segment_f1"},
///    "metrics": {"collar", "segment_length"}}
inline ExperimentSpec experiment_spec_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  bool dataset_seed_given = false;
  try {
    detail::for_keys(j, "spec", [&](const std::string& key, const nlohmann::json& v) {
      if (key == "seed") s.seed = RngSeed{v.get<std::uint64_t>()};
      else if (key == "out") s.out = v.get<std::string>();
      else if (key == "variants") s.variants = v.get<std::vector<std::string>>();
      else if (key == "dataset") {
        detail::for_keys(v, "dataset", [&](const std::string& k, const nlohmann::json& dv) {
          if (k == "path") s.dataset.path = std::filesystem::path(dv.get<std::string>());
          else if (k == "generate") {
            s.dataset.config = soundscape_config_from_json(dv);
            dataset_seed_given = dv.contains("seed");
          } else if (k == "train") s.dataset.train = dv.get<std::size_t>();
          else if (k == "val") s.dataset.validation = dv.get<std::size_t>();
          else if (k == "test") s.dataset.test = dv.get<std::size_t>();
          else return false;
          return true;
        });
      } else if (key == "model") {
        detail::for_keys(v, "model", [&](const std::string& k, const nlohmann::json&) {
          return k == "hidden_dim" || k == "score" || k == "additive_dim" || k == "threshold" || k == "epochs" ||
                 k == "lr" || k == "decay" || k == "init_std";
        });
        s.model = model_config_from_json(v, s.model);
      } else if (key == "training") {
        detail::for_keys(v, "training", [&](const std::string& k, const nlohmann::json& tv) {
          if (k == "batch_size") s.training.batch_size = tv.get<std::size_t>();
          else if (k == "shuffle") s.training.shuffle = tv.get<bool>();
          else if (k == "selection") s.training.selection = parse_selection_metric(tv.get<std::string>());
          else return false;
          return true;
        });
      } else if (key == "metrics") {
        detail::for_keys(v, "metrics", [&](const std::string& k, const nlohmann::json& mv) {
          if (k == "collar") s.training.eval.collar = mv.get<double>();
          else if (k == "segment_length") s.training.eval.segment_length = mv.get<double>();
          else return false;
          return true;
        });
      } else {
        return false;
      }
      return true;
    });
  } catch (const nlohmann::json::exception& e) {
    throw DataError("experiment spec: " + std::string(e.what()));
  }
  // prototypes follow the experiment seed unless the generator config pins its own
  if (!dataset_seed_given) s.dataset.config.seed = s.seed;
  return s;
}

inline ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return experiment_spec_from_json(j);
}

struct VariantOutcome {
  std::string variant;
  bool failed = false;
  std::string failure;
  MetricsReport segment, event;
  std::vector<ClassF1> classwise;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> history;
  std::string init_checksum;  // encoder, GRU and classifier weights at initialization
  double seconds = 0.0;       // timing, kept out of the JSON table
};

struct ResultTable {
  RngSeed seed{};
  std::string config_hash;
  std::string dataset_checksum;
  std::size_t train_clips = 0, validation_clips = 0, test_clips = 0;
  double clip_duration = 0.0;
  SelectionMetric selection = SelectionMetric::EventF1;
  std::vector<VariantOutcome> rows;
  double seconds = 0.0;

  const VariantOutcome* find(const std::string& variant) const {
    for (const auto& r : rows)
      if (r.variant == variant) return &r;
    return nullptr;
  }
};

/// FNV-1a over the raw bytes of every non-attention parameter, in visit order.
inline std::string shared_parameter_checksum(const ModelParams& params) {
  std::string bytes;
  params.for_each([&](std::string_view name, const Matrix& m) {
    if (name.starts_with("attention.")) return;
    bytes.append(name);
    bytes.append(reinterpret_cast<const char*>(m.data().data()), m.size() * sizeof(double));
  });
  return hex64(fnv1a64(bytes));
}

inline std::string dataset_checksum(const SoundscapeDataset& ds) {
  std::string bytes;
  for (const auto* split : {&ds.train, &ds.validation, &ds.test}) {
    for (const auto& clip : *split) {
      bytes += clip.id;
      bytes += encode_features(clip.features);
    }
    std::ostringstream csv;
    write_annotations_csv(events_by_clip(*split), csv);
    bytes += csv.str();
  }
  return hex64(fnv1a64(bytes));
}

/// Table JSON without timing fields: equal specs and seeds give identical bytes.
inline nlohmann::ordered_json to_json(const ResultTable& t) {
  nlohmann::ordered_json j;
  j["format"] = "memsa-results-1";
  j["seed"] = t.seed.value;
  j["config_hash"] = t.config_hash;
  j["dataset_checksum"] = t.dataset_checksum;
  j["clips"] = {{"train", t.train_clips}, {"val", t.validation_clips}, {"test", t.test_clips}};
  j["clip_duration"] = t.clip_duration;
  j["selection"] = to_string(t.selection);
  auto& rows = j["rows"];
  rows = nlohmann::ordered_json::array();
  for (const auto& r : t.rows) {
    nlohmann::ordered_json row;
    row["variant"] = r.variant;
    row["status"] = r.failed ? "failed" : "ok";
    row["init_checksum"] = r.init_checksum;
    if (r.failed) {
      row["error"] = r.failure;
    } else {
      row["segment_f1"] = r.segment.f1;
      row["event_f1"] = r.event.f1;
      row["segment_er"] = r.segment.error_rate;
      row["event_er"] = r.event.error_rate;
      row["best_epoch"] = r.best_epoch;
      nlohmann::ordered_json cls = nlohmann::ordered_json::object();
      for (const auto& c : r.classwise) cls[c.label] = c.f1.percent;
      row["class_event_f1"] = cls;
      row["segment"] = to_json(r.segment);
      row["event"] = to_json(r.event);
    }
    rows.push_back(std::move(row));
  }
  return j;
}

inline nlohmann::ordered_json timing_json(const ResultTable& t) {
  nlohmann::ordered_json j;
  j["total_seconds"] = t.seconds;
  for (const auto& r : t.rows) j["variants"][r.variant] = r.seconds;
  return j;
}

/// Aligned text with the four result columns.
inline void write_result_text(const ResultTable& t, std::ostream& out) {
  out << std::left << std::setw(18) << "Variant" << std::right << std::setw(12) << "F1 segment" << std::setw(10)
      << "F1 event" << std::setw(12) << "ER segment" << std::setw(10) << "ER event" << '\n';
  for (const auto& r : t.rows) {
    out << std::left << std::setw(18) << r.variant << std::right;
    if (r.failed) {
      out << std::setw(12) << "failed" << std::setw(10) << "failed" << std::setw(12) << "failed" << std::setw(10)
          << "failed" << '\n';
      continue;
    }
    out << std::setw(12) << format_fixed(r.segment.f1, 2) << std::setw(10) << format_fixed(r.event.f1, 2)
        << std::setw(12) << format_fixed(r.segment.error_rate, 2) << std::setw(10)
        << format_fixed(r.event.error_rate, 2) << '\n';
  }
}

inline void write_result_csv(const ResultTable& t, std::ostream& out) {
  out << "variant,status,segment_f1,event_f1,segment_er,event_er\n";
  for (const auto& r : t.rows) {
    out << r.variant << ',' << (r.failed ? "failed" : "ok");
    if (r.failed) {
      out << ",,,,\n";
      continue;
    }
    out << ',' << format_double(r.segment.f1) << ',' << format_double(r.event.f1) << ','
        << format_double(r.segment.error_rate) << ',' << format_double(r.event.error_rate) << '\n';
  }
}

/// Long form: variant,class,event_f1 (empty F1 cell when undefined).
inline void write_classwise_csv(const ResultTable& t, std::ostream& out) {
  out << "variant,class,event_f1,tp,fp,fn\n";
  for (const auto& r : t.rows) {
    if (r.failed) continue;
    for (const auto& c : r.classwise) {
      out << r.variant << ',' << c.label << ',' << (c.f1.undefined ? std::string() : format_double(c.f1.percent)) << ','
          << c.counts.tp << ',' << c.counts.fp << ',' << c.counts.fn << '\n';
    }
  }
}

inline void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
  out << "epoch,train_loss,val_loss,val_event_f1,val_segment_f1,val_event_er,val_segment_er\n";
  for (const auto& h : history) {
    out << h.epoch << ',' << format_double(h.train_loss) << ',' << format_double(h.val_loss) << ','
        << format_double(h.val_event_f1) << ',' << format_double(h.val_segment_f1) << ','
        << format_double(h.val_event_er) << ',' << format_double(h.val_segment_er) << '\n';
  }
}

inline SoundscapeDataset resolve_dataset(const ExperimentSpec& spec) {
  if (spec.dataset.path) return load_dataset(*spec.dataset.path);
  return generate_dataset(spec.dataset.config, spec.dataset.train, spec.dataset.validation, spec.dataset.test, spec.seed);
}

struct ExperimentRun {
  ResultTable table;
  std::vector<SedModel> models;  // best checkpoint per successful variant, in row order (failed rows skipped)
};

/// Trains every variant on one dataset from one seed and scores the best-validation
/// checkpoint on the test split. A variant whose loss diverges is marked failed.
/// When spec.out is set, writes results.{json,txt,csv}, classwise.csv, timing.json,
/// spec.json, history/<variant>.csv, checkpoints/<variant>.json and predictions/<variant>.csv.
inline ExperimentRun run_experiment(const ExperimentSpec& spec, const SoundscapeDataset& ds) {
  spec.validate();
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();

  ExperimentRun run;
  ResultTable& table = run.table;
  table.seed = spec.seed;
  table.config_hash = hex64(fnv1a64(to_json(spec).dump()));
  table.dataset_checksum = dataset_checksum(ds);
  table.train_clips = ds.train.size();
  table.validation_clips = ds.validation.size();
  table.test_clips = ds.test.size();
  table.clip_duration = ds.config.duration;
  table.selection = spec.training.selection;

  TrainOptions opt = spec.training;
  opt.eval.frame_rate = ds.config.frame_rate;
  opt.eval.clip_duration = ds.config.duration;
  opt.eval.classes = ds.class_names();

  if (!spec.out.empty()) {
    fs::create_directories(spec.out / "history");
    fs::create_directories(spec.out / "checkpoints");
    fs::create_directories(spec.out / "predictions");
    write_file_bytes(spec.out / "spec.json", to_json(spec).dump(2) + "\n");
  }

  std::optional<std::string> shared;
  for (const auto& name : spec.variants) {
    ModelConfig mc = spec.model;
    mc.input_dim = ds.config.feature_dim;
    mc.classes = ds.config.classes;
    mc.variant = parse_variant(name);
    mc.seed = spec.seed;
    const SedModel initial = SedModel::create(mc);

    VariantOutcome row;
    row.variant = name;
    row.init_checksum = shared_parameter_checksum(initial.params);
    if (!shared) shared = row.init_checksum;
    if (*shared != row.init_checksum)
      throw InvalidArgument("experiment: " + name + " does not share the non-attention initialization");

    spdlog::info("training {} ({} epochs, {} clips)", name, mc.epochs, ds.train.size());
    const auto t0 = std::chrono::steady_clock::now();
    try {
      TrainResult tr = train(initial, ds.train, ds.validation, opt);
      const Evaluation ev = evaluate(tr.model, ds.test, opt.eval);
      row.segment = ev.segment;
      row.event = ev.event;
      row.classwise = classwise_event_f(events_by_clip(ds.test), ev.predictions, opt.eval.classes, opt.eval.collar);
      row.best_epoch = tr.best_epoch;
      row.history = tr.history;
      if (!spec.out.empty()) {
        save_checkpoint(tr.model, spec.out / "checkpoints" / (name + ".json"));
        std::ostringstream pred;
        write_annotations_csv(ev.predictions, pred);
        write_file_bytes(spec.out / "predictions" / (name + ".csv"), pred.str());
      }
      run.models.push_back(std::move(tr.model));
      spdlog::info("{}: event F1 {:.2f} segment F1 {:.2f} (best epoch {})", name, row.event.f1, row.segment.f1,
                   row.best_epoch);
    } catch (const NumericError& e) {
      row.failed = true;
      row.failure = e.what();
      spdlog::error("{} failed: {}", name, e.what());
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!spec.out.empty()) {
      std::ostringstream hist;
      write_history_csv(row.history, hist);
      write_file_bytes(spec.out / "history" / (name + ".csv"), hist.str());
    }
    table.rows.push_back(std::move(row));
  }
  table.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (!spec.out.empty()) {
    write_file_bytes(spec.out / "results.json", to_json(table).dump(2) + "\n");
    write_file_bytes(spec.out / "timing.json", timing_json(table).dump(2) + "\n");
    std::ostringstream txt, csv, cls;
    write_result_text(table, txt);
    write_result_csv(table, csv);
    write_classwise_csv(table, cls);
    write_file_bytes(spec.out / "results.txt", txt.str());
    write_file_bytes(spec.out / "results.csv", csv.str());
    write_file_bytes(spec.out / "classwise.csv", cls.str());
  }
  return run;
}

inline ExperimentRun run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return run_experiment(spec, resolve_dataset(spec));
}

}  // namespace memsa
