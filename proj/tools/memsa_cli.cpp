// memsa: dataset generation, training, experiments, scoring, heatmaps and benchmarks.
// Exit codes: 0 ok, 1 usage, 2 data, 3 numeric. MEMSA_LOG_LEVEL sets log verbosity.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "memsa/memsa.hpp"

namespace fs = std::filesystem;
using namespace memsa;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("memsa");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("MEMSA_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("MEMSA_LOG_LEVEL='{}' is not a level (trace, debug, info, warn, error, critical, off)", env);
    else
      spdlog::set_level(level);
  }
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

/// --variant wins; --width N means SelfAttn_N, --heads p means MultiHead_p_2_5.
std::optional<std::string> variant_from_flags(const std::string& variant, std::optional<std::size_t> width,
                                              std::optional<std::size_t> heads) {
  const int given = !variant.empty() + width.has_value() + heads.has_value();
  if (given > 1) throw InvalidArgument("use only one of --variant, --width and --heads");
  if (!variant.empty()) return variant;
  if (width) return "SelfAttn_" + std::to_string(*width);
  if (heads) return "MultiHead_" + std::to_string(*heads) + "_2_5";
  return std::nullopt;
}

void write_report_files(const MetricsReport& seg, const MetricsReport& ev, const fs::path& dir) {
  nlohmann::ordered_json j{{"segment", to_json(seg)}, {"event", to_json(ev)}};
  write_file_bytes(dir / "test_report.json", j.dump(2) + "\n");
  std::ostringstream txt;
  write_report_text(seg, "segment-based (test)", txt);
  write_report_text(ev, "event-based (test)", txt);
  write_file_bytes(dir / "test_report.txt", txt.str());
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"memory-controlled self-attention for sound event detection"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "synthesize a soundscape dataset");
  std::string gen_out, gen_config, gen_profile;
  std::uint64_t gen_seed = 1;
  std::size_t n_train = 300, n_val = 100, n_test = 100;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--config", gen_config, "dataset config JSON");
  gen->add_option("--profile", gen_profile, "event durations: short, long or mixed");
  gen->add_option("--train", n_train, "training clips");
  gen->add_option("--val", n_val, "validation clips");
  gen->add_option("--test", n_test, "test clips");

  // train
  auto* tr = app.add_subcommand("train", "train one variant on a saved dataset");
  std::string tr_data, tr_out, tr_config, tr_variant;
  std::uint64_t tr_seed = 1;
  std::optional<std::size_t> tr_epochs, tr_width, tr_heads;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--config", tr_config, "model config JSON");
  tr->add_option("--variant", tr_variant, "Baseline, SelfAttn, SelfAttn_<L>, MultiHead, MultiHead_<p>_<first>_<step>");
  tr->add_option("--width", tr_width, "shorthand for SelfAttn_<L>");
  tr->add_option("--heads", tr_heads, "shorthand for MultiHead_<p>_2_5");
  tr->add_option("--epochs", tr_epochs, "training epochs");
  tr->add_option("--seed", tr_seed, "initialization and shuffle seed");

  // experiment
  auto* ex = app.add_subcommand("experiment", "run an ablation from a spec file");
  std::string ex_config, ex_out;
  std::optional<std::uint64_t> ex_seed;
  std::optional<std::size_t> ex_epochs;
  std::vector<std::string> ex_variants;
  ex->add_option("--config", ex_config, "experiment spec JSON")->required();
  ex->add_option("--out", ex_out, "output directory (overrides the spec)");
  ex->add_option("--seed", ex_seed, "seed (overrides the spec)");
  ex->add_option("--epochs", ex_epochs, "epochs (overrides the spec)");
  ex->add_option("--variant", ex_variants, "variants (override the spec; repeatable)");

  // score
  auto* sc = app.add_subcommand("score", "score prediction CSV against reference CSV");
  std::string sc_ref, sc_pred, sc_mode = "segment", sc_out;
  double sc_collar = 0.25, sc_seglen = 1.0, sc_duration = 10.0;
  sc->add_option("--ref", sc_ref, "reference annotations")->required();
  sc->add_option("--pred", sc_pred, "predicted annotations")->required();
  sc->add_option("--mode", sc_mode, "segment or event")->check(CLI::IsMember({"segment", "event"}));
  sc->add_option("--collar", sc_collar, "event onset collar, seconds");
  sc->add_option("--segment-length", sc_seglen, "segment length, seconds");
  sc->add_option("--duration", sc_duration, "clip duration, seconds (segment mode)");
  sc->add_option("--out", sc_out, "also write the JSON report here");

  // heatmap
  auto* hm = app.add_subcommand("heatmap", "export attention weights for one clip");
  std::string hm_checkpoint, hm_data, hm_clip, hm_out;
  hm->add_option("--checkpoint", hm_checkpoint, "model checkpoint JSON")->required();
  hm->add_option("--data", hm_data, "dataset directory")->required();
  hm->add_option("--clip", hm_clip, "clip id (default: first test clip)");
  hm->add_option("--out", hm_out, "output directory")->required();

  // bench
  auto* bn = app.add_subcommand("bench", "time global vs banded attention");
  std::vector<std::size_t> bn_frames{1024, 2048, 4096}, bn_widths{50};
  std::size_t bn_hidden = 32, bn_reps = 5;
  double bn_min_seconds = 0.0;
  std::string bn_kind = "additive", bn_out;
  std::uint64_t bn_seed = 1;
  bn->add_option("--frames", bn_frames, "sequence lengths");
  bn->add_option("--width", bn_widths, "attention widths");
  bn->add_option("--hidden", bn_hidden, "hidden dimension");
  bn->add_option("--kind", bn_kind, "score: additive, general, dot, scaled_dot");
  bn->add_option("--reps", bn_reps, "repetitions per cell");
  bn->add_option("--min-seconds", bn_min_seconds, "keep repeating fast cells until this much time is measured");
  bn->add_option("--seed", bn_seed, "input seed");
  bn->add_option("--out", bn_out, "write bench.csv and bench.txt here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen) {
      SoundscapeConfig cfg;
      if (!gen_config.empty()) cfg = soundscape_config_from_json(read_json(gen_config));
      if (!gen_profile.empty()) cfg = duration_skew_profile(cfg, parse_duration_profile(gen_profile));
      if (gen_config.empty() || !read_json(gen_config).contains("seed")) cfg.seed = RngSeed{gen_seed};
      const auto ds = generate_dataset(cfg, n_train, n_val, n_test, RngSeed{gen_seed});
      save_dataset(ds, gen_out);
      std::cout << "wrote " << ds.train.size() << "/" << ds.validation.size() << "/" << ds.test.size()
                << " clips to " << gen_out << '\n';
    } else if (*tr) {
      const auto ds = load_dataset(tr_data);
      ModelConfig mc;
      if (!tr_config.empty()) mc = model_config_from_json(read_json(tr_config));
      if (const auto v = variant_from_flags(tr_variant, tr_width, tr_heads)) mc.variant = parse_variant(*v);
      if (tr_epochs) mc.epochs = *tr_epochs;
      mc.input_dim = ds.config.feature_dim;
      mc.classes = ds.config.classes;
      mc.seed = RngSeed{tr_seed};
      TrainOptions opt;
      opt.eval.frame_rate = ds.config.frame_rate;
      opt.eval.clip_duration = ds.config.duration;
      opt.eval.classes = ds.class_names();
      spdlog::info("training {} for {} epochs on {} clips", mc.variant.name(), mc.epochs, ds.train.size());
      const auto result = train(SedModel::create(mc), ds.train, ds.validation, opt);
      const auto ev = evaluate(result.model, ds.test, opt.eval);
      fs::create_directories(tr_out);
      save_checkpoint(result.model, fs::path(tr_out) / "checkpoint.json");
      std::ostringstream hist;
      write_history_csv(result.history, hist);
      write_file_bytes(fs::path(tr_out) / "history.csv", hist.str());
      write_report_files(ev.segment, ev.event, tr_out);
      std::cout << mc.variant.name() << " best epoch " << result.best_epoch << ": segment F1 "
                << format_fixed(ev.segment.f1, 2) << " ER " << format_fixed(ev.segment.error_rate, 2) << ", event F1 "
                << format_fixed(ev.event.f1, 2) << " ER " << format_fixed(ev.event.error_rate, 2) << '\n';
    } else if (*ex) {
      ExperimentSpec spec = load_experiment_spec(ex_config);
      if (!ex_out.empty()) spec.out = ex_out;
      if (ex_seed) {
        const bool follow = spec.dataset.config.seed == spec.seed;
        spec.seed = RngSeed{*ex_seed};
        if (follow) spec.dataset.config.seed = spec.seed;
      }
      if (ex_epochs) spec.model.epochs = *ex_epochs;
      if (!ex_variants.empty()) spec.variants = ex_variants;
      if (spec.out.empty()) throw InvalidArgument("experiment: no output directory (set \"out\" or pass --out)");
      const auto run = run_experiment(spec);
      write_result_text(run.table, std::cout);
      bool any_failed = false;
      for (const auto& r : run.table.rows) any_failed = any_failed || r.failed;
      if (any_failed) spdlog::warn("some variants diverged; see {}", (spec.out / "results.json").string());
    } else if (*sc) {
      ScoringOptions opt;
      opt.mode = parse_score_mode(sc_mode);
      opt.collar = sc_collar;
      opt.segment_length = sc_seglen;
      opt.duration = sc_duration;
      const auto out = score_files(sc_ref, sc_pred, opt);
      const auto j = to_json(out.report);
      std::cout << j.dump(2) << '\n';
      write_report_text(out.report, sc_mode + "-based", std::cout);
      if (!sc_out.empty()) write_file_bytes(sc_out, j.dump(2) + "\n");
    } else if (*hm) {
      const SedModel model = load_checkpoint(hm_checkpoint);
      const auto ds = load_dataset(hm_data);
      const SoundscapeClip* clip = nullptr;
      for (const auto* split : {&ds.test, &ds.validation, &ds.train})
        for (const auto& c : *split)
          if (!clip && (hm_clip.empty() || c.id == hm_clip)) clip = &c;
      if (!clip) throw DataError("heatmap: no clip '" + hm_clip + "' in " + hm_data);
      HeatmapOptions opt;
      opt.frame_rate = ds.config.frame_rate;
      for (const auto& f : export_attention_heatmap(model, *clip, hm_out, opt)) std::cout << f.string() << '\n';
    } else if (*bn) {
      BenchConfig cfg;
      cfg.frames = bn_frames;
      cfg.widths = bn_widths;
      cfg.hidden_dim = bn_hidden;
      cfg.kind = parse_score_kind(bn_kind);
      cfg.repetitions = bn_reps;
      cfg.min_seconds = bn_min_seconds;
      cfg.seed = RngSeed{bn_seed};
      const auto report = bench_attention(cfg);
      write_bench_text(report, std::cout);
      if (!bn_out.empty()) {
        fs::create_directories(bn_out);
        std::ostringstream csv, txt;
        write_bench_csv(report, csv);
        write_bench_text(report, txt);
        write_file_bytes(fs::path(bn_out) / "bench.csv", csv.str());
        write_file_bytes(fs::path(bn_out) / "bench.txt", txt.str());
      }
    }
  } catch (const NumericError& e) {
    spdlog::error("{}", e.what());
    return kNumeric;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kData;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const UnsupportedVariant& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  }
  return kOk;
}
