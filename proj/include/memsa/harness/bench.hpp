#pragma once

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "memsa/attention/self_attention.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/format.hpp"
#include "memsa/core/random.hpp"
#include "memsa/metrics/report.hpp"

namespace memsa {

struct BenchConfig {
  std::vector<std::size_t> frames{1024, 2048, 4096};
  std::vector<std::size_t> widths{50};
  std::size_t hidden_dim = 32;
  ScoreKind kind = ScoreKind::Additive;
  std::size_t repetitions = 5;
  double min_seconds = 0.0;  // fast cells keep repeating until this much time is measured
  bool global = true;  // also time global attention at each T
  RngSeed seed{1};

  void validate() const {
    detail::require(!frames.empty(), "bench: need at least one sequence length");
    for (auto t : frames) detail::require(t >= 1, "bench: sequence lengths must be >= 1");
    for (auto w : widths) detail::require(w >= 1, "bench: widths must be >= 1");
    detail::require(hidden_dim >= 1 && repetitions >= 1, "bench: hidden dim and repetitions must be >= 1");
  }
};

struct BenchCell {
  std::size_t frames = 0;
  std::optional<std::size_t> width;  // absent: global
  double median_seconds = 0.0;
  std::size_t working_set_bytes = 0;

  std::string mode() const { return width ? "banded" : "global"; }
};

struct BenchReport {
  BenchConfig config;
  std::vector<BenchCell> cells;

  const BenchCell* find(std::size_t frames, std::optional<std::size_t> width) const {
    for (const auto& c : cells)
      if (c.frames == frames && c.width == width) return &c;
    return nullptr;
  }
};

/// Bytes touched by one forward pass: the hidden sequence, output, stored weights and the
/// per-sequence score projections.
inline std::size_t attention_working_set(std::size_t frames, std::size_t stored_weights, std::size_t d, ScoreKind kind) {
  std::size_t doubles = 2 * frames * d + stored_weights;
  if (kind == ScoreKind::Additive) doubles += 2 * frames * lane_padded(d);
  if (kind == ScoreKind::General) doubles += frames * d;
  if (kind == ScoreKind::ScaledDot) doubles += frames;
  return doubles * sizeof(double);
}

/// Median wall time of the attention forward pass per (T, L) cell, after one warm-up call.
/// Each cell runs at least `repetitions` times and until `min_seconds` have been timed.
/// Repetitions go round-robin over the cells, so slow drift in machine speed hits every
/// cell alike instead of skewing the ratios between them.
inline BenchReport bench_attention(const BenchConfig& cfg) {
  cfg.validate();
  BenchReport report{cfg, {}};
  Rng rng(cfg.seed);
  const std::size_t d = cfg.hidden_dim;
  const ScoreParams params = ScoreParams::random(cfg.kind, d, d, rng, 0.3);
  struct Cell {
    std::size_t hidden = 0;  // index into inputs
    AttentionConfig config;
    std::size_t stored = 0;
    std::vector<double> times;
    double total = 0.0;
  };
  std::vector<Matrix> inputs;
  std::vector<Cell> cells;
  for (const std::size_t frames : cfg.frames) {
    inputs.push_back(init_normal(frames, d, rng, 0.0, 1.0));
    std::vector<std::optional<std::size_t>> widths;
    if (cfg.global) widths.emplace_back(std::nullopt);
    for (auto w : cfg.widths) widths.emplace_back(w);
    for (const auto& width : widths) {
      Cell c;
      c.hidden = inputs.size() - 1;
      c.config = AttentionConfig{cfg.kind, width, d, d};
      c.stored = attend(inputs[c.hidden], c.config, params).weights.stored_entries();
      cells.push_back(std::move(c));
    }
  }
  const auto pending = [&](const Cell& c) { return c.times.size() < cfg.repetitions || c.total < cfg.min_seconds; };
  while (std::any_of(cells.begin(), cells.end(), pending)) {
    for (auto& c : cells) {
      if (!pending(c)) continue;
      const auto t0 = std::chrono::steady_clock::now();
      const auto res = attend(inputs[c.hidden], c.config, params);
      c.times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      c.total += c.times.back();
      c.stored = res.weights.stored_entries();
    }
  }
  for (auto& c : cells) {
    auto& t = c.times;
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    const std::size_t frames = inputs[c.hidden].rows();
    report.cells.push_back({frames, c.config.width, t[t.size() / 2], attention_working_set(frames, c.stored, d, cfg.kind)});
  }
  return report;
}

inline void write_bench_csv(const BenchReport& r, std::ostream& out) {
  out << "frames,width,mode,median_seconds,working_set_bytes\n";
  for (const auto& c : r.cells) {
    out << c.frames << ',' << (c.width ? std::to_string(*c.width) : std::string()) << ',' << c.mode() << ','
        << format_double(c.median_seconds) << ',' << c.working_set_bytes << '\n';
  }
}

/// Text table; "x prev T" is the time ratio against the same cell at the previous length.
inline void write_bench_text(const BenchReport& r, std::ostream& out) {
  out << "attention forward, d=" << r.config.hidden_dim << ", score " << to_string(r.config.kind) << ", median of "
      << r.config.repetitions << '\n';
  out << std::right << std::setw(8) << "T" << std::setw(8) << "L" << std::setw(9) << "mode" << std::setw(14)
      << "median ms" << std::setw(12) << "x prev T" << std::setw(14) << "working MiB" << '\n';
  for (std::size_t k = 0; k < r.cells.size(); ++k) {
    const auto& c = r.cells[k];
    std::string ratio = "-";
    for (std::size_t j = k; j-- > 0;) {
      if (r.cells[j].width == c.width && r.cells[j].frames < c.frames) {
        ratio = format_fixed(c.median_seconds / r.cells[j].median_seconds, 2);
        break;
      }
    }
    out << std::setw(8) << c.frames << std::setw(8) << (c.width ? std::to_string(*c.width) : std::string("-"))
        << std::setw(9) << c.mode() << std::setw(14) << format_fixed(1e3 * c.median_seconds, 3) << std::setw(12)
        << ratio << std::setw(14) << format_fixed(static_cast<double>(c.working_set_bytes) / (1024.0 * 1024.0), 2)
        << '\n';
  }
}

}  // namespace memsa
