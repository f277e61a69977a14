#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "memsa/attention/export.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/format.hpp"
#include "memsa/model/sed_model.hpp"
#include "memsa/synth/dataset.hpp"
#include "memsa/synth/soundscape.hpp"

namespace memsa {

struct HeatmapOptions {
  double frame_rate = 50.0;
  std::size_t max_cells = 250;  // SVG grid per axis; longer sequences are block-averaged
  double plot_size = 500.0;     // px
};

/// Cell accessor for a square T x T map; nullopt marks cells outside the window.
using HeatmapCell = std::function<std::optional<double>(std::size_t, std::size_t)>;

/// Linear grayscale heatmap, white = 0 and black = the largest cell. Rows are query frames
/// t (top to bottom), columns source frames i. Cells outside the window are not drawn.
inline void write_heatmap_svg(const HeatmapCell& cell, std::size_t frames, const std::string& title,
                              std::ostream& out, const HeatmapOptions& opt = {}) {
  detail::require(frames >= 1, "heatmap: empty map");
  detail::require(opt.max_cells >= 1 && opt.frame_rate > 0.0, "heatmap: bad options");
  const std::size_t block = (frames + opt.max_cells - 1) / opt.max_cells;
  const std::size_t n = (frames + block - 1) / block;
  std::vector<std::optional<double>> grid(n * n);
  double peak = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t t = a * block; t < std::min(frames, (a + 1) * block); ++t)
        for (std::size_t i = b * block; i < std::min(frames, (b + 1) * block); ++i)
          if (const auto v = cell(t, i)) sum += *v, ++count;
      if (count == 0) continue;
      grid[a * n + b] = sum / static_cast<double>(count);
      peak = std::max(peak, *grid[a * n + b]);
    }
  }
  if (peak <= 0.0) peak = 1.0;

  const double left = 90.0, top = 40.0, px = opt.plot_size / static_cast<double>(n);
  const double width = left + opt.plot_size + 20.0, height = top + opt.plot_size + 70.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << left << "\" y=\"20\" font-size=\"13\">" << title << " (max " << format_fixed(peak, 4)
      << ")</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << opt.plot_size << "\" height=\"" << opt.plot_size
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      const auto v = grid[a * n + b];
      if (!v) continue;
      const int g = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(*v / peak, 0.0, 1.0))));
      out << "<rect x=\"" << left + static_cast<double>(b) * px << "\" y=\"" << top + static_cast<double>(a) * px
          << "\" width=\"" << px << "\" height=\"" << px << "\" fill=\"rgb(" << g << ',' << g << ',' << g << ")\"/>\n";
    }
  }
  out << "</g>\n";
  const std::size_t ticks = std::min<std::size_t>(5, frames);
  for (std::size_t k = 0; k < ticks; ++k) {
    const std::size_t f = ticks == 1 ? 0 : k * (frames - 1) / (ticks - 1);
    const double pos = (static_cast<double>(f) + 0.5) / static_cast<double>(frames) * opt.plot_size;
    const std::string label = std::to_string(f) + " (" + format_fixed(static_cast<double>(f) / opt.frame_rate, 2) + " s)";
    out << "<text x=\"" << left + pos << "\" y=\"" << top + opt.plot_size + 16.0 << "\" text-anchor=\"middle\">"
        << label << "</text>\n";
    out << "<text x=\"" << left - 6.0 << "\" y=\"" << top + pos + 4.0 << "\" text-anchor=\"end\">" << label
        << "</text>\n";
  }
  out << "<text x=\"" << left + opt.plot_size / 2.0 << "\" y=\"" << top + opt.plot_size + 40.0
      << "\" text-anchor=\"middle\">source frame i (s)</text>\n";
  out << "<text x=\"14\" y=\"" << top + opt.plot_size / 2.0 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << top + opt.plot_size / 2.0 << ")\">query frame t (s)</text>\n";
  out << "</svg>\n";
}

namespace detail {

inline void write_pair(const std::filesystem::path& stem, const std::string& title, std::size_t frames,
                       const HeatmapCell& cell, const std::function<void(std::ostream&)>& csv,
                       const HeatmapOptions& opt, std::vector<std::filesystem::path>& written) {
  std::ostringstream c, s;
  csv(c);
  write_heatmap_svg(cell, frames, title, s, opt);
  const auto csv_path = std::filesystem::path(stem.string() + ".csv");
  const auto svg_path = std::filesystem::path(stem.string() + ".svg");
  write_file_bytes(csv_path, c.str());
  write_file_bytes(svg_path, s.str());
  written.push_back(csv_path);
  written.push_back(svg_path);
}

}  // namespace detail

/// Writes <clip>_attention.{csv,svg}, or for MultiHead <clip>_head<j>_L<w>.{csv,svg} per head
/// plus <clip>_combined.{csv,svg} with the effective weights sum_j (w_j / L_j) A_j.
inline std::vector<std::filesystem::path> export_attention_heatmap(const SedModel& model, const SoundscapeClip& clip,
                                                                   const std::filesystem::path& out_dir,
                                                                   const HeatmapOptions& opt = {}) {
  if (model.config.variant.kind == VariantKind::None)
    throw UnsupportedVariant("heatmap: " + model.config.variant.name() + " has no attention layer");
  std::filesystem::create_directories(out_dir);
  const ForwardPass fp = model_forward(model, clip.features);
  const std::size_t frames = clip.features.rows();
  std::vector<std::filesystem::path> written;

  auto banded = [&](const AttentionWeights& w, const std::string& stem, const std::string& title) {
    const HeatmapCell cell = [&w](std::size_t t, std::size_t i) -> std::optional<double> {
      if (!w.contains(t, i)) return std::nullopt;
      return w.at(t, i);
    };
    detail::write_pair(out_dir / stem, title, frames, cell, [&w](std::ostream& o) { write_weights_csv(w, o); }, opt,
                       written);
  };

  if (fp.attention) {
    banded(fp.attention->weights, clip.id + "_attention", clip.id + " " + model.config.variant.name());
    return written;
  }
  const MultiHeadConfig cfg = model.multihead_config();
  for (std::size_t j = 0; j < fp.multihead->head_weights.size(); ++j) {
    const std::string tag = "head" + std::to_string(j + 1) + "_L" + std::to_string(cfg.widths[j]);
    banded(fp.multihead->head_weights[j], clip.id + "_" + tag, clip.id + " " + tag);
  }
  const Matrix combined = fp.multihead->combined_weights(cfg);
  const HeatmapCell cell = [&combined](std::size_t t, std::size_t i) -> std::optional<double> { return combined(t, i); };
  detail::write_pair(out_dir / (clip.id + "_combined"), clip.id + " combined", frames, cell,
                     [&combined](std::ostream& o) { write_matrix_csv(combined, o); }, opt, written);
  return written;
}

}  // namespace memsa
