#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "memsa/attention/self_attention.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/format.hpp"

namespace memsa {

/// CSV with one line per query frame t and one column per source frame i. Cells outside
/// the band are left empty.
template <typename T>
void write_weights_csv(const BasicAttentionWeights<T>& weights, std::ostream& out) {
  const std::size_t frames = weights.frames();
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < frames; ++i) {
      if (i > 0) out << ',';
      if (weights.contains(t, i)) out << format_double(static_cast<double>(weights.at(t, i)));
    }
    out << '\n';
  }
}

template <typename T>
void write_weights_csv(const BasicAttentionWeights<T>& weights, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_weights_csv(weights, out);
}

/// Dense-matrix variant for combined multi-head weights; every cell is written.
inline void write_matrix_csv(const Matrix& m, std::ostream& out) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << format_double(m(r, c));
    }
    out << '\n';
  }
}

/// Parses a weights CSV back into rows of optional cells (empty cell -> nullopt).
inline std::vector<std::vector<std::optional<double>>> read_weights_csv(std::istream& in) {
  std::vector<std::vector<std::optional<double>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::optional<double>> cells;
    for (const auto& cell : split_csv_line(line)) {
      if (cell.empty()) {
        cells.emplace_back(std::nullopt);
        continue;
      }
      const auto v = parse_double(cell);
      if (!v) throw DataError("weights CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      cells.emplace_back(*v);
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace memsa
