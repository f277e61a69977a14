#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "memsa/core/error.hpp"
#include "memsa/core/format.hpp"

namespace memsa {

struct EventAnnotation {
  std::string label;
  double onset = 0.0;
  double offset = 0.0;

  void validate() const {
    detail::require(std::isfinite(onset) && std::isfinite(offset), "event times must be finite");
    detail::require(onset >= 0.0, "event onset must be >= 0");
    detail::require(offset > onset, "event offset must exceed onset");
    detail::require(!label.empty(), "event label must be non-empty");
  }

  friend bool operator==(const EventAnnotation&, const EventAnnotation&) = default;
  friend bool operator<(const EventAnnotation& a, const EventAnnotation& b) {
    return std::tie(a.onset, a.label, a.offset) < std::tie(b.onset, b.label, b.offset);
  }
};

using EventList = std::vector<EventAnnotation>;

/// Events keyed by clip id. A clip without events is present with an empty list.
using EventsByClip = std::map<std::string, EventList>;

inline std::set<std::string> labels_in(const EventsByClip& events) {
  std::set<std::string> out;
  for (const auto& [clip, list] : events)
    for (const auto& e : list) out.insert(e.label);
  return out;
}

/// Annotation CSV: header `clip_id,label,onset,offset`, one event per line. A line with an
/// empty label and empty times (`clip_07,,,`) declares a clip with no events.
inline void write_annotations_csv(const EventsByClip& events, std::ostream& out) {
  out << "clip_id,label,onset,offset\n";
  for (const auto& [clip, list] : events) {
    if (list.empty()) out << clip << ",,,\n";
    for (const auto& e : list) out << clip << ',' << e.label << ',' << format_double(e.onset) << ',' << format_double(e.offset) << '\n';
  }
}

inline void write_annotations_csv(const EventsByClip& events, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_annotations_csv(events, out);
}

inline EventsByClip read_annotations_csv(std::istream& in, const std::string& source = "annotations") {
  EventsByClip events;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw DataError(source + " line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (line_no == 1 && !cells.empty() && cells[0] == "clip_id") continue;
    if (cells.size() != 4) fail("expected 4 fields, got " + std::to_string(cells.size()));
    if (cells[0].empty()) fail("empty clip id");
    auto& list = events[cells[0]];
    if (cells[1].empty() && cells[2].empty() && cells[3].empty()) continue;
    const auto onset = parse_double(cells[2]);
    const auto offset = parse_double(cells[3]);
    if (!onset || !offset) fail("bad onset/offset");
    EventAnnotation e{cells[1], *onset, *offset};
    try {
      e.validate();
    } catch (const InvalidArgument& err) {
      fail(err.what());
    }
    list.push_back(std::move(e));
  }
  return events;
}

inline EventsByClip read_annotations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_annotations_csv(in, path);
}

}  // namespace memsa
