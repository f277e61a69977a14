#pragma once

#include <cstddef>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace memsa {

struct F1Value {
  double percent = 0.0;
  bool undefined = false;  // 2TP + FP + FN == 0
};

/// 100 * 2TP / (2TP + FP + FN); 0 and flagged when the denominator is 0.
inline F1Value f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) return {0.0, true};
  return {100.0 * static_cast<double>(2 * tp) / static_cast<double>(denom), false};
}

struct ClassCounts {
  std::size_t tp = 0, fp = 0, fn = 0;

  F1Value f1() const { return f1_score(tp, fp, fn); }
  ClassCounts& operator+=(const ClassCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Micro-averaged result. error_rate = (S + D + I) / N; when N = 0 it is reported as 0
/// and error_rate_undefined is set.
struct MetricsReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::size_t substitutions = 0, deletions = 0, insertions = 0;
  std::size_t reference_count = 0;
  double f1 = 0.0;
  bool f1_undefined = false;
  double error_rate = 0.0;
  bool error_rate_undefined = false;
  std::map<std::string, ClassCounts> per_class;

  void finalize() {
    const auto f = f1_score(tp, fp, fn);
    f1 = f.percent;
    f1_undefined = f.undefined;
    error_rate_undefined = reference_count == 0;
    error_rate = reference_count == 0 ? 0.0
                                      : static_cast<double>(substitutions + deletions + insertions) /
                                            static_cast<double>(reference_count);
  }
};

inline nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["f1"] = r.f1;
  j["f1_undefined"] = r.f1_undefined;
  j["error_rate"] = r.error_rate;
  j["error_rate_undefined"] = r.error_rate_undefined;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["substitutions"] = r.substitutions;
  j["deletions"] = r.deletions;
  j["insertions"] = r.insertions;
  j["reference_count"] = r.reference_count;
  auto& classes = j["per_class"];
  classes = nlohmann::ordered_json::object();
  for (const auto& [label, c] : r.per_class) {
    const auto f = c.f1();
    classes[label] = {{"f1", f.percent}, {"f1_undefined", f.undefined}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}};
  }
  return j;
}

inline std::string format_fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

/// Aligned text summary of one report followed by the per-class table.
inline void write_report_text(const MetricsReport& r, const std::string& title, std::ostream& out) {
  out << title << '\n';
  out << "  F1 " << format_fixed(r.f1, 2) << " %" << (r.f1_undefined ? " (undefined)" : "") << "   ER "
      << format_fixed(r.error_rate, 4) << (r.error_rate_undefined ? " (undefined)" : "") << '\n';
  out << "  TP " << r.tp << "  FP " << r.fp << "  FN " << r.fn << "  S " << r.substitutions << "  D " << r.deletions
      << "  I " << r.insertions << "  N " << r.reference_count << '\n';
  if (r.per_class.empty()) return;
  out << "  " << std::left << std::setw(20) << "class" << std::right << std::setw(8) << "F1 %" << std::setw(7)
      << "TP" << std::setw(7) << "FP" << std::setw(7) << "FN" << '\n';
  for (const auto& [label, c] : r.per_class) {
    const auto f = c.f1();
    out << "  " << std::left << std::setw(20) << label << std::right << std::setw(8)
        << (f.undefined ? std::string("-") : format_fixed(f.percent, 2)) << std::setw(7) << c.tp << std::setw(7)
        << c.fp << std::setw(7) << c.fn << '\n';
  }
}

}  // namespace memsa
