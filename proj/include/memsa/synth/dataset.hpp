#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "memsa/core/error.hpp"
#include "memsa/core/random.hpp"
#include "memsa/metrics/annotations.hpp"
#include "memsa/synth/soundscape.hpp"

namespace memsa {

struct SoundscapeDataset {
  SoundscapeConfig config;
  RngSeed seed{};
  std::vector<SoundscapeClip> train, validation, test;

  std::vector<std::string> class_names() const { return config.class_names(); }
};

inline EventsByClip events_by_clip(const std::vector<SoundscapeClip>& clips) {
  EventsByClip out;
  for (const auto& c : clips) out[c.id] = c.events;
  return out;
}

inline bool covers_all_classes(const std::vector<SoundscapeClip>& clips, std::size_t classes) {
  std::set<std::string> seen;
  for (const auto& c : clips)
    for (const auto& e : c.events) seen.insert(e.label);
  return seen.size() == classes;
}

inline constexpr int kMaxCoverageAttempts = 50;

/// Stream ids per split; clip seeds derive from (dataset seed, split, attempt, index).
inline std::vector<SoundscapeClip> generate_split(const SoundscapeConfig& cfg, std::size_t count, RngSeed seed,
                                                  std::uint64_t split, const std::string& prefix) {
  detail::require(count >= 1, "generate_dataset: every split needs at least one clip");
  std::vector<SoundscapeClip> clips;
  for (int attempt = 0; attempt < kMaxCoverageAttempts; ++attempt) {
    const RngSeed split_seed = derive_seed(derive_seed(seed, 100 + split), static_cast<std::uint64_t>(attempt));
    clips.clear();
    for (std::size_t n = 0; n < count; ++n) {
      std::ostringstream id;
      id << prefix << '_' << std::setw(4) << std::setfill('0') << n;
      clips.push_back(generate_clip(cfg, derive_seed(split_seed, n), id.str()));
    }
    // a split too small to hold every class keeps its first draw
    if (covers_all_classes(clips, cfg.classes) || count * cfg.max_events < cfg.classes) return clips;
    spdlog::info("split '{}' misses a class on attempt {}; regenerating", prefix, attempt);
  }
  spdlog::warn("split '{}' still misses a class after {} attempts", prefix, kMaxCoverageAttempts);
  return clips;
}

inline SoundscapeDataset generate_dataset(const SoundscapeConfig& cfg, std::size_t n_train, std::size_t n_val,
                                          std::size_t n_test, RngSeed seed) {
  cfg.validate();
  SoundscapeDataset ds{cfg, seed, {}, {}, {}};
  ds.train = generate_split(cfg, n_train, seed, 0, "train");
  ds.validation = generate_split(cfg, n_val, seed, 1, "val");
  ds.test = generate_split(cfg, n_test, seed, 2, "test");
  return ds;
}

/// Scales the 3:1:1 split by `factor`; factor 100 gives the 300/100/100 desk default.
inline SoundscapeDataset generate_scaled_dataset(const SoundscapeConfig& cfg, std::size_t factor, RngSeed seed) {
  return generate_dataset(cfg, 3 * factor, factor, factor, seed);
}

// ---- persistence ----

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline constexpr char kFeatureMagic[8] = {'M', 'E', 'M', 'S', 'A', 'F', '0', '1'};

/// Features file: 8-byte magic "MEMSAF01", uint64 rows, uint64 cols (little-endian), then
/// rows * cols IEEE-754 doubles, row-major, little-endian.
inline std::string encode_features(const Matrix& m) {
  static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");
  std::string out(kFeatureMagic, sizeof kFeatureMagic);
  const std::uint64_t shape[2] = {m.rows(), m.cols()};
  out.append(reinterpret_cast<const char*>(shape), sizeof shape);
  out.append(reinterpret_cast<const char*>(m.data().data()), m.size() * sizeof(double));
  return out;
}

inline Matrix decode_features(std::string_view bytes, const std::string& source) {
  constexpr std::size_t header = sizeof kFeatureMagic + 2 * sizeof(std::uint64_t);
  if (bytes.size() < header || std::memcmp(bytes.data(), kFeatureMagic, sizeof kFeatureMagic) != 0)
    throw DataError(source + ": not a features file");
  std::uint64_t shape[2];
  std::memcpy(shape, bytes.data() + sizeof kFeatureMagic, sizeof shape);
  if (bytes.size() != header + shape[0] * shape[1] * sizeof(double))
    throw DataError(source + ": size does not match its " + std::to_string(shape[0]) + "x" + std::to_string(shape[1]) + " header");
  Matrix m(shape[0], shape[1]);
  std::memcpy(m.data().data(), bytes.data() + header, m.size() * sizeof(double));
  return m;
}

inline nlohmann::ordered_json to_json(const SoundscapeConfig& c) {
  return {{"duration", c.duration},
          {"frame_rate", c.frame_rate},
          {"feature_dim", c.feature_dim},
          {"classes", c.classes},
          {"min_events", c.min_events},
          {"max_events", c.max_events},
          {"min_event_duration", c.min_event_duration},
          {"max_event_duration", c.max_event_duration},
          {"background_level", c.background_level},
          {"background_memory", c.background_memory},
          {"snr", c.snr},
          {"noise_level", c.noise_level},
          {"max_polyphony", c.max_polyphony},
          {"seed", c.seed.value}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline SoundscapeConfig soundscape_config_from_json(const nlohmann::json& j, SoundscapeConfig c = {}) {
  if (!j.is_object()) throw DataError("dataset config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "duration") c.duration = value.get<double>();
    else if (key == "frame_rate") c.frame_rate = value.get<double>();
    else if (key == "feature_dim") c.feature_dim = value.get<std::size_t>();
    else if (key == "classes") c.classes = value.get<std::size_t>();
    else if (key == "min_events") c.min_events = value.get<std::size_t>();
    else if (key == "max_events") c.max_events = value.get<std::size_t>();
    else if (key == "min_event_duration") c.min_event_duration = value.get<double>();
    else if (key == "max_event_duration") c.max_event_duration = value.get<double>();
    else if (key == "background_level") c.background_level = value.get<double>();
    else if (key == "background_memory") c.background_memory = value.get<double>();
    else if (key == "snr") c.snr = value.get<double>();
    else if (key == "noise_level") c.noise_level = value.get<double>();
    else if (key == "max_polyphony") c.max_polyphony = value.get<std::size_t>();
    else if (key == "seed") c.seed = RngSeed{value.get<std::uint64_t>()};
    else if (key == "profile") c = duration_skew_profile(c, parse_duration_profile(value.get<std::string>()));
    else throw DataError("unknown dataset config key '" + key + "'");
  }
  return c;
}

/// Layout: manifest.json, {train,val,test}.csv annotations, features/<clip_id>.bin.
/// The manifest records the config, seed, split membership and an FNV-1a checksum of
/// every other file.
inline void save_dataset(const SoundscapeDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  nlohmann::ordered_json manifest;
  manifest["format"] = "memsa-dataset-1";
  manifest["config"] = to_json(ds.config);
  manifest["seed"] = ds.seed.value;
  manifest["classes"] = ds.class_names();
  nlohmann::ordered_json checksums = nlohmann::ordered_json::object();
  const std::pair<const char*, const std::vector<SoundscapeClip>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.validation}, {"test", &ds.test}};
  for (const auto& [name, clips] : splits) {
    auto& ids = manifest["splits"][name];
    ids = nlohmann::ordered_json::array();
    for (const auto& clip : *clips) {
      ids.push_back(clip.id);
      const std::string rel = "features/" + clip.id + ".bin";
      const std::string bytes = encode_features(clip.features);
      write_file_bytes(dir / rel, bytes);
      checksums[rel] = hex64(fnv1a64(bytes));
    }
    std::ostringstream csv;
    write_annotations_csv(events_by_clip(*clips), csv);
    const std::string rel = std::string(name) + ".csv";
    write_file_bytes(dir / rel, csv.str());
    checksums[rel] = hex64(fnv1a64(csv.str()));
  }
  manifest["checksums"] = checksums;
  write_file_bytes(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline SoundscapeDataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file_bytes(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
  SoundscapeDataset ds;
  try {
    ds.config = soundscape_config_from_json(manifest.at("config"));
    ds.seed = RngSeed{manifest.at("seed").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest: " + std::string(e.what()));
  }
  const auto& checksums = manifest.at("checksums");
  auto checked = [&](const std::string& rel) {
    const std::string bytes = read_file_bytes(dir / rel);
    if (!checksums.contains(rel) || checksums.at(rel).get<std::string>() != hex64(fnv1a64(bytes)))
      throw DataError("checksum mismatch for '" + rel + "'");
    return bytes;
  };
  const std::pair<const char*, std::vector<SoundscapeClip>*> splits[] = {
      {"train", &ds.train}, {"val", &ds.validation}, {"test", &ds.test}};
  for (const auto& [name, clips] : splits) {
    std::istringstream csv(checked(std::string(name) + ".csv"));
    const EventsByClip events = read_annotations_csv(csv, std::string(name) + ".csv");
    for (const auto& id : manifest.at("splits").at(name)) {
      const std::string clip_id = id.get<std::string>();
      const std::string rel = "features/" + clip_id + ".bin";
      SoundscapeClip clip{clip_id, decode_features(checked(rel), rel), {}};
      if (const auto it = events.find(clip_id); it != events.end()) clip.events = it->second;
      clips->push_back(std::move(clip));
    }
  }
  return ds;
}

}  // namespace memsa
