#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "memsa/core/error.hpp"
#include "memsa/model/sed_model.hpp"

namespace memsa {

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},   {"hidden_dim", c.hidden_dim},     {"classes", c.classes},
          {"variant", c.variant.name()}, {"score", std::string(to_string(c.score))},
          {"additive_dim", c.additive_dim}, {"threshold", c.threshold}, {"epochs", c.epochs},
          {"lr", c.lr},                 {"decay", c.decay},               {"init_std", c.init_std},
          {"seed", c.seed.value}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  if (!j.is_object()) throw DataError("model config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "input_dim") c.input_dim = value.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<std::size_t>();
      else if (key == "classes") c.classes = value.get<std::size_t>();
      else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
      else if (key == "score") c.score = parse_score_kind(value.get<std::string>());
      else if (key == "additive_dim") c.additive_dim = value.get<std::size_t>();
      else if (key == "threshold") c.threshold = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "lr") c.lr = value.get<double>();
      else if (key == "decay") c.decay = value.get<double>();
      else if (key == "init_std") c.init_std = value.get<double>();
      else if (key == "seed") c.seed = RngSeed{value.get<std::uint64_t>()};
      else throw DataError("unknown model config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model config: " + std::string(e.what()));
  }
  return c;
}

/// JSON checkpoint: {"format", "config", "parameters": {name: {"rows", "cols", "data"}}}.
/// Doubles are written in shortest round-trip form, so save/load is bit-exact.
inline nlohmann::ordered_json checkpoint_json(const SedModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "memsa-checkpoint-1";
  j["config"] = to_json(model.config);
  auto& params = j["parameters"];
  params = nlohmann::ordered_json::object();
  model.params.for_each([&](std::string_view name, const Matrix& m) {
    params[std::string(name)] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.storage()}};
  });
  return j;
}

inline SedModel model_from_checkpoint(const nlohmann::json& j) {
  try {
    if (j.at("format") != "memsa-checkpoint-1") throw DataError("unsupported checkpoint format");
    SedModel model = SedModel::create(model_config_from_json(j.at("config")));
    const auto& params = j.at("parameters");
    model.params.for_each([&](std::string_view name, Matrix& m) {
      const auto& p = params.at(std::string(name));
      Matrix loaded(p.at("rows").get<std::size_t>(), p.at("cols").get<std::size_t>(), p.at("data").get<std::vector<double>>());
      if (!loaded.same_shape(m))
        throw DataError("checkpoint parameter '" + std::string(name) + "' has shape " + loaded.shape_string() +
                        ", config implies " + m.shape_string());
      m = std::move(loaded);
    });
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: " + std::string(e.what()));
  } catch (const InvalidArgument& e) {
    throw DataError("checkpoint: " + std::string(e.what()));
  }
}

inline void save_checkpoint(const SedModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << checkpoint_json(model).dump() << '\n';
}

inline SedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return model_from_checkpoint(j);
}

}  // namespace memsa
