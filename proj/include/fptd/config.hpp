#pragma once

// Run configuration shared by the command-line tool: JSON (de)serialisation
// and validation. Keys mirror the command-line flags.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "fptd/model.hpp"

namespace fptd {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TailConfig {
  bool enabled = true;
  std::optional<double> T;  // splice time; default from the relative-error rule
  std::optional<double> n;  // domain length; default max(8, 4x)
  std::size_t mesh = 4000;
};

struct BaselineConfig {
  bool enabled = true;
  double h = 0.01;
  std::size_t N_e = 10000;
  bool correction = true;
};

struct RunConfig {
  std::optional<std::string> drift;
  std::optional<double> x;
  std::optional<GeneralDiffusionSpec> general;
  double T = 10.0;  // t_max of the estimation grid
  std::size_t grid_points = 200;
  std::size_t N = 10000;
  std::size_t M = 1000;
  std::uint64_t seed = 0;
  TailConfig tail;
  BaselineConfig baseline;
};

/// Throws ConfigError; rounds an odd M up to the next even value.
inline void validate(RunConfig& c) {
  const bool simple = c.drift.has_value();
  if (simple == c.general.has_value())
    throw ConfigError("give exactly one of {drift, x} or {b, sigma, level, start}");
  if (simple && !c.x) throw ConfigError("x is required with drift");
  if (c.x && !(*c.x > 0.0)) throw ConfigError("x must be positive");
  if (c.general && !(c.general->start > c.general->level))
    throw ConfigError("start must lie above level");
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  if (c.grid_points < 1) throw ConfigError("grid_points must be at least 1");
  if (c.N < 2) throw ConfigError("N must be at least 2");
  if (c.M < 2) throw ConfigError("M must be at least 2");
  if (c.M % 2 != 0) ++c.M;
  if (c.tail.T && !(*c.tail.T > 0.0)) throw ConfigError("tail.T must be positive");
  if (c.tail.n && !(*c.tail.n > 0.0)) throw ConfigError("tail.n must be positive");
  if (c.tail.mesh < 100) throw ConfigError("tail.mesh must be at least 100");
  if (!(c.baseline.h > 0.0)) throw ConfigError("baseline.h must be positive");
  if (c.baseline.N_e < 1) throw ConfigError("baseline.N_e must be positive");
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  if (c.drift) j["drift"] = *c.drift;
  if (c.x) j["x"] = *c.x;
  if (c.general)
    j["general"] = {{"b", c.general->b},
                    {"sigma", c.general->sigma},
                    {"level", c.general->level},
                    {"start", c.general->start}};
  j["T"] = c.T;
  j["grid_points"] = c.grid_points;
  j["N"] = c.N;
  j["M"] = c.M;
  j["seed"] = c.seed;
  nlohmann::json tail = {{"enabled", c.tail.enabled}, {"mesh", c.tail.mesh}};
  if (c.tail.T) tail["T"] = *c.tail.T;
  if (c.tail.n) tail["n"] = *c.tail.n;
  j["tail"] = tail;
  j["baseline"] = {{"enabled", c.baseline.enabled},
                   {"h", c.baseline.h},
                   {"N_e", c.baseline.N_e},
                   {"correction", c.baseline.correction}};
  return j;
}

/// Reads the keys present in `j` into `c`; unknown keys are an error.
inline void merge_json(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "drift") c.drift = value.get<std::string>();
      else if (key == "x") c.x = value.get<double>();
      else if (key == "general") {
        GeneralDiffusionSpec g;
        g.b = value.at("b").get<std::string>();
        g.sigma = value.at("sigma").get<std::string>();
        g.level = value.at("level").get<double>();
        g.start = value.at("start").get<double>();
        c.general = g;
      } else if (key == "T") c.T = value.get<double>();
      else if (key == "grid_points") c.grid_points = value.get<std::size_t>();
      else if (key == "N") c.N = value.get<std::size_t>();
      else if (key == "M") c.M = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "tail") {
        if (value.contains("enabled")) c.tail.enabled = value["enabled"].get<bool>();
        if (value.contains("T")) c.tail.T = value["T"].get<double>();
        if (value.contains("n")) c.tail.n = value["n"].get<double>();
        if (value.contains("mesh")) c.tail.mesh = value["mesh"].get<std::size_t>();
      } else if (key == "baseline") {
        if (value.contains("enabled")) c.baseline.enabled = value["enabled"].get<bool>();
        if (value.contains("h")) c.baseline.h = value["h"].get<double>();
        if (value.contains("N_e")) c.baseline.N_e = value["N_e"].get<std::size_t>();
        if (value.contains("correction")) c.baseline.correction = value["correction"].get<bool>();
      } else if (key == "model" || key == "results") {
        // written by the tool into meta.json; not configuration
      } else {
        throw ConfigError("unknown configuration key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  }
}

/// The diffusion described by a validated configuration.
inline DriftModel model_from(const RunConfig& c) {
  if (c.drift) return build_model(*c.drift, *c.x);
  return lamperti_transform(*c.general).model;
}

}  // namespace fptd
