#pragma once

// Layered run configuration: built-in defaults, overridden by a JSON file,
// overridden by command-line flags. Field names match the resolved dump from
// experiment_config_json so a printed config is itself a valid config file.

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include <capstep/experiment.hpp>

#include <nlohmann/json.hpp>

namespace capstep {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline double cfg_num(const nlohmann::json& v, const std::string& where,
                      const std::string& src) {
  if (!v.is_number())
    throw ConfigError(src + ": " + where + " must be a number");
  return v.get<double>();
}

inline int cfg_int(const nlohmann::json& v, const std::string& where,
                   const std::string& src) {
  if (!v.is_number_integer())
    throw ConfigError(src + ": " + where + " must be an integer");
  return v.get<int>();
}

inline std::uint64_t cfg_seed(const nlohmann::json& v,
                              const std::string& where,
                              const std::string& src) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0)
    return v.get<std::uint64_t>();
  throw ConfigError(src + ": " + where + " must be a non-negative integer");
}

inline bool cfg_bool(const nlohmann::json& v, const std::string& where,
                     const std::string& src) {
  if (!v.is_boolean())
    throw ConfigError(src + ": " + where + " must be a boolean");
  return v.get<bool>();
}

inline void cfg_object(const nlohmann::json& v, const std::string& where,
                       const std::string& src) {
  if (!v.is_object())
    throw ConfigError(src + ": " + where + " must be an object");
}

}  // namespace detail

// Applies one JSON layer onto `cfg`. Unknown fields are rejected with their
// full path so typos cannot silently fall back to defaults.
inline void apply_config_json(ExperimentConfig& cfg, const nlohmann::json& j,
                              const std::string& src) {
  using namespace detail;
  cfg_object(j, "top level", src);
  for (const auto& [key, v] : j.items()) {
    if (key == "controller") {
      if (!v.is_string())
        throw ConfigError(src + ": controller must be a string");
      const auto kind = parse_controller(v.get<std::string>());
      if (!kind)
        throw ConfigError(src + ": unknown controller '" +
                          v.get<std::string>() +
                          "' (expected none, timing, timing+step, "
                          "timing+step+learning)");
      cfg.controller = *kind;
    } else if (key == "n_pushes") {
      cfg.n_pushes = cfg_int(v, key, src);
    } else if (key == "impulse_min") {
      cfg.impulse_min = cfg_num(v, key, src);
    } else if (key == "impulse_max") {
      cfg.impulse_max = cfg_num(v, key, src);
    } else if (key == "seed") {
      cfg.seed = cfg_seed(v, key, src);
    } else if (key == "nominal_period") {
      cfg.nominal_period = cfg_num(v, key, src);
    } else if (key == "nominal_width") {
      cfg.nominal_width = cfg_num(v, key, src);
    } else if (key == "freeze_grid") {
      cfg.freeze_grid = cfg_bool(v, key, src);
    } else if (key == "recovery_band") {
      cfg.recovery_band = cfg_num(v, key, src);
    } else if (key == "plant") {
      cfg_object(v, key, src);
      for (const auto& [pk, pv] : v.items()) {
        const std::string where = "plant." + pk;
        if (pk == "mass") cfg.plant.mass = cfg_num(pv, where, src);
        else if (pk == "c") cfg.plant.c_plant.c = cfg_num(pv, where, src);
        else if (pk == "actuation_bias")
          cfg.plant.actuation_bias = cfg_num(pv, where, src);
        else if (pk == "actuation_scale")
          cfg.plant.actuation_scale = cfg_num(pv, where, src);
        else if (pk == "actuation_noise_std")
          cfg.plant.actuation_noise_std = cfg_num(pv, where, src);
        else if (pk == "sensor_noise_y")
          cfg.plant.sensor_noise_y = cfg_num(pv, where, src);
        else if (pk == "sensor_noise_vy")
          cfg.plant.sensor_noise_vy = cfg_num(pv, where, src);
        else if (pk == "latency") cfg.plant.latency = cfg_num(pv, where, src);
        else if (pk == "f_min") cfg.plant.f_min = cfg_num(pv, where, src);
        else if (pk == "f_max") cfg.plant.f_max = cfg_num(pv, where, src);
        else if (pk == "t_min") cfg.plant.t_min = cfg_num(pv, where, src);
        else if (pk == "y_fall") cfg.plant.y_fall = cfg_num(pv, where, src);
        else if (pk == "recovery_time")
          cfg.plant.recovery_time = cfg_num(pv, where, src);
        else if (pk == "control_rate")
          cfg.plant.control_rate = cfg_num(pv, where, src);
        else if (pk == "exchange_restitution")
          cfg.plant.exchange_restitution = cfg_num(pv, where, src);
        else
          throw ConfigError(src + ": unknown field '" + where + "'");
      }
    } else if (key == "gait") {
      cfg_object(v, key, src);
      for (const auto& [gk, gv] : v.items()) {
        const std::string where = "gait." + gk;
        if (gk == "alpha") cfg.gait.alpha = cfg_num(gv, where, src);
        else if (gk == "delta") cfg.gait.delta = cfg_num(gv, where, src);
        else if (gk == "c") cfg.gait.c.c = cfg_num(gv, where, src);
        else
          throw ConfigError(src + ": unknown field '" + where + "'");
      }
    } else if (key == "grid") {
      cfg_object(v, key, src);
      for (const auto& [gk, gv] : v.items()) {
        const std::string where = "grid." + gk;
        if (gk == "y_min") cfg.grid.y_min = cfg_num(gv, where, src);
        else if (gk == "y_max") cfg.grid.y_max = cfg_num(gv, where, src);
        else if (gk == "vy_min") cfg.grid.vy_min = cfg_num(gv, where, src);
        else if (gk == "vy_max") cfg.grid.vy_max = cfg_num(gv, where, src);
        else if (gk == "ny") cfg.grid.ny = cfg_int(gv, where, src);
        else if (gk == "nvy") cfg.grid.nvy = cfg_int(gv, where, src);
        else if (gk == "eta") cfg.grid.eta = cfg_num(gv, where, src);
        else
          throw ConfigError(src + ": unknown field '" + where + "'");
      }
    } else {
      throw ConfigError(src + ": unknown field '" + key + "'");
    }
  }
}

// Defaults overlaid with one config file. The file may be partial; anything
// it does not mention keeps its built-in value.
inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  ExperimentConfig cfg;
  apply_config_json(cfg, j, path);
  return cfg;
}

}  // namespace capstep
