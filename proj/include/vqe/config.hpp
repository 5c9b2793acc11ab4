#pragma once

// Flat key=value training configuration. Lines are `key = value`; blank
// lines and `#` comments are ignored. Unknown keys are rejected so typos
// fail loudly instead of silently training with defaults.

#include <fstream>
#include <istream>
#include <sstream>
#include <string>

#include "vqe/errors.hpp"
#include "vqe/mganet.hpp"

namespace vqe {

struct TrainConfig {
  MganetConfig model;
  int patch = 96;
  int batch = 8;
  float lr = 1e-4f;
  double lr_decay = 0.1;
  int lr_decay_epoch = 15;  // first epoch index using the decayed rate
  int epochs = 30;
  int steps_per_epoch = 100;
  int pool = 0;  // >0: train on a fixed pool of that many patches
  std::uint64_t seed = 1;
  int qp = 37;  // label for the data this model targets

  void validate() const {
    model.validate();
    if (patch <= 0 || patch % 16 != 0) {
      throw ConfigError("config: patch must be a positive multiple of 16, got " +
                        std::to_string(patch));
    }
    if (batch < 1) throw ConfigError("config: batch must be >= 1");
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (steps_per_epoch < 1) throw ConfigError("config: steps_per_epoch must be >= 1");
    if (lr_decay_epoch < 1) throw ConfigError("config: lr_decay_epoch must be >= 1");
    if (!(lr > 0.0f) && lr != 0.0f) throw ConfigError("config: lr must be >= 0");
    if (pool < 0) throw ConfigError("config: pool must be >= 0");
  }
};

namespace detail {

inline int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + value + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on") return true;
  if (value == "0" || value == "false" || value == "off") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_double;
  using detail::parse_int;
  if (key == "width_divisor") cfg.model.width_divisor = parse_int(key, value);
  else if (key == "temporal_radius") cfg.model.temporal_radius = parse_int(key, value);
  else if (key == "lstm_layers") cfg.model.lstm_layers = parse_int(key, value);
  else if (key == "fusion") cfg.model.fusion = parse_fusion(value);
  else if (key == "guidance") cfg.model.guidance = parse_bool(key, value);
  else if (key == "patch") cfg.patch = parse_int(key, value);
  else if (key == "batch") cfg.batch = parse_int(key, value);
  else if (key == "lr") cfg.lr = static_cast<float>(parse_double(key, value));
  else if (key == "lr_decay") cfg.lr_decay = parse_double(key, value);
  else if (key == "lr_decay_epoch") cfg.lr_decay_epoch = parse_int(key, value);
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "steps_per_epoch") cfg.steps_per_epoch = parse_int(key, value);
  else if (key == "pool") cfg.pool = parse_int(key, value);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "qp") cfg.qp = parse_int(key, value);
  else throw ConfigError("config: unknown key '" + key + "'");
}

inline TrainConfig parse_train_config(std::istream& is, const std::string& name = "<config>") {
  TrainConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: " + name + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config: " + name + ":" + std::to_string(lineno) + ": empty key or value");
    }
    try {
      apply_config_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  return parse_train_config(is, path);
}

}  // namespace vqe
