// Copyright 2026 The ConAdv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key-value run configuration. One "key = value" per line, '#' starts a
// comment, blank lines are ignored, keys may appear at most once and unknown
// keys are rejected. Keys absent from a file keep their defaults.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "conadv/dist/train_config.hpp"

namespace conadv::harness {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// Every recognized key, in serialization order.
const std::vector<ConfigKey>& config_keys();

/// Sets one field from its text form. Throws ConfigError naming the key.
void apply_setting(dist::TrainConfig& cfg, const std::string& key, const std::string& value);
std::string get_setting(const dist::TrainConfig& cfg, const std::string& key);

/// Parses a whole file body over the given base configuration; does not validate.
dist::TrainConfig parse_config(const std::string& text, dist::TrainConfig base = {});
std::string serialize_config(const dist::TrainConfig& cfg);

dist::TrainConfig load_config_file(const std::string& path, dist::TrainConfig base = {});
void save_config_file(const std::string& path, const dist::TrainConfig& cfg);

}  // namespace conadv::harness
