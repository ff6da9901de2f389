// Copyright 2026 The anchorparse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Versioned run configuration file:
//
//   {"version": 1, "gen": {...}, "model": {...}, "train": {...}}
//
// Every section is optional. Keys override built-in defaults; command-line
// flags override the file. Unknown keys are errors.

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "anchorparse/datagen.hpp"
#include "anchorparse/model.hpp"
#include "anchorparse/training.hpp"

namespace anchorparse {

inline constexpr int kConfigVersion = 1;

nlohmann::json gen_config_to_json(const GenConfig& c);
GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base);

struct RunConfig {
  GenConfig gen;
  ModelConfig model;
  TrainConfig train;

  nlohmann::json to_json() const;
  // Throws ConfigError for a bad version, unknown keys or mistyped values.
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_json(const nlohmann::json& j) { return from_json(j, RunConfig()); }
  static RunConfig load(const std::filesystem::path& path, RunConfig base);
  static RunConfig load(const std::filesystem::path& path) { return load(path, RunConfig()); }
};

}  // namespace anchorparse
