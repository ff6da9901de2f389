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

// Record written next to every run's outputs, holding enough to replay it.

#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace anchorparse {

inline constexpr const char* kManifestFile = "manifest.json";

std::string library_version();
// UTC, ISO-8601 with seconds.
std::string utc_timestamp();

struct RunManifest {
  std::string subcommand;
  nlohmann::json config;   // resolved run configuration
  nlohmann::json options;  // resolved subcommand flags
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::string version;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// Atomic write of `dir`/manifest.json.
void write_manifest(const RunManifest& m, const std::filesystem::path& dir);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace anchorparse
