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

#include "anchorparse/manifest.hpp"

#include <chrono>
#include <ctime>

#include "anchorparse/corpus.hpp"
#include "anchorparse/errors.hpp"

namespace anchorparse {

std::string library_version() { return ANCHORPARSE_VERSION; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json RunManifest::to_json() const {
  return {{"subcommand", subcommand}, {"config", config},   {"options", options},
          {"seeds", seeds},           {"inputs", inputs},   {"outputs", outputs},
          {"version", version},       {"started_at", started_at}, {"finished_at", finished_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.config = j.value("config", nlohmann::json::object());
    m.options = j.value("options", nlohmann::json::object());
    m.seeds = j.value("seeds", std::map<std::string, std::uint64_t>{});
    m.inputs = j.value("inputs", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::map<std::string, std::string>{});
    m.version = j.value("version", "");
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run manifest: ") + e.what());
  }
}

void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  write_file_atomic(dir / kManifestFile, m.to_json().dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return RunManifest::from_json(j);
}

}  // namespace anchorparse
