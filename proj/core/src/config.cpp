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

#include "anchorparse/config.hpp"

#include "anchorparse/corpus.hpp"
#include "anchorparse/errors.hpp"

namespace anchorparse {

namespace {

nlohmann::json range_to_json(const IntRange& r) { return nlohmann::json::array({r.min, r.max}); }

IntRange range_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("gen." + key + " must be a [min, max] pair");
  return {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

}  // namespace

nlohmann::json gen_config_to_json(const GenConfig& c) {
  return {{"seed", c.seed},
          {"train_count", c.train_count},
          {"dev_count", c.dev_count},
          {"test_count", c.test_count},
          {"db_schemas", c.db_schemas},
          {"kb_schemas", c.kb_schemas},
          {"tables", range_to_json(c.tables)},
          {"columns", range_to_json(c.columns)},
          {"rows", range_to_json(c.rows)},
          {"kb_nodes", range_to_json(c.kb_nodes)},
          {"kb_edges", range_to_json(c.kb_edges)},
          {"max_conditions", c.max_conditions},
          {"sparql_fraction", c.sparql_fraction},
          {"paraphrase_rate", c.paraphrase_rate},
          {"template_set", c.template_set},
          {"hold_out_schemas", c.hold_out_schemas}};
}

GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "train_count") c.train_count = value.get<std::size_t>();
    else if (key == "dev_count") c.dev_count = value.get<std::size_t>();
    else if (key == "test_count") c.test_count = value.get<std::size_t>();
    else if (key == "db_schemas") c.db_schemas = value.get<std::size_t>();
    else if (key == "kb_schemas") c.kb_schemas = value.get<std::size_t>();
    else if (key == "tables") c.tables = range_from_json(value, key);
    else if (key == "columns") c.columns = range_from_json(value, key);
    else if (key == "rows") c.rows = range_from_json(value, key);
    else if (key == "kb_nodes") c.kb_nodes = range_from_json(value, key);
    else if (key == "kb_edges") c.kb_edges = range_from_json(value, key);
    else if (key == "max_conditions") c.max_conditions = value.get<std::size_t>();
    else if (key == "sparql_fraction") c.sparql_fraction = value.get<double>();
    else if (key == "paraphrase_rate") c.paraphrase_rate = value.get<double>();
    else if (key == "template_set") c.template_set = value.get<std::string>();
    else if (key == "hold_out_schemas") c.hold_out_schemas = value.get<bool>();
    else throw ConfigError("unknown gen config key '" + key + "'");
  }
  return c;
}

nlohmann::json RunConfig::to_json() const {
  return {{"version", kConfigVersion}, {"gen", gen_config_to_json(gen)}, {"model", model.to_json()},
          {"train", train.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "version") {
        if (value.get<int>() != kConfigVersion)
          throw ConfigError("unsupported config version " + value.dump() + " (expected " +
                            std::to_string(kConfigVersion) + ")");
      } else if (key == "gen") {
        c.gen = gen_config_from_json(value, c.gen);
      } else if (key == "model") {
        c.model = ModelConfig::from_json(value, c.model);
      } else if (key == "train") {
        c.train = TrainConfig::from_json(value, c.train);
      } else {
        throw ConfigError("unknown config section '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config value: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, RunConfig base) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j, std::move(base));
}

}  // namespace anchorparse
