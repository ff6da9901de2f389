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

// Paired (utterance, logical form) examples and the on-disk corpus layout:
//
//   <dir>/schemas/<schema_ref>.json   one schema document each
//   <dir>/{train,dev,test}.jsonl      one example record per line
//   <dir>/stats.json                  anchor and shape statistics

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorparse/anchors.hpp"
#include "anchorparse/logical_form.hpp"
#include "anchorparse/schema.hpp"

namespace anchorparse {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Example {
  int id = 0;
  std::string split;  // train | dev | test
  Dialect dialect = Dialect::kSql;
  std::string shape;  // query-shape label for per-shape breakdowns
  std::string schema_ref;
  TokenSequence utterance;
  SupervisionTargets targets;
};

nlohmann::json example_to_json(const Example& ex);
Example example_from_json(const nlohmann::json& j);

class Corpus {
 public:
  void add_schema(SchemaDocument doc);
  void add_example(Example ex);

  const SchemaDocument& schema(const std::string& ref) const;
  bool has_schema(const std::string& ref) const { return schemas_.count(ref) != 0; }
  const std::map<std::string, SchemaDocument>& schemas() const { return schemas_; }
  const std::vector<Example>& examples() const { return examples_; }
  std::vector<const Example*> split(const std::string& name) const;
  const Example* find(int id) const;

 private:
  std::map<std::string, SchemaDocument> schemas_;
  std::vector<Example> examples_;
};

struct CorpusStats {
  std::size_t examples = 0;
  std::map<std::string, std::size_t> per_split;
  std::map<std::string, std::size_t> shape_histogram;
  std::map<std::size_t, std::size_t> anchors_per_example;
  std::size_t empty_sae = 0;
  double mean_anchors = 0.0;

  nlohmann::json to_json() const;
};

CorpusStats corpus_stats(const Corpus& corpus);

struct ValidationReport {
  std::size_t checked = 0;
  std::vector<std::string> failures;  // "<id>: <reason>"
  bool ok() const { return failures.empty(); }
};

// Round-trip identity, executability and target invariants for every example.
ValidationReport validate_corpus(const Corpus& corpus);

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace anchorparse
