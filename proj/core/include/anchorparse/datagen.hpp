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

// Seeded synthetic corpora: random DB and KB schemas with instances, and
// templated utterances paired with grammar-sampled logical forms.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anchorparse/corpus.hpp"
#include "anchorparse/logical_form.hpp"
#include "anchorparse/schema.hpp"
#include "anchorparse/tensor.hpp"

namespace anchorparse {

struct IntRange {
  std::size_t min = 0;
  std::size_t max = 0;
};

struct GenConfig {
  std::uint64_t seed = 1;
  std::size_t train_count = 5000;
  std::size_t dev_count = 500;
  std::size_t test_count = 1000;
  std::size_t db_schemas = 40;
  std::size_t kb_schemas = 40;
  IntRange tables{1, 3};
  IntRange columns{2, 6};
  IntRange rows{5, 10};
  IntRange kb_nodes{5, 30};
  IntRange kb_edges{5, 40};
  std::size_t max_conditions = 3;
  double sparql_fraction = 0.5;
  double paraphrase_rate = 0.5;
  std::string template_set = "default";
  bool hold_out_schemas = false;

  // Throws ConfigError.
  void validate() const;
};

// Independent stream for (seed, stream, index); used so that every schema and
// example draws from its own generator.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

SchemaDocument generate_db_schema(const GenConfig& cfg, std::uint64_t index);
SchemaDocument generate_kb_schema(const GenConfig& cfg, std::uint64_t index);

struct SampledQuery {
  LogicalForm form;
  std::string shape;
  TokenSequence utterance;
};

// Returns nullopt when the draw produced an empty or degenerate denotation.
std::optional<SampledQuery> sample_sql(const DatabaseInstance& db, const GenConfig& cfg, Rng& rng);
std::optional<SampledQuery> sample_sparql(const KnowledgeBase& kb, const GenConfig& cfg, Rng& rng);

// Template rendering for an SQL query. With paraphrase_rate 0 every slot uses
// its first (canonical) phrasing.
TokenSequence sql_utterance(const SqlQuery& q, double paraphrase_rate, Rng& rng);

Corpus generate_corpus(const GenConfig& cfg);

struct TemplateEntry {
  std::string_view dialect;
  std::string_view shape;
  std::vector<std::string_view> phrasings;  // first is canonical
};

// The full template and synonym table, as documented in docs/templates.md.
const std::vector<TemplateEntry>& template_table();

}  // namespace anchorparse
