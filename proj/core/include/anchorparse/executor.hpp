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

// In-memory evaluation of logical forms. Results are bags of rows compared
// under typed canonical rendering.

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "anchorparse/logical_form.hpp"
#include "anchorparse/schema.hpp"

namespace anchorparse {

class ExecutionError : public std::runtime_error {
 public:
  enum class Kind { kSchemaReference, kType };
  ExecutionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ResultSet {
  std::vector<std::string> header;
  std::vector<std::vector<Value>> rows;
};

// Headers equal and rows equal as multisets.
bool result_equal(const ResultSet& a, const ResultSet& b);

// Aggregates over an empty selection yield one null cell; COUNT yields 0.
ResultSet execute_sql(const SqlQuery& q, const DatabaseInstance& db);

// Backtracking join over edge facts (subject label, relation, object label)
// and property facts (entity label, property, value), in pattern order.
ResultSet execute_sparql(const SparqlQuery& q, const KnowledgeBase& kb);

ResultSet execute(const LogicalForm& q, const SchemaDocument& schema);

// Three-way comparison used by both executors: numbers numerically, text and
// entities by label. Returns false for incomparable kinds.
bool compare_values(const Value& lhs, CompareOp op, const Value& rhs);

}  // namespace anchorparse
