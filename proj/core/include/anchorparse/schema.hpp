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

// Knowledge-base and relational schemas, their instances, and the flat
// schema vocabularies used for anchor membership tests.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace anchorparse {

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lowercase ASCII letters, trim, and collapse internal whitespace runs to a
// single underscore. normalize_token(normalize_token(s)) == normalize_token(s).
std::string normalize_token(std::string_view raw);

// Words that the query lexer reserves; no schema element may use them.
bool is_reserved_word(std::string_view token);

// Integers (|x| < 2^53) print without a fractional part or leading zeros;
// everything else uses the shortest round-trip representation.
std::string render_number(double value);

struct Value {
  enum class Kind { kNull, kNumber, kText, kEntity };

  Kind kind = Kind::kNull;
  double number = 0.0;
  std::string text;

  static Value null() { return {}; }
  static Value of_number(double v) { return {Kind::kNumber, v, {}}; }
  static Value of_text(std::string v) { return {Kind::kText, 0.0, std::move(v)}; }
  static Value of_entity(std::string label) { return {Kind::kEntity, 0.0, std::move(label)}; }

  bool is_null() const { return kind == Kind::kNull; }
  // Typed canonical rendering: "null", "n:1990", "s:1990", "e:saab".
  std::string render() const;
  // Untyped rendering used in token streams ("1990", "saab").
  std::string plain() const;

  friend bool operator==(const Value& a, const Value& b) { return a.render() == b.render(); }
};

enum class AttributeType { kNumber, kText };
std::string_view to_string(AttributeType type);
AttributeType attribute_type_from_string(std::string_view s);

struct Attribute {
  std::string name;
  AttributeType type = AttributeType::kText;
};

struct TableSchema {
  std::string name;
  std::vector<Attribute> attributes;

  std::optional<std::size_t> column_index(std::string_view column) const;
};

class RelationalSchema {
 public:
  // Throws SchemaError on a duplicate table, duplicate column within the
  // table, empty or reserved names, or names that are not normalized.
  void add_table(TableSchema table);

  const std::vector<TableSchema>& tables() const { return tables_; }
  const TableSchema* find_table(std::string_view name) const;

 private:
  std::vector<TableSchema> tables_;
};

class DatabaseInstance {
 public:
  DatabaseInstance() = default;
  explicit DatabaseInstance(RelationalSchema schema);

  const RelationalSchema& schema() const { return schema_; }
  // Throws SchemaError on unknown table, wrong arity, or mistyped values.
  void add_row(std::string_view table, std::vector<Value> row);
  const std::vector<std::vector<Value>>& rows(std::string_view table) const;

 private:
  RelationalSchema schema_;
  std::map<std::string, std::vector<std::vector<Value>>, std::less<>> rows_;
};

struct PropertyPair {
  std::string name;
  Value value;  // kNumber or kText
};

struct KbNode {
  std::string id;
  std::string label;
  std::vector<PropertyPair> properties;
};

struct KbEdge {
  std::string id;
  std::string source;
  std::string label;
  std::string target;
  std::vector<PropertyPair> properties;
};

// A labeled property graph G = (N, E) with a total labeling of nodes and edges
// and a partial property map. Node labels identify entities in queries, so
// they are unique among nodes.
class KnowledgeBase {
 public:
  void add_node(KbNode node);
  // Both endpoints must already exist.
  void add_edge(KbEdge edge);

  const std::vector<KbNode>& nodes() const { return nodes_; }
  const std::vector<KbEdge>& edges() const { return edges_; }
  const KbNode* find_node(std::string_view id) const;
  const KbNode* find_node_by_label(std::string_view label) const;
  bool has_relation(std::string_view label) const;
  bool has_property(std::string_view name) const;

  // Checks that every vocabulary token maps to exactly one schema kind.
  void validate() const;

 private:
  std::vector<KbNode> nodes_;
  std::vector<KbEdge> edges_;
  std::unordered_map<std::string, std::size_t> node_by_id_;
  std::unordered_map<std::string, std::size_t> node_by_label_;
};

enum class SchemaKind { kTable, kColumn, kEntityLabel, kRelationLabel, kProperty, kValue };
std::string_view to_string(SchemaKind kind);

class SchemaVocabulary {
 public:
  // The first kind recorded for a token wins.
  void insert(const std::string& token, SchemaKind kind);
  bool contains(std::string_view token) const;
  std::optional<SchemaKind> kind_of(std::string_view token) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::string, SchemaKind, std::less<>>& entries() const { return entries_; }

  friend bool operator==(const SchemaVocabulary&, const SchemaVocabulary&) = default;

 private:
  std::map<std::string, SchemaKind, std::less<>> entries_;
};

SchemaVocabulary kb_vocabulary(const KnowledgeBase& kb);
SchemaVocabulary db_vocabulary(const RelationalSchema& schema);

// One serialized schema + instance document.
struct SchemaDocument {
  std::string id;
  std::variant<DatabaseInstance, KnowledgeBase> content;

  bool is_kb() const { return std::holds_alternative<KnowledgeBase>(content); }
  const KnowledgeBase& kb() const { return std::get<KnowledgeBase>(content); }
  const DatabaseInstance& db() const { return std::get<DatabaseInstance>(content); }
  SchemaVocabulary vocabulary() const;
};

inline constexpr std::string_view kSchemaFormatName = "anchorparse.schema";
inline constexpr int kSchemaFormatVersion = 1;

nlohmann::json schema_to_json(const SchemaDocument& doc);
// Throws SchemaError on malformed or invalid documents.
SchemaDocument schema_from_json(const nlohmann::json& j);

}  // namespace anchorparse
