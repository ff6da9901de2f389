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

#include "anchorparse/schema.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>

namespace anchorparse {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

void require_name(const std::string& name, const char* what) {
  if (name.empty()) throw SchemaError(std::string(what) + " name is empty");
  if (normalize_token(name) != name)
    throw SchemaError(std::string(what) + " name '" + name + "' is not normalized");
  if (is_reserved_word(name))
    throw SchemaError(std::string(what) + " name '" + name + "' is a reserved word");
}

Value normalized_property_value(const Value& v) {
  if (v.kind == Value::Kind::kText) {
    std::string t = normalize_token(v.text);
    if (t.empty()) throw SchemaError("empty text property value");
    return Value::of_text(std::move(t));
  }
  if (v.kind != Value::Kind::kNumber) throw SchemaError("property values must be numbers or text");
  return v;
}

}  // namespace

std::string normalize_token(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back('_');
      pending_space = false;
    }
    out.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out;
}

bool is_reserved_word(std::string_view token) {
  static constexpr std::array<std::string_view, 5> kReserved = {"select", "from", "where", "and",
                                                                "filter"};
  for (auto r : kReserved)
    if (r == token) return true;
  return false;
}

std::string render_number(double value) {
  if (value == 0.0) return "0";
  if (std::isfinite(value) && std::nearbyint(value) == value && std::fabs(value) < 9007199254740992.0)
    return std::to_string(static_cast<long long>(value));
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string Value::render() const {
  switch (kind) {
    case Kind::kNull:
      return "null";
    case Kind::kNumber:
      return "n:" + render_number(number);
    case Kind::kText:
      return "s:" + text;
    case Kind::kEntity:
      return "e:" + text;
  }
  return "null";
}

std::string Value::plain() const {
  switch (kind) {
    case Kind::kNull:
      return "null";
    case Kind::kNumber:
      return render_number(number);
    case Kind::kText:
    case Kind::kEntity:
      return text;
  }
  return "null";
}

std::string_view to_string(AttributeType type) {
  return type == AttributeType::kNumber ? "number" : "text";
}

AttributeType attribute_type_from_string(std::string_view s) {
  if (s == "number") return AttributeType::kNumber;
  if (s == "text") return AttributeType::kText;
  throw SchemaError("unknown attribute type '" + std::string(s) + "'");
}

std::optional<std::size_t> TableSchema::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < attributes.size(); ++i)
    if (attributes[i].name == column) return i;
  return std::nullopt;
}

void RelationalSchema::add_table(TableSchema table) {
  require_name(table.name, "table");
  if (find_table(table.name)) throw SchemaError("duplicate table '" + table.name + "'");
  if (table.attributes.empty()) throw SchemaError("table '" + table.name + "' has no columns");
  std::set<std::string> seen;
  for (const auto& a : table.attributes) {
    require_name(a.name, "column");
    if (!seen.insert(a.name).second)
      throw SchemaError("duplicate column '" + a.name + "' in table '" + table.name + "'");
  }
  tables_.push_back(std::move(table));
}

const TableSchema* RelationalSchema::find_table(std::string_view name) const {
  for (const auto& t : tables_)
    if (t.name == name) return &t;
  return nullptr;
}

DatabaseInstance::DatabaseInstance(RelationalSchema schema) : schema_(std::move(schema)) {
  for (const auto& t : schema_.tables()) rows_[t.name];
}

void DatabaseInstance::add_row(std::string_view table, std::vector<Value> row) {
  const TableSchema* t = schema_.find_table(table);
  if (!t) throw SchemaError("unknown table '" + std::string(table) + "'");
  if (row.size() != t->attributes.size())
    throw SchemaError("row arity " + std::to_string(row.size()) + " does not match table '" +
                      t->name + "' with " + std::to_string(t->attributes.size()) + " columns");
  for (std::size_t i = 0; i < row.size(); ++i) {
    const auto want = t->attributes[i].type == AttributeType::kNumber ? Value::Kind::kNumber
                                                                      : Value::Kind::kText;
    if (row[i].kind == Value::Kind::kNull) continue;
    if (row[i].kind != want)
      throw SchemaError("value " + row[i].render() + " does not match column '" +
                        t->attributes[i].name + "' of type " +
                        std::string(to_string(t->attributes[i].type)));
    if (want == Value::Kind::kText) row[i].text = normalize_token(row[i].text);
  }
  rows_[t->name].push_back(std::move(row));
}

const std::vector<std::vector<Value>>& DatabaseInstance::rows(std::string_view table) const {
  auto it = rows_.find(table);
  if (it == rows_.end()) throw SchemaError("unknown table '" + std::string(table) + "'");
  return it->second;
}

void KnowledgeBase::add_node(KbNode node) {
  if (node.id.empty()) throw SchemaError("node id is empty");
  require_name(node.label, "entity label");
  if (node_by_id_.count(node.id)) throw SchemaError("duplicate node id '" + node.id + "'");
  if (node_by_label_.count(node.label))
    throw SchemaError("duplicate entity label '" + node.label + "'");
  for (auto& p : node.properties) {
    require_name(p.name, "property");
    p.value = normalized_property_value(p.value);
  }
  node_by_id_[node.id] = nodes_.size();
  node_by_label_[node.label] = nodes_.size();
  nodes_.push_back(std::move(node));
}

void KnowledgeBase::add_edge(KbEdge edge) {
  if (edge.id.empty()) throw SchemaError("edge id is empty");
  require_name(edge.label, "relation label");
  if (!find_node(edge.source))
    throw SchemaError("edge '" + edge.id + "' has unknown source '" + edge.source + "'");
  if (!find_node(edge.target))
    throw SchemaError("edge '" + edge.id + "' has unknown target '" + edge.target + "'");
  for (const auto& e : edges_)
    if (e.id == edge.id) throw SchemaError("duplicate edge id '" + edge.id + "'");
  for (auto& p : edge.properties) {
    require_name(p.name, "property");
    p.value = normalized_property_value(p.value);
  }
  edges_.push_back(std::move(edge));
}

const KbNode* KnowledgeBase::find_node(std::string_view id) const {
  auto it = node_by_id_.find(std::string(id));
  return it == node_by_id_.end() ? nullptr : &nodes_[it->second];
}

const KbNode* KnowledgeBase::find_node_by_label(std::string_view label) const {
  auto it = node_by_label_.find(std::string(label));
  return it == node_by_label_.end() ? nullptr : &nodes_[it->second];
}

bool KnowledgeBase::has_relation(std::string_view label) const {
  for (const auto& e : edges_)
    if (e.label == label) return true;
  return false;
}

bool KnowledgeBase::has_property(std::string_view name) const {
  for (const auto& n : nodes_)
    for (const auto& p : n.properties)
      if (p.name == name) return true;
  for (const auto& e : edges_)
    for (const auto& p : e.properties)
      if (p.name == name) return true;
  return false;
}

void KnowledgeBase::validate() const {
  std::map<std::string, SchemaKind> seen;
  auto record = [&](const std::string& token, SchemaKind kind) {
    auto [it, inserted] = seen.emplace(token, kind);
    if (!inserted && it->second != kind)
      throw SchemaError("token '" + token + "' is both " + std::string(to_string(it->second)) +
                        " and " + std::string(to_string(kind)));
  };
  auto props = [&](const std::vector<PropertyPair>& ps) {
    for (const auto& p : ps) {
      record(p.name, SchemaKind::kProperty);
      record(p.value.plain(), SchemaKind::kValue);
    }
  };
  for (const auto& n : nodes_) {
    record(n.label, SchemaKind::kEntityLabel);
    props(n.properties);
  }
  for (const auto& e : edges_) {
    record(e.label, SchemaKind::kRelationLabel);
    props(e.properties);
  }
}

std::string_view to_string(SchemaKind kind) {
  switch (kind) {
    case SchemaKind::kTable:
      return "table";
    case SchemaKind::kColumn:
      return "column";
    case SchemaKind::kEntityLabel:
      return "entity-label";
    case SchemaKind::kRelationLabel:
      return "relation-label";
    case SchemaKind::kProperty:
      return "property";
    case SchemaKind::kValue:
      return "value";
  }
  return "?";
}

void SchemaVocabulary::insert(const std::string& token, SchemaKind kind) {
  entries_.emplace(token, kind);
}

bool SchemaVocabulary::contains(std::string_view token) const {
  return entries_.find(token) != entries_.end();
}

std::optional<SchemaKind> SchemaVocabulary::kind_of(std::string_view token) const {
  auto it = entries_.find(token);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

SchemaVocabulary kb_vocabulary(const KnowledgeBase& kb) {
  SchemaVocabulary v;
  auto props = [&](const std::vector<PropertyPair>& ps) {
    for (const auto& p : ps) {
      v.insert(normalize_token(p.name), SchemaKind::kProperty);
      v.insert(normalize_token(p.value.plain()), SchemaKind::kValue);
    }
  };
  for (const auto& n : kb.nodes()) v.insert(normalize_token(n.label), SchemaKind::kEntityLabel);
  for (const auto& e : kb.edges()) v.insert(normalize_token(e.label), SchemaKind::kRelationLabel);
  for (const auto& n : kb.nodes()) props(n.properties);
  for (const auto& e : kb.edges()) props(e.properties);
  return v;
}

SchemaVocabulary db_vocabulary(const RelationalSchema& schema) {
  SchemaVocabulary v;
  for (const auto& t : schema.tables()) v.insert(normalize_token(t.name), SchemaKind::kTable);
  for (const auto& t : schema.tables())
    for (const auto& a : t.attributes) v.insert(normalize_token(a.name), SchemaKind::kColumn);
  return v;
}

SchemaVocabulary SchemaDocument::vocabulary() const {
  return is_kb() ? kb_vocabulary(kb()) : db_vocabulary(db().schema());
}

// ---------------------------------------------------------------------------
// JSON document format

namespace {

using nlohmann::json;

json value_to_json(const Value& v) {
  switch (v.kind) {
    case Value::Kind::kNull:
      return nullptr;
    case Value::Kind::kNumber:
      if (std::nearbyint(v.number) == v.number && std::fabs(v.number) < 9007199254740992.0)
        return static_cast<long long>(v.number);
      return v.number;
    case Value::Kind::kText:
    case Value::Kind::kEntity:
      return v.text;
  }
  return nullptr;
}

Value value_from_json(const json& j) {
  if (j.is_null()) return Value::null();
  if (j.is_number()) return Value::of_number(j.get<double>());
  if (j.is_string()) return Value::of_text(j.get<std::string>());
  throw SchemaError("unsupported value " + j.dump());
}

json properties_to_json(const std::vector<PropertyPair>& ps) {
  json arr = json::array();
  for (const auto& p : ps) arr.push_back({{"name", p.name}, {"value", value_to_json(p.value)}});
  return arr;
}

std::vector<PropertyPair> properties_from_json(const json& j) {
  std::vector<PropertyPair> out;
  if (j.is_null()) return out;
  for (const auto& p : j) out.push_back({p.at("name").get<std::string>(), value_from_json(p.at("value"))});
  return out;
}

}  // namespace

json schema_to_json(const SchemaDocument& doc) {
  json j;
  j["format"] = kSchemaFormatName;
  j["version"] = kSchemaFormatVersion;
  j["id"] = doc.id;
  if (doc.is_kb()) {
    const auto& kb = doc.kb();
    j["kind"] = "kb";
    json entities = json::array();
    for (const auto& n : kb.nodes())
      entities.push_back({{"id", n.id}, {"label", n.label}, {"properties", properties_to_json(n.properties)}});
    std::vector<std::string> relations;
    for (const auto& e : kb.edges())
      if (std::find(relations.begin(), relations.end(), e.label) == relations.end())
        relations.push_back(e.label);
    j["schema"] = {{"entities", entities}, {"relations", relations}};
    json triples = json::array();
    for (const auto& e : kb.edges())
      triples.push_back({{"id", e.id},
                         {"source", e.source},
                         {"label", e.label},
                         {"target", e.target},
                         {"properties", properties_to_json(e.properties)}});
    j["triples"] = triples;
  } else {
    const auto& db = doc.db();
    j["kind"] = "db";
    json tables = json::array();
    json rows = json::object();
    for (const auto& t : db.schema().tables()) {
      json attrs = json::array();
      for (const auto& a : t.attributes)
        attrs.push_back({{"name", a.name}, {"type", std::string(to_string(a.type))}});
      tables.push_back({{"name", t.name}, {"attributes", attrs}});
      json trs = json::array();
      for (const auto& r : db.rows(t.name)) {
        json row = json::array();
        for (const auto& v : r) row.push_back(value_to_json(v));
        trs.push_back(row);
      }
      rows[t.name] = trs;
    }
    j["schema"] = {{"tables", tables}};
    j["rows"] = rows;
  }
  return j;
}

SchemaDocument schema_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kSchemaFormatName)
      throw SchemaError("not an anchorparse schema document");
    const int version = j.at("version").get<int>();
    if (version != kSchemaFormatVersion)
      throw SchemaError("unsupported schema format version " + std::to_string(version));
    SchemaDocument doc;
    doc.id = j.at("id").get<std::string>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "kb") {
      KnowledgeBase kb;
      for (const auto& n : j.at("schema").at("entities"))
        kb.add_node({n.at("id").get<std::string>(), n.at("label").get<std::string>(),
                     properties_from_json(n.value("properties", json()))});
      for (const auto& e : j.at("triples"))
        kb.add_edge({e.at("id").get<std::string>(), e.at("source").get<std::string>(),
                     e.at("label").get<std::string>(), e.at("target").get<std::string>(),
                     properties_from_json(e.value("properties", json()))});
      kb.validate();
      doc.content = std::move(kb);
    } else if (kind == "db") {
      RelationalSchema schema;
      for (const auto& t : j.at("schema").at("tables")) {
        TableSchema ts;
        ts.name = t.at("name").get<std::string>();
        for (const auto& a : t.at("attributes"))
          ts.attributes.push_back({a.at("name").get<std::string>(),
                                   attribute_type_from_string(a.at("type").get<std::string>())});
        schema.add_table(std::move(ts));
      }
      DatabaseInstance db(schema);
      const json& rows = j.at("rows");
      for (const auto& t : schema.tables()) {
        if (!rows.contains(t.name)) continue;
        for (const auto& r : rows.at(t.name)) {
          std::vector<Value> row;
          for (const auto& v : r) row.push_back(value_from_json(v));
          db.add_row(t.name, std::move(row));
        }
      }
      doc.content = std::move(db);
    } else {
      throw SchemaError("unknown schema kind '" + kind + "'");
    }
    return doc;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed schema document: ") + e.what());
  }
}

}  // namespace anchorparse
