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

#include "anchorparse/executor.hpp"

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>

namespace anchorparse {

namespace {

std::vector<std::string> canonical_rows(const ResultSet& r) {
  std::vector<std::string> out;
  out.reserve(r.rows.size());
  for (const auto& row : r.rows) {
    std::string key;
    for (const auto& v : row) {
      key += v.render();
      key.push_back('\x1f');
    }
    out.push_back(std::move(key));
  }
  std::sort(out.begin(), out.end());
  return out;
}

[[noreturn]] void schema_ref_error(const std::string& what) {
  throw ExecutionError(ExecutionError::Kind::kSchemaReference, what);
}

[[noreturn]] void type_error(const std::string& what) {
  throw ExecutionError(ExecutionError::Kind::kType, what);
}

// A constant in a triple slot read as a literal: numeric tokens become numbers.
Value constant_value(const std::string& token) {
  if (classify_token(token) == TokenClass::kNumber)
    return Value::of_number(std::strtod(token.c_str(), nullptr));
  return Value::of_text(token);
}

struct Fact {
  Value subject;
  std::string predicate;
  Value object;
};

using Bindings = std::map<std::string, Value>;

class SparqlJoin {
 public:
  SparqlJoin(const SparqlQuery& q, const KnowledgeBase& kb) : q_(q) {
    for (const auto& e : kb.edges())
      facts_.push_back({Value::of_entity(kb.find_node(e.source)->label), e.label,
                        Value::of_entity(kb.find_node(e.target)->label)});
    for (const auto& n : kb.nodes())
      for (const auto& p : n.properties) facts_.push_back({Value::of_entity(n.label), p.name, p.value});
    resolve(kb);
  }

  ResultSet run() {
    ResultSet out;
    out.header = q_.select;
    Bindings b;
    search(0, b, out);
    return out;
  }

 private:
  // Expected value for each constant slot; nullopt for variables.
  struct Resolved {
    std::optional<Value> s, o;
    std::optional<std::string> p;
  };

  void resolve(const KnowledgeBase& kb) {
    for (const auto& t : q_.triples) {
      Resolved r;
      bool is_relation = false;
      if (!t.predicate.is_variable) {
        is_relation = kb.has_relation(t.predicate.text);
        if (!is_relation && !kb.has_property(t.predicate.text))
          schema_ref_error("unknown relation or property '" + t.predicate.text + "'");
        r.p = t.predicate.text;
      }
      if (!t.subject.is_variable) {
        if (!kb.find_node_by_label(t.subject.text))
          schema_ref_error("unknown entity '" + t.subject.text + "'");
        r.s = Value::of_entity(t.subject.text);
      }
      if (!t.object.is_variable) {
        if (t.predicate.is_variable) {
          r.o = kb.find_node_by_label(t.object.text) ? Value::of_entity(t.object.text)
                                                     : constant_value(t.object.text);
        } else if (is_relation) {
          if (!kb.find_node_by_label(t.object.text))
            schema_ref_error("unknown entity '" + t.object.text + "'");
          r.o = Value::of_entity(t.object.text);
        } else {
          r.o = constant_value(t.object.text);
        }
      }
      resolved_.push_back(std::move(r));
    }
  }

  static bool unify(const SparqlTerm& term, const Value& v, Bindings& b,
                    std::vector<std::string>& added) {
    if (!term.is_variable) return true;
    auto it = b.find(term.text);
    if (it != b.end()) return it->second == v;
    b.emplace(term.text, v);
    added.push_back(term.text);
    return true;
  }

  void search(std::size_t depth, Bindings& b, ResultSet& out) {
    if (depth == q_.triples.size()) {
      for (const auto& f : q_.filters)
        if (!compare_values(b.at(f.variable), f.op, f.literal)) return;
      std::vector<Value> row;
      for (const auto& v : q_.select) row.push_back(b.at(v));
      out.rows.push_back(std::move(row));
      return;
    }
    const auto& t = q_.triples[depth];
    const auto& r = resolved_[depth];
    for (const auto& f : facts_) {
      if (r.p && f.predicate != *r.p) continue;
      if (r.s && !(f.subject == *r.s)) continue;
      if (r.o && !(f.object == *r.o)) continue;
      std::vector<std::string> added;
      const bool ok = unify(t.subject, f.subject, b, added) &&
                      unify(t.predicate, Value::of_text(f.predicate), b, added) &&
                      unify(t.object, f.object, b, added);
      if (ok) search(depth + 1, b, out);
      for (const auto& name : added) b.erase(name);
    }
  }

  const SparqlQuery& q_;
  std::vector<Fact> facts_;
  std::vector<Resolved> resolved_;
};

}  // namespace

bool result_equal(const ResultSet& a, const ResultSet& b) {
  if (a.header != b.header || a.rows.size() != b.rows.size()) return false;
  return canonical_rows(a) == canonical_rows(b);
}

bool compare_values(const Value& lhs, CompareOp op, const Value& rhs) {
  int cmp = 0;
  const bool lhs_num = lhs.kind == Value::Kind::kNumber;
  const bool rhs_num = rhs.kind == Value::Kind::kNumber;
  if (lhs.is_null() || rhs.is_null()) return false;
  if (lhs_num != rhs_num) return false;
  if (lhs_num) {
    cmp = lhs.number < rhs.number ? -1 : (lhs.number > rhs.number ? 1 : 0);
  } else {
    cmp = lhs.text.compare(rhs.text);
    cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
  }
  switch (op) {
    case CompareOp::kEq:
      return cmp == 0;
    case CompareOp::kGt:
      return cmp > 0;
    case CompareOp::kLt:
      return cmp < 0;
  }
  return false;
}

ResultSet execute_sql(const SqlQuery& q, const DatabaseInstance& db) {
  const TableSchema* table = db.schema().find_table(q.table);
  if (!table) schema_ref_error("unknown table '" + q.table + "'");
  auto column = [&](const std::string& name) {
    auto idx = table->column_index(name);
    if (!idx) schema_ref_error("unknown column '" + name + "' in table '" + q.table + "'");
    return *idx;
  };
  const std::size_t sel = column(q.select_column);
  std::vector<std::size_t> cond_cols;
  for (const auto& c : q.conditions) {
    const std::size_t idx = column(c.column);
    const bool numeric = table->attributes[idx].type == AttributeType::kNumber;
    if (numeric != (c.literal.kind == Value::Kind::kNumber))
      type_error("literal " + c.literal.render() + " does not match column '" + c.column + "'");
    cond_cols.push_back(idx);
  }
  const bool sel_numeric = table->attributes[sel].type == AttributeType::kNumber;
  if ((q.aggregator == Aggregator::kSum || q.aggregator == Aggregator::kAvg) && !sel_numeric)
    type_error(std::string(to_string(q.aggregator)) + " over text column '" + q.select_column + "'");

  std::vector<Value> selected;
  for (const auto& row : db.rows(q.table)) {
    bool keep = true;
    for (std::size_t i = 0; i < q.conditions.size() && keep; ++i)
      keep = compare_values(row[cond_cols[i]], q.conditions[i].op, q.conditions[i].literal);
    if (keep) selected.push_back(row[sel]);
  }

  ResultSet out;
  if (q.aggregator == Aggregator::kNone) {
    out.header = {q.select_column};
    for (auto& v : selected) out.rows.push_back({std::move(v)});
    return out;
  }
  out.header = {std::string(to_string(q.aggregator)) + "(" + q.select_column + ")"};
  if (q.aggregator == Aggregator::kCount) {
    out.rows.push_back({Value::of_number(static_cast<double>(selected.size()))});
    return out;
  }
  std::vector<Value> present;
  for (auto& v : selected)
    if (!v.is_null()) present.push_back(std::move(v));
  if (present.empty()) {
    out.rows.push_back({Value::null()});
    return out;
  }
  Value result;
  switch (q.aggregator) {
    case Aggregator::kSum:
    case Aggregator::kAvg: {
      double total = 0.0;
      for (const auto& v : present) total += v.number;
      result = Value::of_number(q.aggregator == Aggregator::kSum
                                    ? total
                                    : total / static_cast<double>(present.size()));
      break;
    }
    case Aggregator::kMax:
    case Aggregator::kMin: {
      const CompareOp better = q.aggregator == Aggregator::kMax ? CompareOp::kGt : CompareOp::kLt;
      result = present.front();
      for (const auto& v : present)
        if (compare_values(v, better, result)) result = v;
      break;
    }
    default:
      break;
  }
  out.rows.push_back({std::move(result)});
  return out;
}

ResultSet execute_sparql(const SparqlQuery& q, const KnowledgeBase& kb) {
  return SparqlJoin(q, kb).run();
}

ResultSet execute(const LogicalForm& q, const SchemaDocument& schema) {
  if (const auto* sql = std::get_if<SqlQuery>(&q)) {
    if (schema.is_kb()) schema_ref_error("SQL query against knowledge base '" + schema.id + "'");
    return execute_sql(*sql, schema.db());
  }
  if (!schema.is_kb()) schema_ref_error("SPARQL query against database '" + schema.id + "'");
  return execute_sparql(std::get<SparqlQuery>(q), schema.kb());
}

}  // namespace anchorparse
