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

#include "anchorparse/wikisql.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anchorparse/executor.hpp"

namespace anchorparse {

namespace {

using nlohmann::json;

struct Skip {
  std::string reason;
};

struct IngestedTable {
  std::string schema_id;
  std::optional<DatabaseInstance> db;  // empty when the table itself is unusable
  std::string error;
};

std::optional<double> parse_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) return std::nullopt;
  const std::string s = v.get<std::string>();
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return d;
}

std::string text_of(const json& v) {
  if (v.is_string()) return normalize_token(v.get<std::string>());
  if (v.is_number()) return render_number(v.get<double>());
  return normalize_token(v.dump());
}

std::string sanitize_id(std::string s) {
  for (auto& c : s)
    if (c == '-') c = '_';
  return s;
}

IngestedTable convert_table(const json& t) {
  IngestedTable out;
  const std::string id = t.at("id").get<std::string>();
  out.schema_id = "wikisql_" + sanitize_id(id);
  try {
    TableSchema ts;
    ts.name = t.contains("name") ? normalize_token(t.at("name").get<std::string>()) : "table_" + sanitize_id(id);
    const auto& header = t.at("header");
    const auto& types = t.at("types");
    if (header.size() != types.size()) throw SchemaError("header and types differ in length");
    for (std::size_t i = 0; i < header.size(); ++i) {
      const std::string type = types[i].get<std::string>();
      ts.attributes.push_back({normalize_token(header[i].get<std::string>()),
                               type == "real" ? AttributeType::kNumber : AttributeType::kText});
    }
    RelationalSchema schema;
    schema.add_table(ts);
    DatabaseInstance db(schema);
    for (const auto& r : t.at("rows")) {
      if (r.size() != ts.attributes.size()) throw SchemaError("row arity mismatch");
      std::vector<Value> row;
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (ts.attributes[i].type == AttributeType::kNumber) {
          auto d = parse_number(r[i]);
          row.push_back(d ? Value::of_number(*d) : Value::null());
        } else {
          std::string s = text_of(r[i]);
          row.push_back(s.empty() ? Value::null() : Value::of_text(std::move(s)));
        }
      }
      db.add_row(ts.name, std::move(row));
    }
    out.db = std::move(db);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

TokenSequence question_tokens(const std::string& q) {
  TokenSequence out;
  std::istringstream in(q);
  std::string w;
  while (in >> w) {
    std::string lower = normalize_token(w);
    std::string trailing;
    while (!lower.empty() && (lower.back() == '?' || lower.back() == ',')) {
      trailing.insert(trailing.begin(), lower.back());
      lower.pop_back();
    }
    if (!lower.empty()) out.push_back(lower);
    for (char c : trailing) out.emplace_back(1, c);
  }
  return out;
}

}  // namespace

Aggregator wikisql_aggregator(int code) {
  switch (code) {
    case 0:
      return Aggregator::kNone;
    case 1:
      return Aggregator::kMax;
    case 2:
      return Aggregator::kMin;
    case 3:
      return Aggregator::kCount;
    case 4:
      return Aggregator::kSum;
    case 5:
      return Aggregator::kAvg;
    default:
      throw std::out_of_range("aggregator code " + std::to_string(code) + " outside 0..5");
  }
}

CompareOp wikisql_operator(int code) {
  switch (code) {
    case 0:
      return CompareOp::kEq;
    case 1:
      return CompareOp::kGt;
    case 2:
      return CompareOp::kLt;
    default:
      throw std::out_of_range("operator code " + std::to_string(code) + " outside 0..2");
  }
}

Corpus ingest_wikisql(const std::filesystem::path& tables_file, const std::filesystem::path& data_file,
                      const IngestOptions& options, IngestReport* report_out) {
  IngestReport report;
  std::map<std::string, IngestedTable> tables;
  {
    std::istringstream in(read_file(tables_file));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const json t = json::parse(line);
        const std::string id = t.at("id").get<std::string>();
        tables[id] = convert_table(t);
      } catch (const json::exception& e) {
        throw DataError(tables_file.string() + ":" + std::to_string(lineno) + ": malformed table: " + e.what());
      }
    }
  }

  Corpus corpus;
  std::map<std::string, SchemaVocabulary> vocabs;
  int next_id = options.first_id;
  std::istringstream in(read_file(data_file));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ++report.records;
    try {
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error&) {
        throw Skip{"unparseable json"};
      }
      if (!rec.is_object() || !rec.contains("table_id") || !rec.contains("question") || !rec.contains("sql"))
        throw Skip{"missing field"};
      const std::string table_id = rec.at("table_id").get<std::string>();
      auto tit = tables.find(table_id);
      if (tit == tables.end()) throw Skip{"unknown table"};
      if (!tit->second.db) throw Skip{"invalid table: " + tit->second.error};
      const DatabaseInstance& db = *tit->second.db;
      const TableSchema& ts = db.schema().tables().front();

      const json& sql = rec.at("sql");
      if (!sql.contains("sel") || !sql.contains("agg") || !sql.contains("conds")) throw Skip{"missing sql field"};
      SqlQuery q;
      q.table = ts.name;
      const int sel = sql.at("sel").get<int>();
      if (sel < 0 || static_cast<std::size_t>(sel) >= ts.attributes.size()) throw Skip{"select index out of range"};
      q.select_column = ts.attributes[sel].name;
      try {
        q.aggregator = wikisql_aggregator(sql.at("agg").get<int>());
      } catch (const std::out_of_range&) {
        throw Skip{"aggregator code out of range"};
      }
      if (sql.at("conds").size() > SqlQuery::kMaxConditions) throw Skip{"more than 4 conditions"};
      for (const auto& c : sql.at("conds")) {
        if (!c.is_array() || c.size() != 3) throw Skip{"malformed condition"};
        const int col = c[0].get<int>();
        if (col < 0 || static_cast<std::size_t>(col) >= ts.attributes.size()) throw Skip{"condition column out of range"};
        SqlCondition cond;
        cond.column = ts.attributes[col].name;
        try {
          cond.op = wikisql_operator(c[1].get<int>());
        } catch (const std::out_of_range&) {
          throw Skip{"operator code out of range"};
        }
        if (ts.attributes[col].type == AttributeType::kNumber) {
          auto d = parse_number(c[2]);
          if (!d) throw Skip{"non-numeric literal for numeric column"};
          cond.literal = Value::of_number(*d);
        } else {
          std::string s = text_of(c[2]);
          if (s.empty()) throw Skip{"empty literal"};
          cond.literal = Value::of_text(std::move(s));
        }
        q.conditions.push_back(std::move(cond));
      }
      if (q.aggregator == Aggregator::kSum || q.aggregator == Aggregator::kAvg) {
        if (ts.attributes[sel].type != AttributeType::kNumber) throw Skip{"numeric aggregate over text column"};
      }

      const TokenSequence main = serialize(q);
      auto reparsed = parse_sql(join_tokens(main));
      if (!reparsed || !(reparsed.value() == q)) throw Skip{"does not round-trip through the grammar"};
      try {
        execute_sql(q, db);
      } catch (const ExecutionError& e) {
        throw Skip{std::string("execution failed: ") + e.what()};
      }

      const std::string& ref = tit->second.schema_id;
      if (!corpus.has_schema(ref)) {
        corpus.add_schema({ref, db});
        vocabs[ref] = db_vocabulary(db.schema());
      }
      Example ex;
      ex.id = next_id++;
      ex.split = options.split;
      ex.dialect = Dialect::kSql;
      ex.shape = "wikisql_" + std::string(to_string(q.aggregator)) + "_" + std::to_string(q.conditions.size()) + "c";
      ex.schema_ref = ref;
      ex.utterance = question_tokens(rec.at("question").get<std::string>());
      if (ex.utterance.empty()) throw Skip{"empty question"};
      ex.targets = build_supervision_targets(main, vocabs.at(ref));
      corpus.add_example(std::move(ex));
      ++report.converted;
    } catch (const Skip& s) {
      ++report.skipped;
      ++report.skip_reasons[s.reason];
      std::clog << "ingest: skipping " << data_file.string() << ":" << lineno << ": " << s.reason << "\n";
    } catch (const json::exception& e) {
      ++report.skipped;
      ++report.skip_reasons["malformed field"];
      std::clog << "ingest: skipping " << data_file.string() << ":" << lineno << ": " << e.what() << "\n";
    }
  }
  if (report_out) *report_out = report;
  if (report.skip_rate() > options.max_skip_rate) {
    std::ostringstream msg;
    msg << report.skipped << " of " << report.records << " records malformed ("
        << report.skip_rate() * 100.0 << "%), above the " << options.max_skip_rate * 100.0 << "% limit";
    throw DataError(msg.str());
  }
  return corpus;
}

}  // namespace anchorparse
