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

// SQL-subset and SPARQL-subset logical forms: lexer, recursive-descent
// parsers and canonical serializers.
//
//   sql    := select sel from IDENT [where cond (and cond){0,3}]
//   sel    := AGG ( IDENT ) | IDENT          AGG in {max,min,count,sum,avg}
//   cond   := IDENT OP literal               OP in {=,>,<}
//   literal:= NUMBER | 'quoted text'
//
//   sparql := select VAR+ where { item* }
//   item   := (triple | filter) [.]
//   triple := term term term                 term := VAR | IDENT | NUMBER
//   filter := filter ( VAR OP (NUMBER | IDENT | 'quoted text') )
//
// Tokens are whitespace-delimited; a quoted literal may span whitespace.
// Canonical text is the serialized tokens joined by single spaces.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "anchorparse/schema.hpp"

namespace anchorparse {

using TokenSequence = std::vector<std::string>;

inline constexpr std::string_view kPadToken = "<PAD>";
inline constexpr std::string_view kBosToken = "<BOS>";
inline constexpr std::string_view kEosToken = "<EOS>";
inline constexpr std::string_view kSepToken = "<SEP>";
inline constexpr std::string_view kMaskToken = "<MASK>";
inline constexpr std::string_view kUnkToken = "<UNK>";

bool is_special_token(std::string_view token);

enum class TokenClass { kKeyword, kPunct, kOperator, kNumber, kQuoted, kVariable, kIdentifier };

struct LexToken {
  std::string text;  // canonical spelling
  TokenClass cls = TokenClass::kIdentifier;
  std::size_t offset = 0;  // byte offset in the source
};

// Class of a token that is already canonical (e.g. drawn from a serialized
// sequence). Special tokens classify as kPunct.
TokenClass classify_token(std::string_view token);

struct ParseError {
  enum class Kind { kLexical, kSyntax, kSemantic };
  Kind kind = Kind::kSyntax;
  std::size_t token_index = 0;  // 0-based; the message reports it 1-based
  std::size_t offset = 0;
  std::string expected;
  std::string found;

  std::string message() const;
};

template <class T>
class ParseResult {
 public:
  ParseResult(T value) : v_(std::move(value)) {}             // NOLINT
  ParseResult(ParseError error) : v_(std::move(error)) {}    // NOLINT

  bool ok() const { return v_.index() == 0; }
  explicit operator bool() const { return ok(); }
  const T& value() const { return std::get<0>(v_); }
  T& value() { return std::get<0>(v_); }
  const ParseError& error() const { return std::get<1>(v_); }

 private:
  std::variant<T, ParseError> v_;
};

ParseResult<std::vector<LexToken>> lex(std::string_view text);

enum class Aggregator { kNone, kMax, kMin, kCount, kSum, kAvg };
enum class CompareOp { kEq, kGt, kLt };

std::string_view to_string(Aggregator agg);
std::string_view to_string(CompareOp op);

struct SqlCondition {
  std::string column;
  CompareOp op = CompareOp::kEq;
  Value literal;  // kNumber or kText

  friend bool operator==(const SqlCondition&, const SqlCondition&) = default;
};

struct SqlQuery {
  static constexpr std::size_t kMaxConditions = 4;

  Aggregator aggregator = Aggregator::kNone;
  std::string select_column;
  std::string table;
  std::vector<SqlCondition> conditions;

  friend bool operator==(const SqlQuery&, const SqlQuery&) = default;
};

struct SparqlTerm {
  bool is_variable = false;
  std::string text;  // "?x" for variables, canonical token otherwise

  static SparqlTerm variable(std::string name) { return {true, std::move(name)}; }
  static SparqlTerm constant(std::string token) { return {false, std::move(token)}; }
  friend bool operator==(const SparqlTerm&, const SparqlTerm&) = default;
};

struct TriplePattern {
  SparqlTerm subject, predicate, object;
  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;
};

struct SparqlFilter {
  std::string variable;
  CompareOp op = CompareOp::kEq;
  Value literal;  // kNumber or kText
  friend bool operator==(const SparqlFilter&, const SparqlFilter&) = default;
};

struct SparqlQuery {
  std::vector<std::string> select;
  std::vector<TriplePattern> triples;
  std::vector<SparqlFilter> filters;
  friend bool operator==(const SparqlQuery&, const SparqlQuery&) = default;
};

enum class Dialect { kSql, kSparql };
std::string_view to_string(Dialect d);
Dialect dialect_from_string(std::string_view s);

using LogicalForm = std::variant<SqlQuery, SparqlQuery>;

ParseResult<SqlQuery> parse_sql(std::string_view text);
ParseResult<SparqlQuery> parse_sparql(std::string_view text);
ParseResult<LogicalForm> parse_logical_form(std::string_view text, Dialect dialect);

// Role a serialized token plays in the AST; used to report schema slots.
enum class SlotRole { kTable, kColumn, kSubject, kPredicate, kObject };

struct SchemaSlot {
  std::size_t position = 0;
  SlotRole role = SlotRole::kColumn;
};

struct Serialized {
  TokenSequence tokens;
  std::vector<SchemaSlot> slots;  // ascending positions
};

Serialized serialize_with_slots(const SqlQuery& q);
Serialized serialize_with_slots(const SparqlQuery& q);
TokenSequence serialize(const SqlQuery& q);
TokenSequence serialize(const SparqlQuery& q);
TokenSequence serialize(const LogicalForm& q);

std::string join_tokens(const TokenSequence& tokens);
// Splits on single spaces; the inverse of join_tokens for canonical text.
TokenSequence split_tokens(std::string_view text);

}  // namespace anchorparse
