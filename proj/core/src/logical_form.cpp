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

#include "anchorparse/logical_form.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <optional>
#include <set>

namespace anchorparse {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool looks_numeric(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '-') ++i;
  const std::size_t int_start = i;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i == int_start) return false;
  if (i < s.size() && s[i] == '.') {
    ++i;
    const std::size_t frac_start = i;
    while (i < s.size() && is_digit(s[i])) ++i;
    if (i == frac_start) return false;
  }
  return i == s.size();
}

bool is_operator(std::string_view s) { return s == "=" || s == ">" || s == "<"; }
bool is_punct(std::string_view s) { return s == "(" || s == ")" || s == "{" || s == "}" || s == "."; }

bool is_aggregator_word(std::string_view s) {
  return s == "max" || s == "min" || s == "count" || s == "sum" || s == "avg";
}

Aggregator aggregator_from_word(std::string_view s) {
  if (s == "max") return Aggregator::kMax;
  if (s == "min") return Aggregator::kMin;
  if (s == "count") return Aggregator::kCount;
  if (s == "sum") return Aggregator::kSum;
  return Aggregator::kAvg;
}

CompareOp op_from_token(std::string_view s) {
  if (s == ">") return CompareOp::kGt;
  if (s == "<") return CompareOp::kLt;
  return CompareOp::kEq;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

std::string describe(const LexToken* t) { return t ? "'" + t->text + "'" : "end of input"; }

ParseError lexical(std::size_t index, std::size_t offset, std::string expected, std::string found) {
  return {ParseError::Kind::kLexical, index, offset, std::move(expected), std::move(found)};
}

struct Failure {
  ParseError error;
};

class TokenCursor {
 public:
  TokenCursor(const std::vector<LexToken>& tokens, std::size_t source_size)
      : tokens_(tokens), source_size_(source_size) {}

  const LexToken* peek(std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() ? &tokens_[pos_ + ahead] : nullptr;
  }
  bool at_end() const { return pos_ >= tokens_.size(); }
  std::size_t position() const { return pos_; }

  bool peek_is(TokenClass cls, std::string_view text = {}) const {
    const LexToken* t = peek();
    return t && t->cls == cls && (text.empty() || t->text == text);
  }

  const LexToken& expect(TokenClass cls, std::string_view text, const std::string& what) {
    if (!peek_is(cls, text)) fail(what);
    return tokens_[pos_++];
  }

  [[noreturn]] void fail(const std::string& expected) const {
    const LexToken* t = peek();
    throw Failure{{ParseError::Kind::kSyntax, pos_, t ? t->offset : source_size_, expected, describe(t)}};
  }

  void expect_end() const {
    if (!at_end()) fail("end of query");
  }

 private:
  const std::vector<LexToken>& tokens_;
  std::size_t source_size_;
  std::size_t pos_ = 0;
};

Value literal_value(const LexToken& t) {
  if (t.cls == TokenClass::kNumber) return Value::of_number(std::strtod(t.text.c_str(), nullptr));
  if (t.cls == TokenClass::kQuoted) return Value::of_text(t.text.substr(1, t.text.size() - 2));
  return Value::of_text(t.text);
}

std::string render_literal(const Value& v, bool allow_bare_text) {
  if (v.kind == Value::Kind::kNumber) return render_number(v.number);
  if (allow_bare_text && classify_token(v.text) == TokenClass::kIdentifier) return v.text;
  return "'" + v.text + "'";
}

}  // namespace

bool is_special_token(std::string_view token) {
  return token == kPadToken || token == kBosToken || token == kEosToken || token == kSepToken ||
         token == kMaskToken || token == kUnkToken;
}

TokenClass classify_token(std::string_view token) {
  if (is_special_token(token)) return TokenClass::kPunct;
  if (token.size() >= 2 && token.front() == '\'' && token.back() == '\'') return TokenClass::kQuoted;
  if (token.size() >= 2 && token.front() == '?') return TokenClass::kVariable;
  if (is_reserved_word(token)) return TokenClass::kKeyword;
  if (is_operator(token)) return TokenClass::kOperator;
  if (is_punct(token)) return TokenClass::kPunct;
  if (looks_numeric(token)) return TokenClass::kNumber;
  return TokenClass::kIdentifier;
}

std::string ParseError::message() const {
  const char* kind_name = kind == Kind::kLexical ? "lexical error"
                          : kind == Kind::kSyntax ? "syntax error"
                                                  : "semantic error";
  return std::string(kind_name) + " at token " + std::to_string(token_index + 1) + " (offset " +
         std::to_string(offset) + "): expected " + expected + ", found " + found;
}

ParseResult<std::vector<LexToken>> lex(std::string_view text) {
  std::vector<LexToken> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_ws(text[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    const std::size_t index = out.size();
    if (text[i] == '\'') {
      std::size_t j = i + 1;
      while (j < text.size() && !(text[j] == '\'' && (j + 1 == text.size() || is_ws(text[j + 1])))) ++j;
      if (j >= text.size())
        return lexical(index, start, "closing quote", "end of input");
      std::string content = normalize_token(text.substr(i + 1, j - i - 1));
      if (content.empty()) return lexical(index, start, "non-empty quoted literal", "''");
      out.push_back({"'" + content + "'", TokenClass::kQuoted, start});
      i = j + 1;
      continue;
    }
    while (i < text.size() && !is_ws(text[i])) ++i;
    const std::string_view chunk = text.substr(start, i - start);
    for (char c : chunk) {
      const auto u = static_cast<unsigned char>(c);
      if (u < 0x20 || u == 0x7f || c == '"')
        return lexical(index, start, "token", "unexpected character in '" + std::string(chunk) + "'");
    }
    if (is_special_token(chunk))
      return lexical(index, start, "token", "reserved special token '" + std::string(chunk) + "'");
    if (is_operator(chunk)) {
      out.push_back({std::string(chunk), TokenClass::kOperator, start});
    } else if (chunk.front() == '<' || chunk.front() == '>' || chunk.front() == '=') {
      return lexical(index, start, "operator", "'" + std::string(chunk) + "'");
    } else if (is_punct(chunk)) {
      out.push_back({std::string(chunk), TokenClass::kPunct, start});
    } else if (chunk.front() == '?') {
      std::string name = lowercase(chunk);
      bool valid = name.size() >= 2;
      for (std::size_t k = 1; k < name.size(); ++k) {
        const char c = name[k];
        valid = valid && ((c >= 'a' && c <= 'z') || is_digit(c) || c == '_');
      }
      if (!valid) return lexical(index, start, "variable", "'" + std::string(chunk) + "'");
      out.push_back({name, TokenClass::kVariable, start});
    } else if (looks_numeric(chunk)) {
      out.push_back({render_number(std::strtod(std::string(chunk).c_str(), nullptr)), TokenClass::kNumber, start});
    } else {
      std::string word = lowercase(chunk);
      const TokenClass cls = is_reserved_word(word) ? TokenClass::kKeyword : TokenClass::kIdentifier;
      out.push_back({cls == TokenClass::kKeyword ? word : normalize_token(chunk), cls, start});
    }
  }
  return out;
}

std::string_view to_string(Aggregator agg) {
  switch (agg) {
    case Aggregator::kNone:
      return "none";
    case Aggregator::kMax:
      return "max";
    case Aggregator::kMin:
      return "min";
    case Aggregator::kCount:
      return "count";
    case Aggregator::kSum:
      return "sum";
    case Aggregator::kAvg:
      return "avg";
  }
  return "none";
}

std::string_view to_string(CompareOp op) {
  switch (op) {
    case CompareOp::kEq:
      return "=";
    case CompareOp::kGt:
      return ">";
    case CompareOp::kLt:
      return "<";
  }
  return "=";
}

std::string_view to_string(Dialect d) { return d == Dialect::kSql ? "sql" : "sparql"; }

Dialect dialect_from_string(std::string_view s) {
  if (s == "sql") return Dialect::kSql;
  if (s == "sparql") return Dialect::kSparql;
  throw std::invalid_argument("unknown dialect '" + std::string(s) + "'");
}

ParseResult<SqlQuery> parse_sql(std::string_view text) {
  auto lexed = lex(text);
  if (!lexed) return lexed.error();
  TokenCursor cur(lexed.value(), text.size());
  try {
    SqlQuery q;
    cur.expect(TokenClass::kKeyword, "select", "'select'");
    const LexToken* t = cur.peek();
    const LexToken* next = cur.peek(1);
    if (t && t->cls == TokenClass::kIdentifier && is_aggregator_word(t->text) && next &&
        next->cls == TokenClass::kPunct && next->text == "(") {
      q.aggregator = aggregator_from_word(t->text);
      cur.expect(TokenClass::kIdentifier, {}, "aggregator");
      cur.expect(TokenClass::kPunct, "(", "'('");
      q.select_column = cur.expect(TokenClass::kIdentifier, {}, "column name").text;
      cur.expect(TokenClass::kPunct, ")", "')'");
    } else {
      q.select_column = cur.expect(TokenClass::kIdentifier, {}, "column name").text;
    }
    cur.expect(TokenClass::kKeyword, "from", "'from'");
    q.table = cur.expect(TokenClass::kIdentifier, {}, "table name").text;
    if (cur.peek_is(TokenClass::kKeyword, "where")) {
      cur.expect(TokenClass::kKeyword, "where", "'where'");
      while (true) {
        if (q.conditions.size() == SqlQuery::kMaxConditions) cur.fail("end of query (at most 4 conditions)");
        SqlCondition c;
        c.column = cur.expect(TokenClass::kIdentifier, {}, "column name").text;
        c.op = op_from_token(cur.expect(TokenClass::kOperator, {}, "comparison operator").text);
        if (!cur.peek_is(TokenClass::kNumber) && !cur.peek_is(TokenClass::kQuoted))
          cur.fail("literal");
        c.literal = literal_value(*cur.peek());
        cur.expect(cur.peek()->cls, {}, "literal");
        q.conditions.push_back(std::move(c));
        if (!cur.peek_is(TokenClass::kKeyword, "and")) break;
        cur.expect(TokenClass::kKeyword, "and", "'and'");
      }
    }
    cur.expect_end();
    return q;
  } catch (const Failure& f) {
    return f.error;
  }
}

ParseResult<SparqlQuery> parse_sparql(std::string_view text) {
  auto lexed = lex(text);
  if (!lexed) return lexed.error();
  const auto& toks = lexed.value();
  TokenCursor cur(toks, text.size());
  try {
    SparqlQuery q;
    std::vector<std::size_t> select_pos;
    cur.expect(TokenClass::kKeyword, "select", "'select'");
    do {
      select_pos.push_back(cur.position());
      q.select.push_back(cur.expect(TokenClass::kVariable, {}, "variable").text);
    } while (cur.peek_is(TokenClass::kVariable));
    cur.expect(TokenClass::kKeyword, "where", "'where'");
    cur.expect(TokenClass::kPunct, "{", "'{'");
    std::vector<std::size_t> filter_pos;
    while (!cur.peek_is(TokenClass::kPunct, "}")) {
      if (cur.peek_is(TokenClass::kKeyword, "filter")) {
        cur.expect(TokenClass::kKeyword, "filter", "'filter'");
        cur.expect(TokenClass::kPunct, "(", "'('");
        SparqlFilter f;
        filter_pos.push_back(cur.position());
        f.variable = cur.expect(TokenClass::kVariable, {}, "variable").text;
        f.op = op_from_token(cur.expect(TokenClass::kOperator, {}, "comparison operator").text);
        if (!cur.peek_is(TokenClass::kNumber) && !cur.peek_is(TokenClass::kQuoted) &&
            !cur.peek_is(TokenClass::kIdentifier))
          cur.fail("literal");
        f.literal = literal_value(*cur.peek());
        cur.expect(cur.peek()->cls, {}, "literal");
        cur.expect(TokenClass::kPunct, ")", "')'");
        q.filters.push_back(std::move(f));
      } else {
        auto term = [&]() {
          const LexToken* t = cur.peek();
          if (!t || (t->cls != TokenClass::kVariable && t->cls != TokenClass::kIdentifier &&
                     t->cls != TokenClass::kNumber))
            cur.fail("triple term or '}'");
          cur.expect(t->cls, {}, "triple term");
          return t->cls == TokenClass::kVariable ? SparqlTerm::variable(t->text)
                                                 : SparqlTerm::constant(t->text);
        };
        TriplePattern p;
        p.subject = term();
        p.predicate = term();
        p.object = term();
        q.triples.push_back(std::move(p));
      }
      if (cur.peek_is(TokenClass::kPunct, ".")) cur.expect(TokenClass::kPunct, ".", "'.'");
    }
    cur.expect(TokenClass::kPunct, "}", "'}'");
    cur.expect_end();

    std::set<std::string> bound;
    for (const auto& p : q.triples)
      for (const auto* t : {&p.subject, &p.predicate, &p.object})
        if (t->is_variable) bound.insert(t->text);
    auto check = [&](const std::string& var, std::size_t pos) -> std::optional<ParseError> {
      if (bound.count(var)) return std::nullopt;
      return ParseError{ParseError::Kind::kSemantic, pos, toks[pos].offset,
                        "variable bound by a triple pattern", "'" + var + "'"};
    };
    for (std::size_t i = 0; i < q.select.size(); ++i)
      if (auto e = check(q.select[i], select_pos[i])) return *e;
    for (std::size_t i = 0; i < q.filters.size(); ++i)
      if (auto e = check(q.filters[i].variable, filter_pos[i])) return *e;
    return q;
  } catch (const Failure& f) {
    return f.error;
  }
}

ParseResult<LogicalForm> parse_logical_form(std::string_view text, Dialect dialect) {
  if (dialect == Dialect::kSql) {
    auto r = parse_sql(text);
    if (!r) return r.error();
    return LogicalForm(std::move(r.value()));
  }
  auto r = parse_sparql(text);
  if (!r) return r.error();
  return LogicalForm(std::move(r.value()));
}

Serialized serialize_with_slots(const SqlQuery& q) {
  Serialized s;
  auto& t = s.tokens;
  auto slot = [&](SlotRole role) { s.slots.push_back({t.size() - 1, role}); };
  t.emplace_back("select");
  if (q.aggregator != Aggregator::kNone) {
    t.emplace_back(to_string(q.aggregator));
    t.emplace_back("(");
    t.push_back(q.select_column);
    slot(SlotRole::kColumn);
    t.emplace_back(")");
  } else {
    t.push_back(q.select_column);
    slot(SlotRole::kColumn);
  }
  t.emplace_back("from");
  t.push_back(q.table);
  slot(SlotRole::kTable);
  for (std::size_t i = 0; i < q.conditions.size(); ++i) {
    const auto& c = q.conditions[i];
    t.emplace_back(i == 0 ? "where" : "and");
    t.push_back(c.column);
    slot(SlotRole::kColumn);
    t.emplace_back(to_string(c.op));
    t.push_back(render_literal(c.literal, false));
  }
  return s;
}

Serialized serialize_with_slots(const SparqlQuery& q) {
  Serialized s;
  auto& t = s.tokens;
  t.emplace_back("select");
  for (const auto& v : q.select) t.push_back(v);
  t.emplace_back("where");
  t.emplace_back("{");
  for (std::size_t i = 0; i < q.triples.size(); ++i) {
    if (i > 0) t.emplace_back(".");
    const auto& p = q.triples[i];
    const std::array<std::pair<const SparqlTerm*, SlotRole>, 3> terms = {
        std::pair{&p.subject, SlotRole::kSubject}, std::pair{&p.predicate, SlotRole::kPredicate},
        std::pair{&p.object, SlotRole::kObject}};
    for (const auto& [term, role] : terms) {
      t.push_back(term->text);
      if (!term->is_variable) s.slots.push_back({t.size() - 1, role});
    }
  }
  for (const auto& f : q.filters) {
    t.emplace_back("filter");
    t.emplace_back("(");
    t.push_back(f.variable);
    t.emplace_back(to_string(f.op));
    t.push_back(render_literal(f.literal, true));
    t.emplace_back(")");
  }
  t.emplace_back("}");
  return s;
}

TokenSequence serialize(const SqlQuery& q) { return serialize_with_slots(q).tokens; }
TokenSequence serialize(const SparqlQuery& q) { return serialize_with_slots(q).tokens; }
TokenSequence serialize(const LogicalForm& q) {
  return std::visit([](const auto& x) { return serialize(x); }, q);
}

std::string join_tokens(const TokenSequence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

TokenSequence split_tokens(std::string_view text) {
  TokenSequence out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

}  // namespace anchorparse
