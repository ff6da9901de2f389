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

#include "anchorparse/datagen.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <set>

#include "anchorparse/anchors.hpp"
#include "anchorparse/errors.hpp"
#include "anchorparse/executor.hpp"

namespace anchorparse {

namespace {

// Word pools. Every pool is disjoint from every other and from the reserved
// and aggregator words, so schema kinds never collide.
constexpr std::array<std::string_view, 24> kTables = {
    "company", "player", "city",    "film",     "book",     "ship",       "team",     "school",
    "airport", "museum", "song",    "hotel",    "restaurant", "hospital", "station",  "library",
    "park",    "bridge", "stadium", "university", "festival", "mountain", "lake",     "album"};
constexpr std::array<std::string_view, 16> kNumberColumns = {
    "founded", "population", "height", "age",    "year",    "price",     "rank", "score",
    "capacity", "length",    "weight", "budget", "revenue", "elevation", "area", "wins"};
constexpr std::array<std::string_view, 11> kTextColumns = {
    "country", "color", "genre", "owner", "position", "director",
    "language", "region", "status", "category", "manager"};
constexpr std::array<std::string_view, 30> kNameValues = {
    "alpha", "bravo", "charlie", "delta",  "echo",  "foxtrot", "kilo",  "lima",  "mike",  "november",
    "papa",  "quebec", "romeo",  "sierra", "tango", "uniform", "whiskey", "xray", "yankee", "zulu",
    "amber", "coral", "jade",    "onyx",   "pearl", "ruby",    "topaz", "opal",  "ivory", "ebony"};
constexpr std::array<std::string_view, 24> kTextValues = {
    "sweden", "norway", "finland", "denmark", "france", "spain",  "red",    "blue",
    "green",  "yellow", "black",   "white",   "north",  "south",  "east",   "west",
    "active", "closed", "pending", "rock",    "jazz",   "pop",    "drama",  "comedy"};

constexpr std::array<std::string_view, 60> kEntities = {
    "saab",    "volvo",  "scania",  "ikea",     "nokia",   "lego",     "ericsson", "spotify",
    "klarna",  "skype",  "oslo",    "berlin",   "paris",   "madrid",   "lisbon",   "vienna",
    "prague",  "warsaw", "dublin",  "athens",   "alice",   "bob",      "carol",    "dave",
    "erin",    "frank",  "grace",   "heidi",    "ivan",    "judy",     "oscar",    "peggy",
    "trent",   "victor", "walter",  "nile",     "danube",  "rhine",    "volga",    "thames",
    "seine",   "everest", "fuji",   "etna",     "titanic", "vasa",     "endeavour", "beagle",
    "apollo",  "gemini", "orion",   "vega",     "sirius",  "rigel",    "altair",   "hamlet",
    "macbeth", "othello", "odyssey", "iliad"};
constexpr std::array<std::string_view, 16> kRelations = {
    "produced_by", "located_in", "founded_by", "member_of", "part_of",    "owned_by",
    "directed_by", "written_by", "married_to", "born_in",   "capital_of", "plays_for",
    "works_for",   "adjacent_to", "child_of",  "allied_with"};
constexpr std::array<std::string_view, 7> kNumberProperties = {
    "inception", "employees", "rating", "birth_year", "mass", "speed", "floors"};
constexpr std::array<std::string_view, 3> kTextProperties = {"nationality", "sector", "style"};
constexpr std::array<std::string_view, 20> kKbTextValues = {
    "swedish",    "german",  "french",   "italian",  "danish",  "finnish", "dutch",
    "polish",     "automotive", "banking", "retail", "telecom", "shipping", "gothic",
    "baroque",    "modern",  "classic",  "rustic",   "minimal", "ornate"};

constexpr int kMaxNumber = 99;

std::vector<TemplateEntry> build_templates() {
  return {
      {"sql", "none", {"which {col} of {table}", "list the {col} of {table}", "show {col} from {table}",
                       "what {col} does {table} have"}},
      {"sql", "count", {"how many {col} values in {table}", "count of {col} in {table}",
                        "number of {col} entries in {table}"}},
      {"sql", "max", {"what is the maximum {col} of {table}", "highest {col} in {table}",
                      "largest {col} among {table}"}},
      {"sql", "min", {"what is the minimum {col} of {table}", "lowest {col} in {table}",
                      "smallest {col} among {table}"}},
      {"sql", "sum", {"what is the total {col} of {table}", "sum of {col} in {table}",
                      "combined {col} across {table}"}},
      {"sql", "avg", {"what is the average {col} of {table}", "mean {col} in {table}",
                      "typical {col} across {table}"}},
      {"sql", "connector", {"has", "where", "with", "whose"}},
      {"any", "op=", {"is", "equals", "equal to"}},
      {"any", "op>", {"greater than", "above", "more than", "over"}},
      {"any", "op<", {"less than", "below", "under", "fewer than"}},
      {"sparql", "subj_of", {"which entity has {pred} {obj}", "what has {pred} {obj}",
                             "find everything with {pred} {obj}"}},
      {"sparql", "obj_of", {"what is the {pred} of {subj}", "give the {pred} of {subj}",
                            "tell me the {pred} of {subj}"}},
      {"sparql", "prop_filter", {"which entity has {prop} {op} {v}", "what has a {prop} {op} {v}",
                                 "find everything whose {prop} is {op} {v}"}},
      {"sparql", "join", {"what is the {prop} of entities with {rel} {ent}",
                          "give the {prop} of everything that has {rel} {ent}"}},
      {"sparql", "join_filter", {"which entity with {rel} {ent} has {prop} {op} {v}",
                                 "what has {rel} {ent} and a {prop} {op} {v}"}},
      {"sparql", "pairs", {"list all pairs connected by {rel}", "which entities are linked by {rel}",
                           "show every {rel} pair"}},
      {"sparql", "chain", {"what is the {rel2} of the {rel} of {ent}",
                           "give the {rel2} of the {rel} of {ent}"}},
  };
}

const TemplateEntry& entry(std::string_view shape) {
  for (const auto& e : template_table())
    if (e.shape == shape) return e;
  throw ContractError("no template for shape '" + std::string(shape) + "'");
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::size_t uniform_in(Rng& rng, IntRange r) {
  return std::uniform_int_distribution<std::size_t>(r.min, r.max)(rng);
}

bool bernoulli(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

std::string_view pick_phrasing(std::string_view shape, double rate, Rng& rng) {
  const auto& e = entry(shape);
  if (e.phrasings.size() > 1 && bernoulli(rng, rate)) return e.phrasings[uniform_index(rng, e.phrasings.size())];
  return e.phrasings.front();
}

template <std::size_t N>
std::vector<std::string> sample_without_replacement(const std::array<std::string_view, N>& pool,
                                                    std::size_t k, Rng& rng) {
  std::vector<std::string> all(pool.begin(), pool.end());
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(k, all.size()));
  return all;
}

std::string fill(std::string_view pattern, const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      const std::size_t close = pattern.find('}', i);
      const std::string key(pattern.substr(i + 1, close - i - 1));
      auto it = slots.find(key);
      if (it == slots.end()) throw ContractError("template slot {" + key + "} has no filler");
      out += it->second;
      i = close + 1;
    } else {
      out.push_back(pattern[i++]);
    }
  }
  return out;
}

std::string op_phrase(CompareOp op, double rate, Rng& rng) {
  const std::string shape = "op" + std::string(to_string(op));
  return std::string(pick_phrasing(shape, rate, rng));
}

std::string aggregator_shape(Aggregator a) {
  return a == Aggregator::kNone ? "none" : std::string(to_string(a));
}

Value random_number(Rng& rng) {
  return Value::of_number(static_cast<double>(std::uniform_int_distribution<int>(1, kMaxNumber)(rng)));
}

// A threshold strictly below (op >) or above (op <) `anchor`, so the row
// holding `anchor` satisfies the comparison.
double threshold_for(double anchor, CompareOp op, Rng& rng) {
  const int gap = std::uniform_int_distribution<int>(1, 15)(rng);
  if (op == CompareOp::kGt) return std::max(0.0, anchor - gap);
  if (op == CompareOp::kLt) return std::min(static_cast<double>(kMaxNumber + 1), anchor + gap);
  return anchor;
}

struct KbFact {
  std::string subject;  // entity label
  std::string predicate;
  Value object;
  bool is_edge = false;
};

std::vector<KbFact> kb_facts(const KnowledgeBase& kb) {
  std::vector<KbFact> out;
  for (const auto& e : kb.edges())
    out.push_back({kb.find_node(e.source)->label, e.label,
                   Value::of_entity(kb.find_node(e.target)->label), true});
  for (const auto& n : kb.nodes())
    for (const auto& p : n.properties) out.push_back({n.label, p.name, p.value, false});
  return out;
}

}  // namespace

const std::vector<TemplateEntry>& template_table() {
  static const std::vector<TemplateEntry> table = build_templates();
  return table;
}

void GenConfig::validate() const {
  auto range = [](IntRange r, std::size_t lo, std::size_t hi, const char* name) {
    if (r.min > r.max) throw ConfigError(std::string("gen.") + name + " range is empty");
    if (r.min < lo || r.max > hi)
      throw ConfigError(std::string("gen.") + name + " must lie within [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
  };
  range(tables, 1, kTables.size(), "tables");
  range(columns, 2, 1 + std::min(kNumberColumns.size(), kTextColumns.size()), "columns");
  range(rows, 1, kNameValues.size(), "rows");
  range(kb_nodes, 2, kEntities.size(), "kb_nodes");
  range(kb_edges, 1, 400, "kb_edges");
  if (max_conditions > SqlQuery::kMaxConditions)
    throw ConfigError("gen.max_conditions must be at most " + std::to_string(SqlQuery::kMaxConditions));
  if (sparql_fraction < 0.0 || sparql_fraction > 1.0) throw ConfigError("gen.sparql_fraction must be in [0, 1]");
  if (paraphrase_rate < 0.0 || paraphrase_rate > 1.0) throw ConfigError("gen.paraphrase_rate must be in [0, 1]");
  if (template_set != "default") throw ConfigError("unknown gen.template_set '" + template_set + "'");
  if (train_count + dev_count + test_count == 0) throw ConfigError("gen split counts are all zero");
  if (sparql_fraction < 1.0 && db_schemas == 0) throw ConfigError("gen.db_schemas is zero but SQL examples are requested");
  if (sparql_fraction > 0.0 && kb_schemas == 0) throw ConfigError("gen.kb_schemas is zero but SPARQL examples are requested");
  if (hold_out_schemas && ((sparql_fraction < 1.0 && db_schemas < 2) || (sparql_fraction > 0.0 && kb_schemas < 2)))
    throw ConfigError("gen.hold_out_schemas needs at least two schemas per dialect");
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

SchemaDocument generate_db_schema(const GenConfig& cfg, std::uint64_t index) {
  Rng rng = derive_rng(cfg.seed, 1, index);
  RelationalSchema schema;
  const auto table_names = sample_without_replacement(kTables, uniform_in(rng, cfg.tables), rng);
  for (const auto& name : table_names) {
    TableSchema t;
    t.name = name;
    t.attributes.push_back({"name", AttributeType::kText});
    const std::size_t extra = uniform_in(rng, cfg.columns) - 1;
    const auto nums = sample_without_replacement(kNumberColumns, extra, rng);
    const auto texts = sample_without_replacement(kTextColumns, extra, rng);
    std::size_t ni = 0, ti = 0;
    for (std::size_t c = 0; c < extra; ++c) {
      // Two numeric columns for every text column on average.
      if (bernoulli(rng, 2.0 / 3.0)) t.attributes.push_back({nums[ni++], AttributeType::kNumber});
      else t.attributes.push_back({texts[ti++], AttributeType::kText});
    }
    schema.add_table(std::move(t));
  }
  DatabaseInstance db(schema);
  for (const auto& t : schema.tables()) {
    const std::size_t n_rows = uniform_in(rng, cfg.rows);
    const auto names = sample_without_replacement(kNameValues, n_rows, rng);
    for (std::size_t r = 0; r < names.size(); ++r) {
      std::vector<Value> row;
      for (const auto& a : t.attributes) {
        if (a.name == "name") row.push_back(Value::of_text(names[r]));
        else if (a.type == AttributeType::kNumber) row.push_back(random_number(rng));
        else row.push_back(Value::of_text(std::string(kTextValues[uniform_index(rng, kTextValues.size())])));
      }
      db.add_row(t.name, std::move(row));
    }
  }
  char id[32];
  std::snprintf(id, sizeof id, "db_%03llu", static_cast<unsigned long long>(index));
  return {id, std::move(db)};
}

SchemaDocument generate_kb_schema(const GenConfig& cfg, std::uint64_t index) {
  Rng rng = derive_rng(cfg.seed, 2, index);
  KnowledgeBase kb;
  const auto labels = sample_without_replacement(kEntities, uniform_in(rng, cfg.kb_nodes), rng);
  const auto relations = sample_without_replacement(kRelations, 3 + uniform_index(rng, 4), rng);
  auto num_props = sample_without_replacement(kNumberProperties, 2 + uniform_index(rng, 2), rng);
  const auto text_props = sample_without_replacement(kTextProperties, 1, rng);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    KbNode n{"n" + std::to_string(i), labels[i], {}};
    for (const auto& p : num_props)
      if (bernoulli(rng, 0.7)) n.properties.push_back({p, random_number(rng)});
    for (const auto& p : text_props)
      if (bernoulli(rng, 0.5))
        n.properties.push_back({p, Value::of_text(std::string(kKbTextValues[uniform_index(rng, kKbTextValues.size())]))});
    kb.add_node(std::move(n));
  }
  const std::size_t want_edges = uniform_in(rng, cfg.kb_edges);
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  std::size_t attempts = 0;
  while (kb.edges().size() < want_edges && attempts++ < want_edges * 20) {
    const std::size_t s = uniform_index(rng, labels.size());
    const std::size_t o = uniform_index(rng, labels.size());
    const std::size_t r = uniform_index(rng, relations.size());
    if (s == o || !seen.insert({s, r, o}).second) continue;
    kb.add_edge({"e" + std::to_string(kb.edges().size()), "n" + std::to_string(s), relations[r],
                 "n" + std::to_string(o), {}});
  }
  kb.validate();
  char id[32];
  std::snprintf(id, sizeof id, "kb_%03llu", static_cast<unsigned long long>(index));
  return {id, std::move(kb)};
}

TokenSequence sql_utterance(const SqlQuery& q, double rate, Rng& rng) {
  std::string text = fill(pick_phrasing(aggregator_shape(q.aggregator), rate, rng),
                          {{"col", q.select_column}, {"table", q.table}});
  for (std::size_t i = 0; i < q.conditions.size(); ++i) {
    const auto& c = q.conditions[i];
    text += ' ';
    text += i == 0 ? std::string(pick_phrasing("connector", rate, rng)) : "and";
    text += ' ' + c.column + ' ' + op_phrase(c.op, rate, rng) + ' ' + c.literal.plain();
  }
  return split_tokens(text);
}

std::optional<SampledQuery> sample_sql(const DatabaseInstance& db, const GenConfig& cfg, Rng& rng) {
  const auto& tables = db.schema().tables();
  const TableSchema& t = tables[uniform_index(rng, tables.size())];
  const auto& rows = db.rows(t.name);
  if (rows.empty()) return std::nullopt;

  std::vector<std::size_t> numeric;
  for (std::size_t i = 0; i < t.attributes.size(); ++i)
    if (t.attributes[i].type == AttributeType::kNumber) numeric.push_back(i);

  static constexpr std::array<Aggregator, 6> kAggs = {Aggregator::kNone, Aggregator::kCount, Aggregator::kMax,
                                                      Aggregator::kMin, Aggregator::kSum, Aggregator::kAvg};
  std::discrete_distribution<std::size_t> agg_dist({40, 15, 12, 12, 10, 11});
  SqlQuery q;
  q.aggregator = kAggs[agg_dist(rng)];
  const bool needs_numeric = q.aggregator != Aggregator::kNone && q.aggregator != Aggregator::kCount;
  if (needs_numeric && numeric.empty()) q.aggregator = Aggregator::kNone;
  q.table = t.name;
  const std::size_t sel = (q.aggregator == Aggregator::kNone || q.aggregator == Aggregator::kCount)
                              ? uniform_index(rng, t.attributes.size())
                              : numeric[uniform_index(rng, numeric.size())];
  q.select_column = t.attributes[sel].name;

  std::discrete_distribution<std::size_t> cond_dist({25, 45, 22, 8});
  const std::size_t n_conds = std::min({cond_dist(rng), cfg.max_conditions, t.attributes.size()});
  std::vector<std::size_t> cols(t.attributes.size());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
  std::shuffle(cols.begin(), cols.end(), rng);

  std::vector<const std::vector<Value>*> remaining;
  for (const auto& r : rows) remaining.push_back(&r);
  for (std::size_t c = 0; c < n_conds; ++c) {
    const std::size_t col = cols[c];
    const auto& anchor_row = *remaining[uniform_index(rng, remaining.size())];
    SqlCondition cond;
    cond.column = t.attributes[col].name;
    if (t.attributes[col].type == AttributeType::kNumber) {
      static constexpr std::array<CompareOp, 3> kOps = {CompareOp::kEq, CompareOp::kGt, CompareOp::kLt};
      cond.op = kOps[uniform_index(rng, kOps.size())];
      cond.literal = Value::of_number(threshold_for(anchor_row[col].number, cond.op, rng));
    } else {
      cond.op = CompareOp::kEq;
      cond.literal = anchor_row[col];
    }
    std::vector<const std::vector<Value>*> kept;
    for (const auto* r : remaining)
      if (compare_values((*r)[col], cond.op, cond.literal)) kept.push_back(r);
    remaining = std::move(kept);
    q.conditions.push_back(std::move(cond));
  }

  const ResultSet rs = execute_sql(q, db);
  if (rs.rows.empty() || rs.rows.front().front().is_null()) return std::nullopt;
  SampledQuery out;
  out.shape = "sql_" + aggregator_shape(q.aggregator) + "_" + std::to_string(q.conditions.size()) + "c";
  out.utterance = sql_utterance(q, cfg.paraphrase_rate, rng);
  out.form = std::move(q);
  return out;
}

std::optional<SampledQuery> sample_sparql(const KnowledgeBase& kb, const GenConfig& cfg, Rng& rng) {
  const auto facts = kb_facts(kb);
  if (facts.empty()) return std::nullopt;
  static constexpr std::array<std::string_view, 7> kShapes = {"subj_of", "obj_of", "prop_filter", "join",
                                                              "join_filter", "pairs", "chain"};
  std::discrete_distribution<std::size_t> shape_dist({18, 18, 14, 14, 14, 8, 14});
  const std::string_view shape = kShapes[shape_dist(rng)];
  const double rate = cfg.paraphrase_rate;
  const auto var = [](const char* n) { return SparqlTerm::variable(n); };
  const auto con = [](const std::string& t) { return SparqlTerm::constant(t); };

  std::vector<const KbFact*> edges, numeric_props, props;
  for (const auto& f : facts) {
    if (f.is_edge) edges.push_back(&f);
    else {
      props.push_back(&f);
      if (f.object.kind == Value::Kind::kNumber) numeric_props.push_back(&f);
    }
  }
  auto pick = [&](const std::vector<const KbFact*>& v) -> const KbFact* {
    return v.empty() ? nullptr : v[uniform_index(rng, v.size())];
  };
  // Property facts of the entity `label`, optionally numeric only.
  auto props_of = [&](const std::string& label, bool numeric_only) {
    std::vector<const KbFact*> out;
    for (const auto* p : props)
      if (p->subject == label && (!numeric_only || p->object.kind == Value::Kind::kNumber)) out.push_back(p);
    return out;
  };
  auto random_filter_op = [&]() { return bernoulli(rng, 0.5) ? CompareOp::kGt : CompareOp::kLt; };

  SparqlQuery q;
  std::string text;
  if (shape == "subj_of") {
    const KbFact& f = facts[uniform_index(rng, facts.size())];
    q.select = {"?x"};
    q.triples = {{var("?x"), con(f.predicate), con(f.object.plain())}};
    text = fill(pick_phrasing(shape, rate, rng), {{"pred", f.predicate}, {"obj", f.object.plain()}});
  } else if (shape == "obj_of") {
    const KbFact& f = facts[uniform_index(rng, facts.size())];
    q.select = {"?x"};
    q.triples = {{con(f.subject), con(f.predicate), var("?x")}};
    text = fill(pick_phrasing(shape, rate, rng), {{"pred", f.predicate}, {"subj", f.subject}});
  } else if (shape == "prop_filter") {
    const KbFact* f = pick(numeric_props);
    if (!f) return std::nullopt;
    const CompareOp op = random_filter_op();
    const Value v = Value::of_number(threshold_for(f->object.number, op, rng));
    q.select = {"?x"};
    q.triples = {{var("?x"), con(f->predicate), var("?y")}};
    q.filters = {{"?y", op, v}};
    text = fill(pick_phrasing(shape, rate, rng),
                {{"prop", f->predicate}, {"op", op_phrase(op, rate, rng)}, {"v", v.plain()}});
  } else if (shape == "join" || shape == "join_filter") {
    std::vector<const KbFact*> usable;
    const bool filtered = shape == "join_filter";
    for (const auto* e : edges)
      if (!props_of(e->subject, filtered).empty()) usable.push_back(e);
    const KbFact* e = pick(usable);
    if (!e) return std::nullopt;
    const KbFact* p = pick(props_of(e->subject, filtered));
    q.triples = {{var("?x"), con(e->predicate), con(e->object.plain())}, {var("?x"), con(p->predicate), var("?y")}};
    if (!filtered) {
      q.select = {"?y"};
      text = fill(pick_phrasing(shape, rate, rng),
                  {{"prop", p->predicate}, {"rel", e->predicate}, {"ent", e->object.plain()}});
    } else {
      const CompareOp op = random_filter_op();
      const Value v = Value::of_number(threshold_for(p->object.number, op, rng));
      q.select = {"?x"};
      q.filters = {{"?y", op, v}};
      text = fill(pick_phrasing(shape, rate, rng), {{"rel", e->predicate},
                                                    {"ent", e->object.plain()},
                                                    {"prop", p->predicate},
                                                    {"op", op_phrase(op, rate, rng)},
                                                    {"v", v.plain()}});
    }
  } else if (shape == "pairs") {
    const KbFact* e = pick(edges);
    if (!e) return std::nullopt;
    q.select = {"?x", "?y"};
    q.triples = {{var("?x"), con(e->predicate), var("?y")}};
    text = fill(pick_phrasing(shape, rate, rng), {{"rel", e->predicate}});
  } else {
    // chain: a r1 b, b r2 c
    std::vector<std::pair<const KbFact*, const KbFact*>> chains;
    for (const auto* a : edges)
      for (const auto* b : edges)
        if (b->subject == a->object.text) chains.emplace_back(a, b);
    if (chains.empty()) return std::nullopt;
    const auto [a, b] = chains[uniform_index(rng, chains.size())];
    q.select = {"?y"};
    q.triples = {{con(a->subject), con(a->predicate), var("?x")}, {var("?x"), con(b->predicate), var("?y")}};
    text = fill(pick_phrasing(shape, rate, rng),
                {{"rel", a->predicate}, {"rel2", b->predicate}, {"ent", a->subject}});
  }

  if (execute_sparql(q, kb).rows.empty()) return std::nullopt;
  SampledQuery out;
  out.shape = "sparql_" + std::string(shape);
  out.utterance = split_tokens(text);
  out.form = std::move(q);
  return out;
}

Corpus generate_corpus(const GenConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  std::vector<std::string> db_ids, kb_ids;
  std::map<std::string, SchemaVocabulary> vocabs;
  const bool want_sql = cfg.sparql_fraction < 1.0;
  const bool want_sparql = cfg.sparql_fraction > 0.0;
  if (want_sql)
    for (std::size_t i = 0; i < cfg.db_schemas; ++i) {
      auto doc = generate_db_schema(cfg, i);
      db_ids.push_back(doc.id);
      vocabs[doc.id] = doc.vocabulary();
      corpus.add_schema(std::move(doc));
    }
  if (want_sparql)
    for (std::size_t i = 0; i < cfg.kb_schemas; ++i) {
      auto doc = generate_kb_schema(cfg, i);
      kb_ids.push_back(doc.id);
      vocabs[doc.id] = doc.vocabulary();
      corpus.add_schema(std::move(doc));
    }

  // With held-out schemas the first three quarters serve train, the rest dev/test.
  using Range = std::pair<std::size_t, std::size_t>;
  auto pool = [&](const std::vector<std::string>& ids, bool train) -> Range {
    if (!cfg.hold_out_schemas) return {0, ids.size()};
    const std::size_t cut = std::max<std::size_t>(1, std::min(ids.size() - 1, ids.size() * 3 / 4));
    return train ? Range{0, cut} : Range{cut, ids.size()};
  };

  const std::size_t total = cfg.train_count + cfg.dev_count + cfg.test_count;
  for (std::size_t k = 0; k < total; ++k) {
    const char* split = k < cfg.train_count ? "train" : (k < cfg.train_count + cfg.dev_count ? "dev" : "test");
    Rng rng = derive_rng(cfg.seed, 3, k);
    const bool sparql = want_sparql && (!want_sql || bernoulli(rng, cfg.sparql_fraction));
    const auto& ids = sparql ? kb_ids : db_ids;
    const auto [lo, hi] = pool(ids, std::string_view(split) == "train");
    std::optional<SampledQuery> sampled;
    std::string ref;
    for (int attempt = 0; attempt < 200 && !sampled; ++attempt) {
      ref = ids[lo + uniform_index(rng, hi - lo)];
      const auto& doc = corpus.schema(ref);
      sampled = sparql ? sample_sparql(doc.kb(), cfg, rng) : sample_sql(doc.db(), cfg, rng);
    }
    if (!sampled) throw ConfigError("could not sample a query with a nonempty denotation for example " + std::to_string(k));
    Example ex;
    ex.id = static_cast<int>(k);
    ex.split = split;
    ex.dialect = sparql ? Dialect::kSparql : Dialect::kSql;
    ex.shape = sampled->shape;
    ex.schema_ref = ref;
    ex.utterance = std::move(sampled->utterance);
    ex.targets = build_supervision_targets(serialize(sampled->form), vocabs.at(ref));
    corpus.add_example(std::move(ex));
  }
  return corpus;
}

}  // namespace anchorparse
