#include <gtest/gtest.h>

#include <random>

#include "anchorparse/datagen.hpp"
#include "anchorparse/logical_form.hpp"

namespace anchorparse {
namespace {

TEST(LogicalForm, ParseSqlWithCondition) {
  const auto r = parse_sql("select name from company where founded > 1990");
  ASSERT_TRUE(r.ok()) << r.error().message();
  const SqlQuery& q = r.value();
  EXPECT_EQ(q.aggregator, Aggregator::kNone);
  EXPECT_EQ(q.select_column, "name");
  EXPECT_EQ(q.table, "company");
  ASSERT_EQ(q.conditions.size(), 1u);
  EXPECT_EQ(q.conditions[0].column, "founded");
  EXPECT_EQ(q.conditions[0].op, CompareOp::kGt);
  EXPECT_EQ(q.conditions[0].literal, Value::of_number(1990));
}

TEST(LogicalForm, MissingColumnIsSyntaxErrorAtToken2) {
  const auto r = parse_sql("select from where");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error().kind, ParseError::Kind::kSyntax);
  EXPECT_EQ(r.error().token_index + 1, 2u);
  EXPECT_NE(r.error().message().find("token 2"), std::string::npos) << r.error().message();
}

TEST(LogicalForm, SerializeCount) {
  const SqlQuery q{Aggregator::kCount, "name", "company", {}};
  EXPECT_EQ(serialize(q), (TokenSequence{"select", "count", "(", "name", ")", "from", "company"}));
}

TEST(LogicalForm, SerializeSparqlOneTriple) {
  SparqlQuery q;
  q.select = {"?x"};
  q.triples = {{SparqlTerm::variable("?x"), SparqlTerm::constant("produced_by"), SparqlTerm::constant("saab")}};
  EXPECT_EQ(serialize(q), (TokenSequence{"select", "?x", "where", "{", "?x", "produced_by", "saab", "}"}));
}

TEST(LogicalForm, SparqlFiltersAndMultipleTriples) {
  const std::string text = "select ?x ?y where { ?x produced_by saab . ?x founded ?y filter ( ?y > 1930 ) }";
  const auto r = parse_sparql(text);
  ASSERT_TRUE(r.ok()) << r.error().message();
  EXPECT_EQ(r.value().triples.size(), 2u);
  ASSERT_EQ(r.value().filters.size(), 1u);
  EXPECT_EQ(join_tokens(serialize(r.value())), text);
}

TEST(LogicalForm, SparqlUnboundVariableIsSemanticError) {
  const auto r = parse_sparql("select ?z where { ?x produced_by saab }");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.error().kind, ParseError::Kind::kSemantic);
}

TEST(LogicalForm, LexicalErrors) {
  for (const char* bad : {"select \"name\" from t", "select name from t where a >= 3", "select <MASK> from t"}) {
    const auto r = parse_sql(bad);
    ASSERT_FALSE(r.ok()) << bad;
    EXPECT_EQ(r.error().kind, ParseError::Kind::kLexical) << bad << ": " << r.error().message();
  }
}

TEST(LogicalForm, KeywordsAreCaseInsensitive) {
  const auto r = parse_sql("SELECT MAX ( Founded ) FROM Company");
  ASSERT_TRUE(r.ok()) << r.error().message();
  EXPECT_EQ(join_tokens(serialize(r.value())), "select max ( founded ) from company");
}

TEST(LogicalForm, QuotedLiteralsSpanWhitespace) {
  const auto r = parse_sql("select name from company where city = 'New York'");
  ASSERT_TRUE(r.ok()) << r.error().message();
  EXPECT_EQ(r.value().conditions[0].literal, Value::of_text("new_york"));
  EXPECT_EQ(join_tokens(serialize(r.value())), "select name from company where city = 'new_york'");
}

TEST(LogicalForm, TooManyConditions) {
  const auto r = parse_sql("select a from t where a = 1 and a = 2 and a = 3 and a = 4 and a = 5");
  EXPECT_FALSE(r.ok());
}

TEST(LogicalForm, ParsersAreTotalOnArbitraryBytes) {
  std::mt19937_64 rng(1);
  const std::string alphabet = "select from where and filter?x{}().=<>' \"\t\n0123456789abc_-\x01\xff";
  for (int i = 0; i < 2000; ++i) {
    std::string s(rng() % 40, ' ');
    for (auto& c : s) c = alphabet[rng() % alphabet.size()];
    const auto a = parse_sql(s);
    const auto b = parse_sparql(s);
    if (!a.ok()) {
      EXPECT_FALSE(a.error().message().empty());
    }
    if (!b.ok()) {
      EXPECT_FALSE(b.error().message().empty());
    }
  }
}

TEST(LogicalForm, SlotsReportSchemaPositions) {
  const auto r = parse_sql("select count ( name ) from company where founded > 1990");
  ASSERT_TRUE(r.ok());
  const Serialized s = serialize_with_slots(r.value());
  std::vector<std::size_t> positions;
  for (const auto& slot : s.slots) positions.push_back(slot.position);
  std::sort(positions.begin(), positions.end());
  EXPECT_EQ(positions, (std::vector<std::size_t>{3, 6, 8}));
}

// Round trip and idempotence over grammar-sampled queries.
TEST(LogicalForm, RoundTripOnSampledQueries) {
  GenConfig cfg;
  std::size_t checked = 0;
  for (std::uint64_t i = 0; checked < 1000; ++i) {
    Rng rng = derive_rng(99, 7, i);
    const SchemaDocument doc = (i % 2 == 0) ? generate_db_schema(cfg, i) : generate_kb_schema(cfg, i);
    const auto sampled = doc.is_kb() ? sample_sparql(doc.kb(), cfg, rng) : sample_sql(doc.db(), cfg, rng);
    if (!sampled) continue;
    const TokenSequence tokens = serialize(sampled->form);
    const auto parsed = parse_logical_form(join_tokens(tokens), doc.is_kb() ? Dialect::kSparql : Dialect::kSql);
    ASSERT_TRUE(parsed.ok()) << join_tokens(tokens) << ": " << parsed.error().message();
    EXPECT_EQ(parsed.value(), sampled->form);
    EXPECT_EQ(serialize(parsed.value()), tokens);
    ++checked;
  }
}

}  // namespace
}  // namespace anchorparse
