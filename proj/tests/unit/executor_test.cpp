#include <gtest/gtest.h>

#include "anchorparse/datagen.hpp"
#include "anchorparse/executor.hpp"
#include "oracles/query_oracles.hpp"
#include "oracles/random_queries.hpp"

namespace anchorparse {
namespace {

DatabaseInstance company_db() {
  RelationalSchema s;
  s.add_table({"company", {{"name", AttributeType::kText}, {"founded", AttributeType::kNumber}}});
  s.add_table({"empty", {{"a", AttributeType::kNumber}}});
  DatabaseInstance db(s);
  db.add_row("company", {Value::of_text("saab"), Value::of_number(1945)});
  db.add_row("company", {Value::of_text("volvo"), Value::of_number(1927)});
  return db;
}

KnowledgeBase car_kb() {
  KnowledgeBase kb;
  kb.add_node({"n0", "saab", {{"founded", Value::of_number(1945)}}});
  kb.add_node({"n1", "car1", {}});
  kb.add_node({"n2", "volvo", {{"founded", Value::of_number(1927)}}});
  kb.add_edge({"e0", "n1", "produced_by", "n0", {}});
  return kb;
}

SqlQuery sql(const char* text) {
  auto r = parse_sql(text);
  EXPECT_TRUE(r.ok()) << text;
  return r.value();
}

SparqlQuery sparql(const char* text) {
  auto r = parse_sparql(text);
  EXPECT_TRUE(r.ok()) << text;
  return r.value();
}

TEST(Executor, CountOverEmptyTable) {
  const ResultSet r = execute_sql(sql("select count ( a ) from empty"), company_db());
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0][0], Value::of_number(0));
}

TEST(Executor, AggregatesOverEmptySelectionAreNull) {
  for (const char* agg : {"max", "min", "sum", "avg"}) {
    const std::string q = std::string("select ") + agg + " ( a ) from empty";
    const ResultSet r = execute_sql(sql(q.c_str()), company_db());
    ASSERT_EQ(r.rows.size(), 1u) << agg;
    EXPECT_EQ(r.rows[0][0].kind, Value::Kind::kNull) << agg;
  }
}

TEST(Executor, FilterAndProject) {
  const ResultSet r = execute_sql(sql("select name from company where founded > 1930"), company_db());
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0][0], Value::of_text("saab"));
}

TEST(Executor, AvgOverRows) {
  const ResultSet r = execute_sql(sql("select avg ( founded ) from company"), company_db());
  EXPECT_EQ(r.rows[0][0], Value::of_number(1936));
}

TEST(Executor, UnknownColumnIsSchemaReferenceError) {
  try {
    execute_sql(sql("select ceo from company"), company_db());
    FAIL();
  } catch (const ExecutionError& e) {
    EXPECT_EQ(e.kind(), ExecutionError::Kind::kSchemaReference);
  }
  EXPECT_THROW(execute_sql(sql("select name from nope"), company_db()), ExecutionError);
}

TEST(Executor, SparqlSingleTriple) {
  const ResultSet r = execute_sparql(sparql("select ?x where { ?x produced_by saab }"), car_kb());
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0][0].plain(), "car1");
}

TEST(Executor, SparqlUnsatisfiable) {
  const ResultSet r = execute_sparql(sparql("select ?x where { ?x produced_by volvo }"), car_kb());
  EXPECT_TRUE(r.rows.empty());
}

TEST(Executor, SparqlUnknownLabel) {
  EXPECT_THROW(execute_sparql(sparql("select ?x where { ?x produced_by kia }"), car_kb()), ExecutionError);
  EXPECT_THROW(execute_sparql(sparql("select ?x where { ?x makes saab }"), car_kb()), ExecutionError);
}

TEST(Executor, SparqlJoinWithFilterMatchesOracle) {
  const SparqlQuery q = sparql("select ?x ?y where { ?x produced_by ?z . ?z founded ?y filter ( ?y > 1930 ) }");
  const ResultSet r = execute_sparql(q, car_kb());
  EXPECT_TRUE(oracle::same(oracle::nested_loop_sparql(q, car_kb()), r));
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0][1], Value::of_number(1945));
}

TEST(Executor, ResultEquality) {
  ResultSet a{{"c"}, {{Value::of_number(1)}, {Value::of_number(2)}}};
  ResultSet b{{"c"}, {{Value::of_number(2)}, {Value::of_number(1)}}};
  EXPECT_TRUE(result_equal(a, b));
  EXPECT_FALSE(result_equal(ResultSet{{"c"}, {{Value::of_number(1)}, {Value::of_number(1)}}},
                            ResultSet{{"c"}, {{Value::of_number(1)}}}));
  EXPECT_FALSE(result_equal(ResultSet{{"c"}, {{Value::of_number(1990)}}}, ResultSet{{"c"}, {{Value::of_text("1990")}}}));
  EXPECT_FALSE(result_equal(ResultSet{{"c"}, {}}, ResultSet{{"d"}, {}}));
}

TEST(Executor, CompareValues) {
  EXPECT_TRUE(compare_values(Value::of_number(2), CompareOp::kGt, Value::of_number(1)));
  EXPECT_FALSE(compare_values(Value::of_number(2), CompareOp::kEq, Value::of_text("2")));
  EXPECT_FALSE(compare_values(Value::null(), CompareOp::kEq, Value::null()));
  EXPECT_TRUE(compare_values(Value::of_entity("saab"), CompareOp::kEq, Value::of_text("saab")));
}

TEST(Executor, SqlAgreesWithRowScanOracle) {
  GenConfig cfg;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const SchemaDocument doc = generate_db_schema(cfg, static_cast<std::uint64_t>(i % 40));
    const SqlQuery q = oracle::random_sql(doc.db(), rng);
    const ResultSet r = execute_sql(q, doc.db());
    ASSERT_TRUE(oracle::same(oracle::scan_sql(q, doc.db()), r)) << join_tokens(serialize(q));
    EXPECT_TRUE(result_equal(r, execute_sql(q, doc.db())));
  }
}

TEST(Executor, SparqlAgreesWithNestedLoopOracle) {
  GenConfig cfg;
  std::mt19937_64 rng(6);
  int checked = 0;
  for (int i = 0; checked < 500; ++i) {
    const SchemaDocument doc = generate_kb_schema(cfg, static_cast<std::uint64_t>(i % 40));
    const SparqlQuery q = oracle::random_sparql(doc.kb(), rng);
    if (q.triples.empty()) continue;
    const ResultSet r = execute_sparql(q, doc.kb());
    ASSERT_TRUE(oracle::same(oracle::nested_loop_sparql(q, doc.kb()), r)) << join_tokens(serialize(q));
    ++checked;
  }
}

}  // namespace
}  // namespace anchorparse
