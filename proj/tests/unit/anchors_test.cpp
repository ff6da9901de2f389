#include <gtest/gtest.h>

#include <set>

#include "anchorparse/anchors.hpp"
#include "anchorparse/datagen.hpp"
#include "oracles/anchor_scan.hpp"

namespace anchorparse {
namespace {

const TokenSequence kMain = {"select", "name", "from", "company", "where", "founded", ">", "1990"};

SchemaVocabulary company_vocab() {
  SchemaVocabulary v;
  v.insert("company", SchemaKind::kTable);
  v.insert("name", SchemaKind::kColumn);
  v.insert("founded", SchemaKind::kColumn);
  return v;
}

std::vector<std::size_t> positions(const std::vector<AnchorOccurrence>& occ) {
  std::vector<std::size_t> p;
  for (const auto& o : occ) p.push_back(o.position);
  return p;
}

TEST(Anchors, ExtractSqlAnchors) {
  const auto occ = extract_anchors(kMain, company_vocab());
  EXPECT_EQ(positions(occ), (std::vector<std::size_t>{1, 3, 5}));
  std::vector<std::size_t> oracle;
  for (const auto& a : oracle::scan_anchors(kMain, company_vocab())) oracle.push_back(a.position);
  EXPECT_EQ(positions(occ), oracle);
}

TEST(Anchors, NoSchemaTokens) {
  EXPECT_TRUE(extract_anchors({"select", "x", "from", "y"}, company_vocab()).empty());
}

TEST(Anchors, ExtractSparqlAnchors) {
  SchemaVocabulary v;
  v.insert("produced_by", SchemaKind::kRelationLabel);
  v.insert("saab", SchemaKind::kEntityLabel);
  const TokenSequence main = {"select", "?x", "where", "{", "?x", "produced_by", "saab", "}"};
  EXPECT_EQ(positions(extract_anchors(main, v)), (std::vector<std::size_t>{5, 6}));
}

TEST(Anchors, SaeTarget) {
  const auto occ = extract_anchors(kMain, company_vocab());
  EXPECT_EQ(build_sae_target(occ), (TokenSequence{"name", "<SEP>", "company", "<SEP>", "founded"}));
  const std::vector<AnchorOccurrence> single = {{"name", 1, SchemaKind::kColumn}};
  EXPECT_EQ(build_sae_target(single), (TokenSequence{"name"}));
  const std::vector<AnchorOccurrence> repeated = {{"name", 1, SchemaKind::kColumn}, {"name", 7, SchemaKind::kColumn}};
  EXPECT_EQ(build_sae_target(repeated), (TokenSequence{"name"}));
  EXPECT_TRUE(build_sae_target({}).empty());
}

TEST(Anchors, SaaTarget) {
  const auto occ = extract_anchors(kMain, company_vocab());
  const SaaTarget t = build_saa_target(kMain, occ);
  EXPECT_EQ(t.tokens, (TokenSequence{"<MASK>", "name", "<MASK>", "company", "<MASK>", "founded", "<MASK>", "<MASK>"}));
  EXPECT_EQ(t.loss_mask, (Mask{0, 1, 0, 1, 0, 1, 0, 0}));
}

TEST(Anchors, SaaWithoutAnchorsIsAllMasked) {
  const TokenSequence main = {"select", "x", "from", "y"};
  const SaaTarget t = build_saa_target(main, {});
  EXPECT_EQ(t.tokens, TokenSequence(4, "<MASK>"));
  EXPECT_EQ(t.loss_mask, Mask(4, 0));
}

TEST(Anchors, AllAnchorSequence) {
  const TokenSequence main = {"name", "company"};
  const SaaTarget t = build_saa_target(main, extract_anchors(main, company_vocab()));
  EXPECT_EQ(t.tokens, main);
}

TEST(Anchors, SaaRejectsOutOfRangeOccurrence) {
  const std::vector<AnchorOccurrence> bad = {{"name", 40, SchemaKind::kColumn}};
  EXPECT_THROW(build_saa_target(kMain, bad), ContractError);
}

TEST(Anchors, SaeLossMask) {
  EXPECT_EQ(sae_loss_mask(3, 6), (Mask{1, 1, 1, 1, 0, 0}));
  EXPECT_EQ(sae_loss_mask(0, 3), (Mask{0, 0, 0}));
  EXPECT_EQ(sae_loss_mask(5, 4), (Mask{1, 1, 1, 1}));
}

TEST(Anchors, SupervisionInvariantsOnSampledExamples) {
  GenConfig cfg;
  cfg.train_count = 300;
  cfg.dev_count = 50;
  cfg.test_count = 50;
  cfg.db_schemas = 6;
  cfg.kb_schemas = 6;
  const Corpus corpus = generate_corpus(cfg);
  for (const Example& ex : corpus.examples()) {
    const SchemaVocabulary vocab = corpus.schema(ex.schema_ref).vocabulary();
    const SupervisionTargets& t = ex.targets;
    ASSERT_EQ(t.saa.size(), t.main.size());
    const auto occ = extract_anchors(t.main, vocab);
    std::size_t marked = 0;
    std::set<std::string> saa_tokens, sae_tokens;
    for (std::size_t i = 0; i < t.main.size(); ++i) {
      if (t.saa_loss_mask[i]) {
        ++marked;
        EXPECT_EQ(t.saa[i], t.main[i]);
        saa_tokens.insert(t.saa[i]);
      } else {
        EXPECT_EQ(t.saa[i], "<MASK>");
      }
    }
    EXPECT_EQ(marked, occ.size());
    for (const auto& tok : t.sae)
      if (tok != "<SEP>") sae_tokens.insert(tok);
    EXPECT_EQ(saa_tokens, sae_tokens);
    EXPECT_EQ(t.sae.size(), sae_tokens.empty() ? 0 : 2 * sae_tokens.size() - 1);
    // Re-serializing the parsed form yields the same anchors.
    const auto parsed = parse_logical_form(join_tokens(t.main), ex.dialect);
    ASSERT_TRUE(parsed.ok());
    EXPECT_EQ(extract_anchors(serialize(parsed.value()), vocab), occ);
  }
}

}  // namespace
}  // namespace anchorparse
