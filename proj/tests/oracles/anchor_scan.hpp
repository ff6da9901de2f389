// Brute-force anchor oracle: tests every token of a logical form for
// membership in the schema vocabulary.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "anchorparse/logical_form.hpp"
#include "anchorparse/schema.hpp"

namespace anchorparse::oracle {

struct ScannedAnchor {
  std::string token;
  std::size_t position;
};

inline std::vector<ScannedAnchor> scan_anchors(const TokenSequence& main, const SchemaVocabulary& vocab) {
  static const std::set<std::string> kGrammar = {"select", "from", "where", "and", "filter", "(", ")",
                                                 "{",      "}",    ".",     "=",   ">",      "<"};
  std::set<std::string> members;
  for (const auto& [token, kind] : vocab.entries()) members.insert(token);
  std::vector<ScannedAnchor> out;
  for (std::size_t i = 0; i < main.size(); ++i) {
    const std::string& t = main[i];
    if (t.empty() || t[0] == '?' || t[0] == '\'' || kGrammar.count(t)) continue;
    // Aggregator keywords directly before "(" are grammar, not names.
    if (i + 1 < main.size() && main[i + 1] == "(") continue;
    if (members.count(t)) out.push_back({t, i});
  }
  return out;
}

}  // namespace anchorparse::oracle
