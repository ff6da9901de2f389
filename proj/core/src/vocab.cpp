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

#include "anchorparse/vocab.hpp"

#include <set>

namespace anchorparse {

TokenVocab::TokenVocab() {
  for (auto t : {kPadToken, kBosToken, kEosToken, kSepToken, kMaskToken, kUnkToken}) add(std::string(t));
}

TokenVocab::TokenVocab(const std::vector<std::string>& tokens) : TokenVocab() {
  for (const auto& t : tokens) add(t);
}

void TokenVocab::add(const std::string& token) {
  if (token.empty() || index_.count(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

TokenVocab TokenVocab::from_corpus(const Corpus& corpus) {
  std::set<std::string> all = {"select", "from", "where", "and", "filter", "max", "min", "count",
                               "sum",    "avg",  "(",     ")",   "{",      "}",   ".",   "=",
                               ">",      "<",    "?x",    "?y"};
  for (const auto& [id, doc] : corpus.schemas()) {
    const SchemaVocabulary vocab = doc.vocabulary();
    for (const auto& [token, kind] : vocab.entries()) all.insert(token);
  }
  for (const auto& ex : corpus.examples()) {
    if (ex.split != "train") continue;
    all.insert(ex.utterance.begin(), ex.utterance.end());
    all.insert(ex.targets.main.begin(), ex.targets.main.end());
  }
  for (auto it = all.begin(); it != all.end();) it = is_special_token(*it) ? all.erase(it) : std::next(it);
  return TokenVocab(std::vector<std::string>(all.begin(), all.end()));
}

int TokenVocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& TokenVocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> TokenVocab::encode(const TokenSequence& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

TokenSequence TokenVocab::decode(std::span<const int> ids) const {
  TokenSequence out;
  for (int i : ids) {
    if (i == kEos) break;
    if (i == kPad || i == kBos) continue;
    out.push_back(token(i));
  }
  return out;
}

std::vector<int> encode_source(const TokenSequence& utterance, const TokenVocab& vocab, std::size_t max_len) {
  std::vector<int> ids = vocab.encode(utterance);
  if (ids.size() > max_len) ids.resize(max_len);
  return ids;
}

}  // namespace anchorparse
