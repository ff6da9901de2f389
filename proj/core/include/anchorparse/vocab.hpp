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

// Token <-> id map shared by the encoder input, the main head and both task
// heads. Ids 0..5 are the special tokens in a fixed order.

#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "anchorparse/corpus.hpp"

namespace anchorparse {

class TokenVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kUnk = 5;

  TokenVocab();
  // Special tokens followed by `tokens` (duplicates and specials ignored).
  explicit TokenVocab(const std::vector<std::string>& tokens);

  // Special tokens, then the sorted union of train-split utterance and target
  // tokens, grammar tokens and every schema vocabulary token of the corpus.
  static TokenVocab from_corpus(const Corpus& corpus);

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(const TokenSequence& tokens) const;
  // Stops at the first <EOS>; drops <PAD> and <BOS>.
  TokenSequence decode(std::span<const int> ids) const;

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Encoder ids for an utterance, truncated to `max_len` tokens.
std::vector<int> encode_source(const TokenSequence& utterance, const TokenVocab& vocab, std::size_t max_len);

}  // namespace anchorparse
