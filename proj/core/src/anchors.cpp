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

#include "anchorparse/anchors.hpp"

#include <algorithm>
#include <unordered_set>

namespace anchorparse {

std::vector<AnchorOccurrence> extract_anchors(const TokenSequence& main,
                                              const SchemaVocabulary& vocab) {
  std::vector<AnchorOccurrence> out;
  for (std::size_t i = 0; i < main.size(); ++i) {
    const TokenClass cls = classify_token(main[i]);
    if (cls != TokenClass::kIdentifier && cls != TokenClass::kNumber) continue;
    if (auto kind = vocab.kind_of(main[i])) out.push_back({main[i], i, *kind});
  }
  return out;
}

TokenSequence build_sae_target(std::span<const AnchorOccurrence> occurrences) {
  TokenSequence out;
  std::unordered_set<std::string> seen;
  for (const auto& occ : occurrences) {
    if (!seen.insert(occ.token).second) continue;
    if (!out.empty()) out.emplace_back(kSepToken);
    out.push_back(occ.token);
  }
  return out;
}

SaaTarget build_saa_target(const TokenSequence& main,
                           std::span<const AnchorOccurrence> occurrences) {
  SaaTarget t;
  t.tokens.assign(main.size(), std::string(kMaskToken));
  t.loss_mask.assign(main.size(), 0);
  for (const auto& occ : occurrences) {
    if (occ.position >= main.size())
      throw ContractError("anchor position " + std::to_string(occ.position) +
                          " outside a target of length " + std::to_string(main.size()));
    t.tokens[occ.position] = main[occ.position];
    t.loss_mask[occ.position] = 1;
  }
  return t;
}

std::size_t SupervisionTargets::anchor_count() const {
  return static_cast<std::size_t>(std::count(saa_loss_mask.begin(), saa_loss_mask.end(), 1));
}

SupervisionTargets build_supervision_targets(const TokenSequence& main,
                                             const SchemaVocabulary& vocab) {
  const auto occ = extract_anchors(main, vocab);
  SupervisionTargets t;
  t.main = main;
  t.sae = build_sae_target(occ);
  auto saa = build_saa_target(main, occ);
  t.saa = std::move(saa.tokens);
  t.saa_loss_mask = std::move(saa.loss_mask);
  return t;
}

Mask sae_loss_mask(std::size_t sae_len, std::size_t decoder_len) {
  Mask m(decoder_len, 0);
  const std::size_t framed = sae_len == 0 ? 0 : std::min(sae_len + 1, decoder_len);
  std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(framed), 1);
  return m;
}

}  // namespace anchorparse
