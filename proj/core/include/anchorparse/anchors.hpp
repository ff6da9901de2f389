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

// Semantic anchors: logical-form tokens that name schema elements, and the
// two intermediate supervision targets built from them.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "anchorparse/logical_form.hpp"
#include "anchorparse/schema.hpp"
#include "anchorparse/tensor.hpp"

namespace anchorparse {

struct AnchorOccurrence {
  std::string token;
  std::size_t position = 0;
  SchemaKind kind = SchemaKind::kColumn;

  friend bool operator==(const AnchorOccurrence&, const AnchorOccurrence&) = default;
};

// Every position of `main` holding a schema token, in sequence order.
// Keywords, punctuation, variables and quoted literals never qualify.
std::vector<AnchorOccurrence> extract_anchors(const TokenSequence& main,
                                              const SchemaVocabulary& vocab);

// Unique anchors in first-occurrence order joined by <SEP>. No framing.
TokenSequence build_sae_target(std::span<const AnchorOccurrence> occurrences);

struct SaaTarget {
  TokenSequence tokens;
  Mask loss_mask;
};

// Same length as `main`; anchors kept in place and <MASK> elsewhere.
SaaTarget build_saa_target(const TokenSequence& main,
                           std::span<const AnchorOccurrence> occurrences);

struct SupervisionTargets {
  TokenSequence main;
  TokenSequence sae;
  TokenSequence saa;
  Mask saa_loss_mask;

  std::size_t anchor_count() const;
};

SupervisionTargets build_supervision_targets(const TokenSequence& main,
                                             const SchemaVocabulary& vocab);

// SAE loss positions over `decoder_len` teacher-forced positions: the prefix
// that carries the framed target (content followed by <EOS>).
Mask sae_loss_mask(std::size_t sae_len, std::size_t decoder_len);

}  // namespace anchorparse
