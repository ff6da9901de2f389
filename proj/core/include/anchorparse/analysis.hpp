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

// Evaluation and probing: execution accuracy, hallucination counts, the
// learned layer mixture of each task head and per-layer decodings.

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorparse/corpus.hpp"
#include "anchorparse/model.hpp"
#include "anchorparse/vocab.hpp"

namespace anchorparse {

// Decodes every example's utterance. Beam size 1 runs batched greedy search.
std::vector<TokenSequence> predict(const Seq2SeqModel& model, const TokenVocab& vocab,
                                   std::span<const Example* const> examples, std::size_t beam_size = 1,
                                   std::size_t batch_size = 64);

enum class Verdict { kCorrect, kWrongResult, kParseFailure, kExecutionFailure };

// Parses, executes and compares a prediction against the gold denotation.
Verdict judge(const TokenSequence& prediction, const Example& gold, const SchemaDocument& schema);

// Fraction of predictions whose denotation equals the gold one.
double execution_accuracy(std::span<const TokenSequence> predictions, std::span<const Example* const> golds,
                          const Corpus& corpus);

// True when the prediction does not parse or names a table, column or
// non-variable triple term missing from `vocab`.
bool strict_hallucination(const TokenSequence& prediction, Dialect dialect, const SchemaVocabulary& vocab);
// True when the prediction does not parse or its anchor multiset differs from
// the gold one.
bool anchor_mismatch(const TokenSequence& prediction, const Example& gold, const SchemaVocabulary& vocab);

struct HallucinationCounts {
  std::size_t strict = 0;
  std::size_t anchor_mismatch = 0;
};

HallucinationCounts count_hallucinations(std::span<const TokenSequence> predictions,
                                         std::span<const Example* const> golds, const Corpus& corpus);

struct ShapeStats {
  std::size_t total = 0;
  std::size_t correct = 0;
};

struct EvalReport {
  std::size_t examples = 0;
  std::size_t correct = 0;
  std::size_t exact_match = 0;
  std::size_t parse_failures = 0;
  std::size_t execution_failures = 0;
  HallucinationCounts hallucinations;
  std::map<std::string, ShapeStats> per_shape;

  double exec_acc() const;
  double exact_match_rate() const;
  nlohmann::json to_json() const;
  std::string summary() const;  // plain-text table
};

EvalReport evaluate_predictions(std::span<const TokenSequence> predictions, std::span<const Example* const> golds,
                                const Corpus& corpus);

struct LayerWeights {
  Task task = Task::kSae;
  std::vector<double> probs;  // softmax over layers 1..N-1
  double center_of_mass = 0.0;  // sum_i i * p_i with 1-based layers
};

// Softmax and center of mass of raw layer weights.
LayerWeights layer_weights_from(Task task, std::span<const double> raw);

struct WeightReport {
  bool applicable = false;  // false for models without hierarchical heads
  std::vector<LayerWeights> tasks;

  nlohmann::json to_json() const;
  std::string render() const;
  // One {"task", "layer", "weight"} record per line.
  std::string plot_data() const;
};

WeightReport weight_distribution_report(const Seq2SeqModel& model);

struct LayerDecoding {
  std::size_t layer = 0;  // 1-based decoder layer
  Task task = Task::kSae;
  TokenSequence tokens;   // one argmax token per main-target position
};

// Teacher-forced on the gold main target; each intermediate layer's states go
// through both task heads and are read off by per-position argmax.
std::vector<LayerDecoding> decode_intermediate_layers(const Seq2SeqModel& model, const TokenVocab& vocab,
                                                      const Example& example);

}  // namespace anchorparse
