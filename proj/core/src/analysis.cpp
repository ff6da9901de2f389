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

#include "anchorparse/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "anchorparse/anchors.hpp"
#include "anchorparse/executor.hpp"

namespace anchorparse {

namespace {

void check_sizes(std::size_t predictions, std::size_t golds) {
  if (predictions != golds)
    throw ContractError("expected one prediction per example, got " + std::to_string(predictions) + " for " +
                        std::to_string(golds));
}

std::vector<std::string> sorted_anchor_tokens(const TokenSequence& tokens, const SchemaVocabulary& vocab) {
  std::vector<std::string> out;
  for (const auto& a : extract_anchors(tokens, vocab)) out.push_back(a.token);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<TokenSequence> predict(const Seq2SeqModel& model, const TokenVocab& vocab,
                                   std::span<const Example* const> examples, std::size_t beam_size,
                                   std::size_t batch_size) {
  std::vector<TokenSequence> out;
  out.reserve(examples.size());
  const std::size_t m = model.config().max_source_len;
  if (beam_size <= 1) {
    for (std::size_t lo = 0; lo < examples.size(); lo += batch_size) {
      const std::size_t hi = std::min(examples.size(), lo + batch_size);
      std::vector<std::vector<int>> sources;
      for (std::size_t i = lo; i < hi; ++i) sources.push_back(encode_source(examples[i]->utterance, vocab, m));
      for (const auto& g : model.generate_greedy(sources)) out.push_back(vocab.decode(g.tokens));
    }
    return out;
  }
  DecodeOptions opts;
  opts.beam_size = beam_size;
  for (const Example* ex : examples)
    out.push_back(vocab.decode(model.generate(encode_source(ex->utterance, vocab, m), opts).tokens));
  return out;
}

Verdict judge(const TokenSequence& prediction, const Example& gold, const SchemaDocument& schema) {
  const auto parsed = parse_logical_form(join_tokens(prediction), gold.dialect);
  if (!parsed) return Verdict::kParseFailure;
  const auto gold_form = parse_logical_form(join_tokens(gold.targets.main), gold.dialect);
  if (!gold_form) throw ContractError("gold logical form of example " + std::to_string(gold.id) + " does not parse");
  ResultSet predicted;
  try {
    predicted = execute(parsed.value(), schema);
  } catch (const ExecutionError&) {
    return Verdict::kExecutionFailure;
  }
  return result_equal(predicted, execute(gold_form.value(), schema)) ? Verdict::kCorrect : Verdict::kWrongResult;
}

double execution_accuracy(std::span<const TokenSequence> predictions, std::span<const Example* const> golds,
                          const Corpus& corpus) {
  check_sizes(predictions.size(), golds.size());
  if (golds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < golds.size(); ++i)
    if (judge(predictions[i], *golds[i], corpus.schema(golds[i]->schema_ref)) == Verdict::kCorrect) ++correct;
  return static_cast<double>(correct) / static_cast<double>(golds.size());
}

bool strict_hallucination(const TokenSequence& prediction, Dialect dialect, const SchemaVocabulary& vocab) {
  const auto parsed = parse_logical_form(join_tokens(prediction), dialect);
  if (!parsed) return true;
  const Serialized s = std::visit([](const auto& q) { return serialize_with_slots(q); }, parsed.value());
  return std::any_of(s.slots.begin(), s.slots.end(),
                     [&](const SchemaSlot& slot) { return !vocab.contains(s.tokens[slot.position]); });
}

bool anchor_mismatch(const TokenSequence& prediction, const Example& gold, const SchemaVocabulary& vocab) {
  const auto parsed = parse_logical_form(join_tokens(prediction), gold.dialect);
  if (!parsed) return true;
  return sorted_anchor_tokens(serialize(parsed.value()), vocab) != sorted_anchor_tokens(gold.targets.main, vocab);
}

HallucinationCounts count_hallucinations(std::span<const TokenSequence> predictions,
                                         std::span<const Example* const> golds, const Corpus& corpus) {
  check_sizes(predictions.size(), golds.size());
  HallucinationCounts c;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const SchemaVocabulary vocab = corpus.schema(golds[i]->schema_ref).vocabulary();
    if (strict_hallucination(predictions[i], golds[i]->dialect, vocab)) ++c.strict;
    if (anchor_mismatch(predictions[i], *golds[i], vocab)) ++c.anchor_mismatch;
  }
  return c;
}

double EvalReport::exec_acc() const {
  return examples ? static_cast<double>(correct) / static_cast<double>(examples) : 0.0;
}

double EvalReport::exact_match_rate() const {
  return examples ? static_cast<double>(exact_match) / static_cast<double>(examples) : 0.0;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json shapes = nlohmann::json::object();
  for (const auto& [shape, s] : per_shape)
    shapes[shape] = {{"total", s.total},
                     {"correct", s.correct},
                     {"exec_acc", s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0}};
  return {{"examples", examples},
          {"exec_acc", exec_acc()},
          {"exact_match", exact_match_rate()},
          {"parse_failures", parse_failures},
          {"execution_failures", execution_failures},
          {"strict_hallucinations", hallucinations.strict},
          {"anchor_mismatch_hallucinations", hallucinations.anchor_mismatch},
          {"per_shape", shapes}};
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "examples             " << examples << '\n'
     << "execution accuracy   " << exec_acc() << '\n'
     << "exact match          " << exact_match_rate() << '\n'
     << "parse failures       " << parse_failures << '\n'
     << "execution failures   " << execution_failures << '\n'
     << "strict hallucination " << hallucinations.strict << '\n'
     << "anchor mismatch      " << hallucinations.anchor_mismatch << '\n'
     << '\n'
     << std::left << std::setw(24) << "shape" << std::right << std::setw(8) << "total" << std::setw(10) << "exec_acc"
     << '\n';
  for (const auto& [shape, s] : per_shape)
    os << std::left << std::setw(24) << shape << std::right << std::setw(8) << s.total << std::setw(10)
       << (s.total ? static_cast<double>(s.correct) / static_cast<double>(s.total) : 0.0) << '\n';
  return os.str();
}

EvalReport evaluate_predictions(std::span<const TokenSequence> predictions, std::span<const Example* const> golds,
                                const Corpus& corpus) {
  check_sizes(predictions.size(), golds.size());
  EvalReport r;
  r.examples = golds.size();
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const Example& gold = *golds[i];
    const SchemaDocument& schema = corpus.schema(gold.schema_ref);
    const Verdict v = judge(predictions[i], gold, schema);
    ShapeStats& s = r.per_shape[gold.shape];
    ++s.total;
    if (v == Verdict::kCorrect) {
      ++r.correct;
      ++s.correct;
    }
    if (v == Verdict::kParseFailure) ++r.parse_failures;
    if (v == Verdict::kExecutionFailure) ++r.execution_failures;
    if (predictions[i] == gold.targets.main) ++r.exact_match;
  }
  r.hallucinations = count_hallucinations(predictions, golds, corpus);
  return r;
}

LayerWeights layer_weights_from(Task task, std::span<const double> raw) {
  LayerWeights lw;
  lw.task = task;
  if (raw.empty()) return lw;
  const double hi = *std::max_element(raw.begin(), raw.end());
  double z = 0.0;
  for (double w : raw) z += std::exp(w - hi);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    lw.probs.push_back(std::exp(raw[i] - hi) / z);
    lw.center_of_mass += static_cast<double>(i + 1) * lw.probs.back();
  }
  return lw;
}

nlohmann::json WeightReport::to_json() const {
  if (!applicable) return {{"applicable", false}, {"reason", "not applicable: model has no hierarchical heads"}};
  nlohmann::json tasks_json = nlohmann::json::object();
  for (const auto& t : tasks)
    tasks_json[std::string(to_string(t.task))] = {{"softmax", t.probs}, {"center_of_mass", t.center_of_mass}};
  return {{"applicable", true}, {"tasks", tasks_json}};
}

std::string WeightReport::render() const {
  if (!applicable) return "layer weights: not applicable (model has no hierarchical heads)\n";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << std::left << std::setw(8) << "task";
  const std::size_t layers = tasks.empty() ? 0 : tasks.front().probs.size();
  for (std::size_t i = 1; i <= layers; ++i) os << std::right << std::setw(10) << ("L" + std::to_string(i));
  os << std::setw(10) << "center" << '\n';
  for (const auto& t : tasks) {
    os << std::left << std::setw(8) << to_string(t.task);
    for (double p : t.probs) os << std::right << std::setw(10) << p;
    os << std::setw(10) << t.center_of_mass << '\n';
  }
  return os.str();
}

std::string WeightReport::plot_data() const {
  std::ostringstream os;
  for (const auto& t : tasks)
    for (std::size_t i = 0; i < t.probs.size(); ++i)
      os << nlohmann::json{{"task", to_string(t.task)}, {"layer", i + 1}, {"weight", t.probs[i]}}.dump() << '\n';
  return os.str();
}

WeightReport weight_distribution_report(const Seq2SeqModel& model) {
  WeightReport r;
  r.applicable = model.config().hierarchical;
  if (!r.applicable) return r;
  for (Task t : kTasks) {
    const auto raw = model.head(t).layer_weights.values();
    r.tasks.push_back(layer_weights_from(t, raw));
  }
  return r;
}

std::vector<LayerDecoding> decode_intermediate_layers(const Seq2SeqModel& model, const TokenVocab& vocab,
                                                      const Example& example) {
  NoGradGuard no_grad;
  const ModelConfig& cfg = model.config();
  const std::vector<int> main = vocab.encode(example.targets.main);
  if (main.empty()) throw ContractError("example " + std::to_string(example.id) + " has an empty target");
  if (main.size() > cfg.max_target_len) throw ContractError("target longer than the model's max_target_len");
  const std::vector<int> src = encode_source(example.utterance, vocab, cfg.max_source_len);

  Batch b;
  b.size = 1;
  b.source_len = std::max<std::size_t>(1, src.size());
  b.source = src.empty() ? std::vector<int>{TokenVocab::kPad} : src;
  b.source_pad.assign(b.source_len, 0);
  b.target_len = main.size();
  b.decoder_input.push_back(TokenVocab::kBos);
  b.decoder_input.insert(b.decoder_input.end(), main.begin(), main.end() - 1);

  ForwardOptions opts;
  opts.task_heads = {false, false};
  const ForwardTrace trace = model.forward(b, opts);
  std::vector<LayerDecoding> out;
  const std::size_t v = cfg.vocab_size;
  for (std::size_t layer = 0; layer + 1 < trace.decoder_states.size(); ++layer)
    for (Task t : kTasks) {
      const Tensor logits = model.head_logits(trace.decoder_states[layer], t);
      const auto vals = logits.values();
      LayerDecoding d;
      d.layer = layer + 1;
      d.task = t;
      for (std::size_t pos = 0; pos < main.size(); ++pos) {
        const auto row = vals.subspan(pos * v, v);
        const auto best = std::max_element(row.begin(), row.end()) - row.begin();
        d.tokens.push_back(vocab.token(static_cast<int>(best)));
      }
      out.push_back(std::move(d));
    }
  return out;
}

}  // namespace anchorparse
