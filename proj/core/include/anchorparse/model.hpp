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

// Pre-norm encoder-decoder transformer that keeps every decoder layer's
// output. Two hierarchical heads (extraction, alignment) read a learned
// softmax mixture of the intermediate layers 1..N-1 plus a uniform residual:
//
//   H_s = sum_i softmax(w_s)_i H_i + sum_i H_i / (N-1)
//
// and project it to vocabulary logits with their own layer norm and weights.
// The main head reads layer N through the final layer norm and the tied
// embedding matrix.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorparse/tensor.hpp"

namespace anchorparse {

enum class Task { kSae = 0, kSaa = 1 };
inline constexpr std::array<Task, 2> kTasks = {Task::kSae, Task::kSaa};
std::string_view to_string(Task task);

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 4;  // N
  std::size_t ff_dim = 256;
  double dropout = 0.1;
  std::size_t max_source_len = 48;  // m
  std::size_t max_target_len = 48;  // k, including <BOS>/<EOS> framing
  // Task heads read the aggregate of layers 1..N-1; when false they read layer
  // N and have no layer weights.
  bool hierarchical = true;
  bool residual = true;  // uniform residual term of the aggregate

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j, ModelConfig base);
  static ModelConfig from_json(const nlohmann::json& j) { return from_json(j, ModelConfig()); }
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
};

struct AttentionParams {
  Linear q, k, v, o;
};

struct FeedForward {
  Linear in, out;
};

struct EncoderLayer {
  LayerNormParams ln_attn, ln_ff;
  AttentionParams attn;
  FeedForward ff;
};

struct DecoderLayer {
  LayerNormParams ln_self, ln_cross, ln_ff;
  AttentionParams self_attn, cross_attn;
  FeedForward ff;
};

struct HierarchicalHead {
  Task task = Task::kSae;
  Tensor layer_weights;  // [N-1], undefined when the model is not hierarchical
  LayerNormParams norm;
  Linear proj;  // [d, |v|]
};

struct Batch {
  std::size_t size = 0;
  std::size_t source_len = 0;
  std::size_t target_len = 0;  // decoder positions
  std::vector<int> source;     // size * source_len, <PAD>-filled
  Mask source_pad;             // size * source_len
  std::vector<int> decoder_input;  // size * target_len, starts with <BOS>
};

struct ForwardTrace {
  std::size_t batch = 0, source_len = 0, target_len = 0;
  Tensor encoder_states;               // [B*m, d]
  std::vector<Tensor> decoder_states;  // N entries of [B*k, d]; [0] is layer 1
  Tensor main_logits;                  // [B*k, |v|]
  std::array<Tensor, 2> task_hidden;   // indexed by Task
  std::array<Tensor, 2> task_logits;
};

struct ForwardOptions {
  bool train = false;
  Rng* dropout_rng = nullptr;  // required when training with dropout
  std::array<bool, 2> task_heads = {true, true};  // indexed by Task
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct DecodeOptions {
  std::size_t beam_size = 1;  // 1 is greedy
  std::size_t max_len = 0;    // generated tokens excluding <EOS>; 0 uses max_target_len - 1
};

struct Generation {
  std::vector<int> tokens;  // without <BOS>/<EOS>
  double log_prob = 0.0;    // includes the <EOS> step when finished
  bool truncated = false;
};

class Seq2SeqModel {
 public:
  Seq2SeqModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Teacher-forced pass over the whole batch. Task logits are left undefined
  // for heads switched off in `options`.
  ForwardTrace forward(const Batch& batch, const ForwardOptions& options = {}) const;

  Tensor aggregate_intermediate(const ForwardTrace& trace, Task task) const;
  Tensor head_logits(const Tensor& hidden, Task task) const;

  Generation generate(std::span<const int> source, const DecodeOptions& options) const;
  // Greedy decoding of many sources in one batched pass per step.
  std::vector<Generation> generate_greedy(const std::vector<std::vector<int>>& sources,
                                          std::size_t max_len = 0) const;

  // Stable order and names; the same tensors the model computes with.
  std::vector<NamedTensor> named_parameters() const;
  std::vector<Tensor> parameters() const;
  const HierarchicalHead& head(Task task) const { return heads_[static_cast<int>(task)]; }
  const Tensor& embedding() const { return embedding_; }
  const LayerNormParams& final_norm() const { return final_norm_; }
  const Tensor& main_bias() const { return main_bias_; }

 private:
  Tensor embed(std::span<const int> ids, std::size_t batch, std::size_t len, bool train, Rng* rng) const;
  Tensor encode(const Batch& batch, bool train, Rng* rng) const;
  std::vector<Tensor> decode_layers(const Tensor& enc, const Batch& batch, bool train, Rng* rng) const;
  Tensor main_head(const Tensor& final_state) const;
  // Log-probabilities of the next token for each prefix row; prefixes share a length.
  std::vector<std::vector<double>> next_token_log_probs(const Tensor& enc, const Batch& enc_batch,
                                                        const std::vector<std::vector<int>>& prefixes) const;

  ModelConfig cfg_;
  Tensor embedding_;  // [|v|, d]
  Tensor positions_;  // [max(m,k), d], constant
  std::vector<EncoderLayer> encoder_;
  LayerNormParams encoder_norm_;
  std::vector<DecoderLayer> decoder_;
  LayerNormParams final_norm_;
  Tensor main_bias_;
  std::array<HierarchicalHead, 2> heads_;
};

}  // namespace anchorparse
