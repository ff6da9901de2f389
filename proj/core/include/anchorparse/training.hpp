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

// Multi-task training: the main loss plus weighted extraction and alignment
// losses, loss-balanced task weights, AdamW with linear warm-up and decay,
// and the ablation switchboard.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "anchorparse/corpus.hpp"
#include "anchorparse/model.hpp"
#include "anchorparse/vocab.hpp"

namespace anchorparse {

enum class Ablation { kFull, kNoSae, kNoSaa, kNoHierarchy, kBaseline };

std::string_view to_string(Ablation a);
// Throws ConfigError for unknown names.
Ablation ablation_from_string(std::string_view name);

bool task_enabled(Ablation a, Task task);
// Task heads of no_hierarchy and baseline read the final decoder layer.
ModelConfig apply_ablation(ModelConfig cfg, Ablation a);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;  // peak
  double warmup = 0.1;          // fraction of total steps
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // 0 disables clipping
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::kFull;
  bool adaptive_weighting = true;  // false pins w1 = w2 = 1
  std::size_t dev_limit = 200;     // dev examples decoded per evaluation; 0 is all
  std::size_t eval_every = 1;      // epochs between dev evaluations

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig()); }
};

// w_t = sqrt(current / first); 0 when first == 0.
double task_weight(double first_loss, double current_loss);

// Per-task first-batch losses of the current epoch and the live weights.
class TaskWeightState {
 public:
  // Forgets the recorded first-batch losses.
  void start_epoch();
  // Records the first loss of the epoch (returning 1) or returns the ratio
  // weight against it.
  double update(Task task, double loss);

  double weight(Task task) const { return weight_[static_cast<int>(task)]; }
  bool anchored(Task task) const { return anchored_[static_cast<int>(task)]; }
  double first_loss(Task task) const { return first_[static_cast<int>(task)]; }

 private:
  std::array<bool, 2> anchored_{};
  std::array<double, 2> first_{};
  std::array<double, 2> weight_{1.0, 1.0};
};

// Teacher-forced batch with per-head targets over the same decoder positions.
// Position i predicts main[i] (then <EOS>) from the prefix <BOS> main[0..i).
struct TrainingBatch {
  Batch inputs;
  std::vector<int> main_targets;
  Mask main_ignore;
  std::vector<int> sae_targets;
  Mask sae_ignore;
  std::vector<int> saa_targets;
  Mask saa_ignore;
  std::vector<int> example_ids;
};

// Sources longer than cfg.max_source_len are truncated; targets that do not
// fit cfg.max_target_len throw ContractError.
TrainingBatch make_batch(std::span<const Example* const> examples, const TokenVocab& vocab,
                         const ModelConfig& cfg);

Tensor main_loss(const ForwardTrace& trace, const TrainingBatch& batch);
// Cross-entropy of a task head under its loss mask. `counted` receives the
// number of supervised positions; zero means an all-masked batch and a zero loss.
Tensor task_loss(const ForwardTrace& trace, const TrainingBatch& batch, Task task,
                 std::size_t* counted = nullptr);
// L_main + w1 L_sae + w2 L_saa with disabled tasks dropped. Task losses may be
// undefined when their task is disabled.
Tensor total_loss(const Tensor& main, const Tensor& sae, const Tensor& saa, double w1, double w2,
                  Ablation ablation);

// Learning rate for 1-based `step` of `total`: linear warm-up to `peak` at
// ceil(warmup * total), then linear decay to zero at `total`.
double scheduled_lr(std::size_t step, std::size_t total, double peak, double warmup);

// Scales gradients so their global L2 norm is at most `max_norm`; returns the
// norm before clipping.
double clip_grad_norm(std::span<const Tensor> params, double max_norm);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay is applied to matrices (rank >= 2) only. Parameters
// without a gradient are left untouched.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWConfig cfg);
  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct EpochSummary {
  std::size_t epoch = 0;
  double main_loss = 0.0;  // mean over batches
  double sae_loss = 0.0;
  double saa_loss = 0.0;
  double dev_exec_acc = -1.0;  // -1 when not evaluated
};

struct FitResult {
  std::unique_ptr<Seq2SeqModel> model;  // best dev accuracy, else the last epoch
  ModelConfig model_config;
  std::vector<EpochSummary> epochs;
  double best_dev_exec_acc = -1.0;
  std::size_t best_epoch = 0;
};

// Sets vocab_size and both maximum lengths from `vocab` and `corpus`, then
// applies the ablation.
ModelConfig resolve_model_config(ModelConfig cfg, const Corpus& corpus, const TokenVocab& vocab,
                                 Ablation ablation);

// Trains on the train split and selects the best epoch on the dev split.
// Writes one JSON record per step and per epoch to `metrics` when given.
// Throws NumericError when a loss or gradient becomes non-finite.
FitResult fit(const Corpus& corpus, const TokenVocab& vocab, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg, std::ostream* metrics = nullptr);

}  // namespace anchorparse
