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

#include "anchorparse/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "anchorparse/analysis.hpp"
#include "anchorparse/checkpoint.hpp"
#include "anchorparse/datagen.hpp"
#include "anchorparse/errors.hpp"

namespace anchorparse {

namespace {

constexpr std::uint64_t kShuffleStream = 10;
constexpr std::uint64_t kDropoutStream = 11;
constexpr std::uint64_t kInitStream = 12;

nlohmann::json loss_or_null(const Tensor& t) { return t.defined() ? nlohmann::json(t.item()) : nlohmann::json(); }

std::string batch_ids(const TrainingBatch& b) {
  std::ostringstream os;
  for (std::size_t i = 0; i < b.example_ids.size(); ++i) os << (i ? "," : "") << b.example_ids[i];
  return os.str();
}

}  // namespace

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoSae: return "no_sae";
    case Ablation::kNoSaa: return "no_saa";
    case Ablation::kNoHierarchy: return "no_hierarchy";
    case Ablation::kBaseline: return "baseline";
  }
  return "full";
}

Ablation ablation_from_string(std::string_view name) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoSae, Ablation::kNoSaa, Ablation::kNoHierarchy, Ablation::kBaseline})
    if (to_string(a) == name) return a;
  throw ConfigError("unknown ablation '" + std::string(name) +
                    "' (expected full, no_sae, no_saa, no_hierarchy or baseline)");
}

bool task_enabled(Ablation a, Task task) {
  switch (a) {
    case Ablation::kBaseline: return false;
    case Ablation::kNoSae: return task != Task::kSae;
    case Ablation::kNoSaa: return task != Task::kSaa;
    default: return true;
  }
}

ModelConfig apply_ablation(ModelConfig cfg, Ablation a) {
  if (a == Ablation::kNoHierarchy || a == Ablation::kBaseline) cfg.hierarchical = false;
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(warmup >= 0.0 && warmup < 1.0)) throw ConfigError("train.warmup must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train.beta1 and train.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be non-negative");
  if (eval_every == 0) throw ConfigError("train.eval_every must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"warmup", warmup},
          {"beta1", beta1},
          {"beta2", beta2},
          {"eps", eps},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"seed", seed},
          {"ablation", std::string(to_string(ablation))},
          {"adaptive_weighting", adaptive_weighting},
          {"dev_limit", dev_limit},
          {"eval_every", eval_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") c.epochs = value.get<std::size_t>();
    else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
    else if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "warmup") c.warmup = value.get<double>();
    else if (key == "beta1") c.beta1 = value.get<double>();
    else if (key == "beta2") c.beta2 = value.get<double>();
    else if (key == "eps") c.eps = value.get<double>();
    else if (key == "weight_decay") c.weight_decay = value.get<double>();
    else if (key == "clip_norm") c.clip_norm = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "ablation") c.ablation = ablation_from_string(value.get<std::string>());
    else if (key == "adaptive_weighting") c.adaptive_weighting = value.get<bool>();
    else if (key == "dev_limit") c.dev_limit = value.get<std::size_t>();
    else if (key == "eval_every") c.eval_every = value.get<std::size_t>();
    else throw ConfigError("unknown train config key '" + key + "'");
  }
  return c;
}

double task_weight(double first_loss, double current_loss) {
  if (first_loss == 0.0) return 0.0;
  return std::sqrt(current_loss / first_loss);
}

void TaskWeightState::start_epoch() {
  anchored_ = {};
  first_ = {};
  weight_ = {1.0, 1.0};
}

double TaskWeightState::update(Task task, double loss) {
  const int i = static_cast<int>(task);
  if (loss < 0.0) throw ContractError("task losses must be non-negative");
  if (!anchored_[i]) {
    anchored_[i] = true;
    first_[i] = loss;
    weight_[i] = 1.0;
    return 1.0;
  }
  weight_[i] = task_weight(first_[i], loss);
  if (first_[i] == 0.0) std::clog << "task " << to_string(task) << " had zero first-batch loss; weight set to 0\n";
  return weight_[i];
}

TrainingBatch make_batch(std::span<const Example* const> examples, const TokenVocab& vocab, const ModelConfig& cfg) {
  if (examples.empty()) throw ContractError("cannot build an empty batch");
  TrainingBatch b;
  const std::size_t n = examples.size();
  std::vector<std::vector<int>> sources, mains, saes, saas;
  std::size_t m = 1, k = 1;
  for (const Example* ex : examples) {
    sources.push_back(encode_source(ex->utterance, vocab, cfg.max_source_len));
    mains.push_back(vocab.encode(ex->targets.main));
    saes.push_back(vocab.encode(ex->targets.sae));
    saas.push_back(vocab.encode(ex->targets.saa));
    m = std::max(m, sources.back().size());
    k = std::max({k, mains.back().size() + 1, saes.back().size() + 1});
    b.example_ids.push_back(ex->id);
  }
  if (k > cfg.max_target_len)
    throw ContractError("target of length " + std::to_string(k) + " exceeds model max_target_len " +
                        std::to_string(cfg.max_target_len));
  b.inputs.size = n;
  b.inputs.source_len = m;
  b.inputs.target_len = k;
  const std::size_t cells = n * k;
  b.inputs.decoder_input.assign(cells, TokenVocab::kPad);
  b.main_targets.assign(cells, TokenVocab::kPad);
  b.sae_targets.assign(cells, TokenVocab::kPad);
  b.saa_targets.assign(cells, TokenVocab::kPad);
  b.main_ignore.assign(cells, 1);
  b.sae_ignore.assign(cells, 1);
  b.saa_ignore.assign(cells, 1);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& src = sources[r];
    b.inputs.source.insert(b.inputs.source.end(), src.begin(), src.end());
    b.inputs.source.insert(b.inputs.source.end(), m - src.size(), TokenVocab::kPad);
    b.inputs.source_pad.insert(b.inputs.source_pad.end(), src.size(), 0);
    b.inputs.source_pad.insert(b.inputs.source_pad.end(), m - src.size(), src.empty() ? 0 : 1);

    const std::size_t row = r * k;
    const auto& main = mains[r];
    b.inputs.decoder_input[row] = TokenVocab::kBos;
    for (std::size_t i = 0; i < main.size(); ++i) {
      if (i + 1 < k) b.inputs.decoder_input[row + i + 1] = main[i];
      b.main_targets[row + i] = main[i];
      b.main_ignore[row + i] = 0;
    }
    b.main_targets[row + main.size()] = TokenVocab::kEos;
    b.main_ignore[row + main.size()] = 0;

    const auto& sae = saes[r];
    const Mask sae_mask = sae_loss_mask(sae.size(), k);
    for (std::size_t i = 0; i < sae.size(); ++i) b.sae_targets[row + i] = sae[i];
    if (!sae.empty()) b.sae_targets[row + sae.size()] = TokenVocab::kEos;
    for (std::size_t i = 0; i < k; ++i) b.sae_ignore[row + i] = sae_mask[i] ? 0 : 1;

    const auto& saa = saas[r];
    const Mask& saa_mask = examples[r]->targets.saa_loss_mask;
    for (std::size_t i = 0; i < saa.size(); ++i) {
      b.saa_targets[row + i] = saa[i];
      b.saa_ignore[row + i] = saa_mask[i] ? 0 : 1;
    }
  }
  return b;
}

Tensor main_loss(const ForwardTrace& trace, const TrainingBatch& batch) {
  return cross_entropy_from_logits(trace.main_logits, batch.main_targets, batch.main_ignore);
}

Tensor task_loss(const ForwardTrace& trace, const TrainingBatch& batch, Task task, std::size_t* counted) {
  const Tensor& logits = trace.task_logits[static_cast<int>(task)];
  if (!logits.defined()) throw ContractError("forward pass did not compute the " + std::string(to_string(task)) + " head");
  if (task == Task::kSae) return cross_entropy_from_logits(logits, batch.sae_targets, batch.sae_ignore, counted);
  return cross_entropy_from_logits(logits, batch.saa_targets, batch.saa_ignore, counted);
}

Tensor total_loss(const Tensor& main, const Tensor& sae, const Tensor& saa, double w1, double w2, Ablation ablation) {
  Tensor loss = main;
  if (task_enabled(ablation, Task::kSae)) loss = add(loss, scale(sae, w1));
  if (task_enabled(ablation, Task::kSaa)) loss = add(loss, scale(saa, w2));
  return loss;
}

double scheduled_lr(std::size_t step, std::size_t total, double peak, double warmup) {
  if (total == 0 || step == 0 || step > total) throw ContractError("step outside the schedule");
  const auto w = static_cast<std::size_t>(std::ceil(warmup * static_cast<double>(total)));
  if (step <= w) return peak * static_cast<double>(step) / static_cast<double>(w);
  return peak * static_cast<double>(total - step) / static_cast<double>(total - w);
}

double clip_grad_norm(std::span<const Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    if (p.has_grad())
      for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / (norm + 1e-12);
    for (const Tensor& p : params)
      if (p.has_grad())
        for (double& g : const_cast<Tensor&>(p).mutable_grad()) g *= f;
  }
  return norm;
}

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto x = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    const double decay = p.rank() >= 2 ? lr * cfg_.weight_decay : 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= decay * x[j] + lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

ModelConfig resolve_model_config(ModelConfig cfg, const Corpus& corpus, const TokenVocab& vocab, Ablation ablation) {
  cfg.vocab_size = vocab.size();
  std::size_t m = 1, k = 2;
  for (const Example& ex : corpus.examples()) {
    m = std::max(m, ex.utterance.size());
    k = std::max({k, ex.targets.main.size() + 1, ex.targets.sae.size() + 1});
  }
  cfg.max_source_len = m;
  cfg.max_target_len = k;
  return apply_ablation(cfg, ablation);
}

FitResult fit(const Corpus& corpus, const TokenVocab& vocab, const ModelConfig& model_cfg, const TrainConfig& tc,
              std::ostream* metrics) {
  tc.validate();
  FitResult result;
  result.model_config = resolve_model_config(model_cfg, corpus, vocab, tc.ablation);
  result.model_config.validate();
  const ModelConfig& mc = result.model_config;

  std::uint64_t init_seed = derive_rng(tc.seed, kInitStream, 0)();
  auto model = std::make_unique<Seq2SeqModel>(mc, init_seed);
  result.model = std::make_unique<Seq2SeqModel>(mc, init_seed);

  std::vector<const Example*> train = corpus.split("train");
  if (train.empty()) throw ConfigError("corpus has no train examples");
  std::vector<const Example*> dev = corpus.split("dev");
  if (tc.dev_limit && dev.size() > tc.dev_limit) dev.resize(tc.dev_limit);

  const std::vector<Tensor> params = model->parameters();
  AdamW opt(params, {tc.beta1, tc.beta2, tc.eps, tc.weight_decay});
  Rng shuffle_rng = derive_rng(tc.seed, kShuffleStream, 0);
  Rng dropout_rng = derive_rng(tc.seed, kDropoutStream, 0);

  const std::size_t per_epoch = (train.size() + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total_steps = per_epoch * tc.epochs;
  ForwardOptions fwd;
  fwd.train = true;
  fwd.dropout_rng = &dropout_rng;
  for (Task t : kTasks) fwd.task_heads[static_cast<int>(t)] = task_enabled(tc.ablation, t);
  const bool sae_on = fwd.task_heads[0];
  const bool saa_on = fwd.task_heads[1];

  TaskWeightState weights;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), shuffle_rng);
    weights.start_epoch();
    EpochSummary summary;
    summary.epoch = epoch;
    double w1 = 1.0, w2 = 1.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      ++step;
      const std::size_t lo = b * tc.batch_size;
      const std::size_t hi = std::min(train.size(), lo + tc.batch_size);
      const TrainingBatch batch = make_batch(std::span(train).subspan(lo, hi - lo), vocab, mc);

      opt.zero_grad();
      const ForwardTrace trace = model->forward(batch.inputs, fwd);
      const Tensor l_main = main_loss(trace, batch);
      const Tensor l_sae = sae_on ? task_loss(trace, batch, Task::kSae) : Tensor();
      const Tensor l_saa = saa_on ? task_loss(trace, batch, Task::kSaa) : Tensor();
      if (tc.adaptive_weighting) {
        if (sae_on) w1 = weights.update(Task::kSae, l_sae.item());
        if (saa_on) w2 = weights.update(Task::kSaa, l_saa.item());
      }
      const Tensor loss = total_loss(l_main, l_sae, l_saa, w1, w2, tc.ablation);
      if (!std::isfinite(loss.item()))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                           "; batch example ids: " + batch_ids(batch));
      backward(loss);
      const double gnorm = clip_grad_norm(params, tc.clip_norm);
      if (!std::isfinite(gnorm))
        throw NumericError("non-finite gradient norm at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step) + "; batch example ids: " + batch_ids(batch));
      const double lr = scheduled_lr(step, total_steps, tc.learning_rate, tc.warmup);
      opt.step(lr);

      summary.main_loss += l_main.item();
      if (sae_on) summary.sae_loss += l_sae.item();
      if (saa_on) summary.saa_loss += l_saa.item();
      if (metrics) {
        nlohmann::json rec = {{"type", "step"},
                              {"epoch", epoch},
                              {"step", step},
                              {"batch", b},
                              {"L_main", l_main.item()},
                              {"L_SAE", loss_or_null(l_sae)},
                              {"L_SAA", loss_or_null(l_saa)},
                              {"w1", sae_on ? nlohmann::json(w1) : nlohmann::json()},
                              {"w2", saa_on ? nlohmann::json(w2) : nlohmann::json()},
                              {"lr", lr},
                              {"grad_norm", gnorm}};
        *metrics << rec.dump() << '\n';
      }
    }
    const auto denom = static_cast<double>(per_epoch);
    summary.main_loss /= denom;
    summary.sae_loss /= denom;
    summary.saa_loss /= denom;

    const bool evaluate = !dev.empty() && (epoch % tc.eval_every == 0 || epoch == tc.epochs);
    if (evaluate) {
      const auto preds = predict(*model, vocab, dev, 1);
      summary.dev_exec_acc = execution_accuracy(preds, dev, corpus);
      if (summary.dev_exec_acc > result.best_dev_exec_acc) {
        result.best_dev_exec_acc = summary.dev_exec_acc;
        result.best_epoch = epoch;
        copy_parameters(*model, *result.model);
      }
    } else if (dev.empty() && epoch == tc.epochs) {
      result.best_epoch = epoch;
      copy_parameters(*model, *result.model);
    }
    if (metrics) {
      nlohmann::json rec = {{"type", "epoch"},
                            {"epoch", epoch},
                            {"step", step},
                            {"L_main", summary.main_loss},
                            {"L_SAE", sae_on ? nlohmann::json(summary.sae_loss) : nlohmann::json()},
                            {"L_SAA", saa_on ? nlohmann::json(summary.saa_loss) : nlohmann::json()},
                            {"w1", sae_on ? nlohmann::json(w1) : nlohmann::json()},
                            {"w2", saa_on ? nlohmann::json(w2) : nlohmann::json()},
                            {"dev_exec_acc", summary.dev_exec_acc >= 0.0 ? nlohmann::json(summary.dev_exec_acc)
                                                                         : nlohmann::json()}};
      if (mc.hierarchical)
        for (Task t : kTasks) {
          if (!task_enabled(tc.ablation, t)) continue;
          const Tensor p = softmax(model->head(t).layer_weights.detach(), 0);
          rec["ws_" + std::string(to_string(t))] = std::vector<double>(p.values().begin(), p.values().end());
        }
      *metrics << rec.dump() << '\n';
      metrics->flush();
    }
    result.epochs.push_back(summary);
  }
  return result;
}

}  // namespace anchorparse
