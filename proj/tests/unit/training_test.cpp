#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "anchorparse/datagen.hpp"
#include "anchorparse/errors.hpp"
#include "anchorparse/training.hpp"
#include "oracles/model_helpers.hpp"
#include "oracles/scalar_ce.hpp"

namespace anchorparse {
namespace {

using nlohmann::json;

TEST(Training, AblationNames) {
  for (Ablation a : {Ablation::kFull, Ablation::kNoSae, Ablation::kNoSaa, Ablation::kNoHierarchy, Ablation::kBaseline})
    EXPECT_EQ(ablation_from_string(to_string(a)), a);
  EXPECT_THROW(ablation_from_string("partial"), ConfigError);
  EXPECT_FALSE(task_enabled(Ablation::kNoSae, Task::kSae));
  EXPECT_TRUE(task_enabled(Ablation::kNoSae, Task::kSaa));
  EXPECT_TRUE(task_enabled(Ablation::kNoHierarchy, Task::kSae));
  EXPECT_FALSE(task_enabled(Ablation::kBaseline, Task::kSaa));
  EXPECT_FALSE(apply_ablation(ModelConfig{}, Ablation::kNoHierarchy).hierarchical);
  EXPECT_TRUE(apply_ablation(ModelConfig{}, Ablation::kNoSaa).hierarchical);
}

TEST(Training, TaskWeights) {
  EXPECT_EQ(task_weight(2.0, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(task_weight(4.0, 1.0), 0.5);
  EXPECT_NEAR(task_weight(1.0, 2.0), 1.41421356, 1e-8);
  EXPECT_EQ(task_weight(0.0, 3.0), 0.0);
}

TEST(Training, WeightStateReanchorsEachEpoch) {
  TaskWeightState s;
  s.start_epoch();
  EXPECT_EQ(s.update(Task::kSae, 8.0), 1.0);
  EXPECT_DOUBLE_EQ(s.update(Task::kSae, 2.0), 0.5);
  EXPECT_EQ(s.first_loss(Task::kSae), 8.0);
  EXPECT_FALSE(s.anchored(Task::kSaa));
  s.start_epoch();
  EXPECT_EQ(s.update(Task::kSae, 3.0), 1.0);
  EXPECT_DOUBLE_EQ(s.update(Task::kSae, 6.0), std::sqrt(2.0));
}

TEST(Training, TotalLoss) {
  const Tensor m = Tensor::scalar(1.0), a = Tensor::scalar(0.5), b = Tensor::scalar(0.25);
  EXPECT_EQ(total_loss(m, a, b, 1.0, 1.0, Ablation::kFull).item(), 1.75);
  EXPECT_EQ(total_loss(m, a, b, 0.5, 2.0, Ablation::kFull).item(), 1.75);
  EXPECT_EQ(total_loss(m, Tensor(), b, 3.0, 2.0, Ablation::kNoSae).item(), 1.5);
  EXPECT_EQ(total_loss(m, a, Tensor(), 2.0, 3.0, Ablation::kNoSaa).item(), 2.0);
  EXPECT_EQ(total_loss(m, Tensor(), Tensor(), 5.0, 5.0, Ablation::kBaseline).item(), 1.0);
}

// A trace and batch with hand-set logits over k positions of one example.
struct HandCase {
  ForwardTrace trace;
  TrainingBatch batch;
};

HandCase uniform_case(std::size_t k, std::size_t vocab) {
  HandCase c;
  c.trace.batch = 1;
  c.trace.target_len = k;
  c.trace.main_logits = Tensor::zeros({k, vocab});
  c.trace.task_logits = {Tensor::zeros({k, vocab}), Tensor::zeros({k, vocab})};
  for (std::size_t i = 0; i < k; ++i) {
    c.batch.main_targets.push_back(static_cast<int>(i % vocab));
    c.batch.sae_targets.push_back(static_cast<int>((i + 1) % vocab));
    c.batch.saa_targets.push_back(static_cast<int>((i + 2) % vocab));
  }
  c.batch.main_ignore = Mask(k, 0);
  c.batch.sae_ignore = Mask(k, 1);
  c.batch.saa_ignore = Mask(k, 1);
  return c;
}

TEST(Training, UniformLogitsGiveLogVocab) {
  HandCase c = uniform_case(6, 16);
  c.batch.saa_ignore = {1, 0, 1, 0, 0, 1};
  std::size_t counted = 0;
  EXPECT_NEAR(task_loss(c.trace, c.batch, Task::kSaa, &counted).item(), std::log(16.0), 1e-12);
  EXPECT_EQ(counted, 3u);
  EXPECT_NEAR(main_loss(c.trace, c.batch).item(), std::log(16.0), 1e-12);
}

TEST(Training, AllMaskedTaskLossIsZero) {
  HandCase c = uniform_case(4, 8);
  std::size_t counted = 9;
  EXPECT_EQ(task_loss(c.trace, c.batch, Task::kSae, &counted).item(), 0.0);
  EXPECT_EQ(counted, 0u);
}

TEST(Training, MaskedPositionsDoNotAffectLoss) {
  HandCase c = uniform_case(5, 7);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> logits(35);
  for (double& x : logits) x = g(rng);
  c.trace.task_logits[1] = Tensor::from_values({5, 7}, logits);
  c.batch.saa_ignore = {0, 1, 0, 1, 1};
  const double base = task_loss(c.trace, c.batch, Task::kSaa).item();
  for (std::size_t v = 0; v < 7; ++v) {
    logits[1 * 7 + v] += 10.0 * g(rng);
    logits[4 * 7 + v] -= 3.0;
  }
  c.trace.task_logits[1] = Tensor::from_values({5, 7}, logits);
  EXPECT_EQ(task_loss(c.trace, c.batch, Task::kSaa).item(), base);
  EXPECT_NEAR(base, oracle::scalar_cross_entropy(logits, 5, 7, c.batch.saa_targets, c.batch.saa_ignore), 1e-10);
}

GenConfig toy_gen(std::size_t train, std::size_t dev = 20) {
  GenConfig cfg;
  cfg.seed = 11;
  cfg.train_count = train;
  cfg.dev_count = dev;
  cfg.test_count = 20;
  cfg.db_schemas = 4;
  cfg.kb_schemas = 4;
  return cfg;
}

TEST(Training, MakeBatchAlignsTargets) {
  const Corpus c = generate_corpus(toy_gen(40));
  const TokenVocab vocab = TokenVocab::from_corpus(c);
  const auto train = c.split("train");
  const ModelConfig mc = resolve_model_config(ModelConfig{}, c, vocab, Ablation::kFull);
  const TrainingBatch b = make_batch(std::span(train).subspan(0, 3), vocab, mc);
  const std::size_t k = b.inputs.target_len;
  for (std::size_t r = 0; r < 3; ++r) {
    const SupervisionTargets& t = train[r]->targets;
    EXPECT_EQ(b.inputs.decoder_input[r * k], TokenVocab::kBos);
    for (std::size_t i = 0; i < t.main.size(); ++i) {
      EXPECT_EQ(b.main_targets[r * k + i], vocab.id(t.main[i]));
      EXPECT_EQ(b.inputs.decoder_input[r * k + i + 1], vocab.id(t.main[i]));
      EXPECT_EQ(b.saa_ignore[r * k + i], t.saa_loss_mask[i] ? 0 : 1);
    }
    EXPECT_EQ(b.main_targets[r * k + t.main.size()], TokenVocab::kEos);
    for (std::size_t i = 0; i < t.sae.size(); ++i) EXPECT_EQ(b.sae_targets[r * k + i], vocab.id(t.sae[i]));
    if (!t.sae.empty()) {
      EXPECT_EQ(b.sae_targets[r * k + t.sae.size()], TokenVocab::kEos);
      EXPECT_EQ(b.sae_ignore[r * k + t.sae.size()], 0);
    }
    for (std::size_t i = t.sae.size() + 1; i < k; ++i) EXPECT_EQ(b.sae_ignore[r * k + i], 1);
    EXPECT_EQ(b.example_ids[r], train[r]->id);
  }
}

TEST(Training, ScheduleShape) {
  const std::size_t total = 200;
  const auto warm = static_cast<std::size_t>(std::ceil(0.1 * total));
  double prev = 0.0;
  for (std::size_t s = 1; s <= total; ++s) {
    const double lr = scheduled_lr(s, total, 1e-3, 0.1);
    if (s <= warm) {
      EXPECT_GT(lr, prev);
    } else {
      EXPECT_LT(lr, prev);
    }
    prev = lr;
  }
  EXPECT_DOUBLE_EQ(scheduled_lr(warm, total, 1e-3, 0.1), 1e-3);
  EXPECT_EQ(scheduled_lr(total, total, 1e-3, 0.1), 0.0);
  EXPECT_THROW(scheduled_lr(0, total, 1e-3, 0.1), ContractError);
}

TEST(Training, ClipGradNorm) {
  Tensor a = Tensor::from_values({2}, {0.0, 0.0}, true);
  Tensor b = Tensor::from_values({1}, {0.0}, true);
  backward(add(sum(scale(a, 3.0)), scale(sum(b), 4.0)));
  std::vector<Tensor> params = {a, b};
  const double before = clip_grad_norm(params, 1.0);
  EXPECT_NEAR(before, std::sqrt(9.0 + 9.0 + 16.0), 1e-12);
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad()) sq += g * g;
  EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
}

TEST(Training, AdamWDecaysOnlyMatrices) {
  Tensor m = Tensor::from_values({1, 1}, {1.0}, true);
  Tensor v = Tensor::from_values({1}, {1.0}, true);
  Tensor untouched = Tensor::from_values({1, 1}, {1.0}, true);
  AdamW opt({m, v, untouched}, AdamWConfig{0.9, 0.999, 1e-8, 0.5});
  opt.zero_grad();
  backward(add(scale(sum(m), 0.0), scale(sum(v), 0.0)));
  opt.step(0.1);
  EXPECT_NEAR(m.values()[0], 1.0 - 0.1 * 0.5, 1e-12);
  EXPECT_EQ(v.values()[0], 1.0);
  EXPECT_EQ(untouched.values()[0], 1.0);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Training, AdamWFirstStepMovesByLr) {
  Tensor x = Tensor::from_values({1}, {2.0}, true);
  AdamW opt({x}, AdamWConfig{0.9, 0.999, 1e-12, 0.0});
  opt.zero_grad();
  backward(scale(sum(x), 3.0));
  opt.step(0.01);
  EXPECT_NEAR(x.values()[0], 2.0 - 0.01, 1e-9);
}

TEST(Training, ConfigRejectsBadValues) {
  TrainConfig tc;
  tc.warmup = 1.0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = TrainConfig{};
  tc.learning_rate = 0.0;
  EXPECT_THROW(tc.validate(), ConfigError);
  EXPECT_THROW(TrainConfig::from_json(json{{"epochz", 3}}), ConfigError);
  EXPECT_EQ(TrainConfig::from_json(TrainConfig{}.to_json()).to_json(), TrainConfig{}.to_json());
}

ModelConfig small_model() {
  ModelConfig mc;
  mc.d_model = 32;
  mc.heads = 2;
  mc.encoder_layers = 1;
  mc.decoder_layers = 3;
  mc.ff_dim = 64;
  return mc;
}

std::vector<json> parse_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

TEST(Training, SameSeedGivesIdenticalLosses) {
  const Corpus c = generate_corpus(toy_gen(64));
  const TokenVocab vocab = TokenVocab::from_corpus(c);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  const FitResult a = fit(c, vocab, small_model(), tc);
  const FitResult b = fit(c, vocab, small_model(), tc);
  EXPECT_EQ(a.epochs[0].main_loss, b.epochs[0].main_loss);
  EXPECT_EQ(a.epochs[0].sae_loss, b.epochs[0].sae_loss);
  tc.seed = 2;
  EXPECT_NE(fit(c, vocab, small_model(), tc).epochs[0].main_loss, a.epochs[0].main_loss);
}

TEST(Training, MetricsLogFollowsTheWeightingRule) {
  const Corpus c = generate_corpus(toy_gen(96));
  const TokenVocab vocab = TokenVocab::from_corpus(c);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  std::ostringstream log;
  fit(c, vocab, small_model(), tc, &log);
  double first_sae = 0.0, first_saa = 0.0;
  std::size_t steps = 0, epochs = 0;
  for (const json& r : parse_lines(log.str())) {
    if (r.at("type") == "epoch") {
      ++epochs;
      EXPECT_EQ(r.at("ws_sae").size(), 2u);
      continue;
    }
    ++steps;
    const double sae = r.at("L_SAE"), saa = r.at("L_SAA");
    if (r.at("batch") == 0) {
      first_sae = sae;
      first_saa = saa;
      EXPECT_EQ(r.at("w1").get<double>(), 1.0);
      EXPECT_EQ(r.at("w2").get<double>(), 1.0);
    }
    EXPECT_NEAR(r.at("w1").get<double>(), std::sqrt(sae / first_sae), 1e-12);
    EXPECT_NEAR(r.at("w2").get<double>(), std::sqrt(saa / first_saa), 1e-12);
  }
  EXPECT_EQ(steps, 12u);
  EXPECT_EQ(epochs, 2u);
}

TEST(Training, AblationLogsOmitDisabledQuantities) {
  const Corpus c = generate_corpus(toy_gen(32));
  const TokenVocab vocab = TokenVocab::from_corpus(c);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  for (Ablation a : {Ablation::kNoHierarchy, Ablation::kNoSae, Ablation::kBaseline}) {
    tc.ablation = a;
    std::ostringstream log;
    fit(c, vocab, small_model(), tc, &log);
    for (const json& r : parse_lines(log.str())) {
      if (a == Ablation::kNoHierarchy) EXPECT_FALSE(r.contains("ws_sae") || r.contains("ws_saa"));
      if (a == Ablation::kNoSae) {
        EXPECT_TRUE(r.at("L_SAE").is_null());
        EXPECT_TRUE(r.at("w1").is_null());
        if (r.at("type") == "epoch") EXPECT_TRUE(r.contains("ws_saa") && !r.contains("ws_sae"));
      }
      if (a == Ablation::kBaseline) EXPECT_TRUE(r.at("L_SAA").is_null() && r.at("L_SAE").is_null());
    }
  }
}

TEST(Training, SmokeRunReducesMainLoss) {
  const Corpus c = generate_corpus(toy_gen(200, 10));
  const TokenVocab vocab = TokenVocab::from_corpus(c);
  ModelConfig mc;
  mc.d_model = 64;
  mc.decoder_layers = 4;
  mc.dropout = 0.0;
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.learning_rate = 2e-3;
  tc.eval_every = 30;
  const FitResult r = fit(c, vocab, mc, tc);
  ASSERT_EQ(r.epochs.size(), 30u);
  EXPECT_LT(r.epochs.back().main_loss, 0.1 * r.epochs.front().main_loss)
      << r.epochs.front().main_loss << " -> " << r.epochs.back().main_loss;
}

}  // namespace
}  // namespace anchorparse
