#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "anchorparse/checkpoint.hpp"
#include "anchorparse/errors.hpp"
#include "anchorparse/model.hpp"
#include "oracles/finite_diff.hpp"
#include "oracles/model_helpers.hpp"

namespace anchorparse {
namespace {

using oracle::random_batch;
using oracle::tiny_config;
using oracle::to_vector;

TEST(Model, TraceShapes) {
  ModelConfig cfg = tiny_config(20, 32, 4, 4);
  Seq2SeqModel model(cfg, 1);
  std::mt19937_64 rng(1);
  const Batch b = random_batch(20, 1, 7, 9, rng);
  const ForwardTrace t = model.forward(b);
  ASSERT_EQ(t.decoder_states.size(), 4u);
  for (const auto& s : t.decoder_states) EXPECT_EQ(s.shape(), (Shape{9, 32}));
  EXPECT_EQ(t.encoder_states.shape(), (Shape{7, 32}));
  EXPECT_EQ(t.main_logits.shape(), (Shape{9, 20}));
  for (Task task : kTasks) {
    EXPECT_EQ(t.task_logits[static_cast<int>(task)].shape(), (Shape{9, 20}));
    EXPECT_EQ(model.head(task).layer_weights.shape(), (Shape{3}));
  }
  for (double v : t.main_logits.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Model, ConfigValidation) {
  ModelConfig cfg = tiny_config(20, 30, 3, 4);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config(20, 32, 2, 4);
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(ModelConfig::from_json(tiny_config(20, 32, 3, 4).to_json()).to_json(), tiny_config(20, 32, 3, 4).to_json());
}

TEST(Model, RejectsOutOfRangeIds) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 1);
  std::mt19937_64 rng(1);
  Batch b = random_batch(20, 1, 4, 4, rng);
  b.source[0] = 20;
  EXPECT_THROW(model.forward(b), ContractError);
  b = random_batch(20, 1, 13, 4, rng);
  EXPECT_THROW(model.forward(b), ContractError);
}

TEST(Model, DecoderIsCausal) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 2);
  std::mt19937_64 rng(2);
  const Batch b = random_batch(20, 1, 6, 8, rng);
  const ForwardTrace base = model.forward(b);
  for (std::size_t j = 1; j < 8; ++j) {
    Batch p = b;
    p.decoder_input[j] = p.decoder_input[j] == 7 ? 8 : 7;
    const ForwardTrace t = model.forward(p);
    for (std::size_t pos = 0; pos < 8; ++pos) {
      bool same = true;
      for (std::size_t v = 0; v < 20; ++v) same = same && t.main_logits.values()[pos * 20 + v] == base.main_logits.values()[pos * 20 + v];
      if (pos < j) EXPECT_TRUE(same) << "perturbed " << j << " changed " << pos;
      if (pos == j) EXPECT_FALSE(same);
    }
  }
}

TEST(Model, PaddedSourcePositionsAreIgnored) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 3);
  std::mt19937_64 rng(3);
  Batch b = random_batch(20, 2, 5, 4, rng);
  const ForwardTrace base = model.forward(b);
  b.source[5 + 4] = 11;  // row 1 pads its last position
  const ForwardTrace t = model.forward(b);
  for (std::size_t i = 4 * 20; i < 8 * 20; ++i) EXPECT_EQ(t.main_logits.values()[i], base.main_logits.values()[i]);
}

class Aggregate : public ::testing::Test {
 protected:
  Aggregate() : model_(tiny_config(20, 16, 5, 2), 4) {
    std::mt19937_64 rng(4);
    trace_ = model_.forward(random_batch(20, 2, 5, 6, rng));
  }
  std::vector<std::vector<double>> states() const {
    std::vector<std::vector<double>> s;
    for (std::size_t i = 0; i + 1 < trace_.decoder_states.size(); ++i) s.push_back(to_vector(trace_.decoder_states[i]));
    return s;
  }
  void set_weights(Task task, const std::vector<double>& w) {
    Tensor weights = model_.head(task).layer_weights;
    std::copy(w.begin(), w.end(), weights.mutable_values().begin());
  }
  Seq2SeqModel model_;
  ForwardTrace trace_;
};

TEST_F(Aggregate, InitialWeightsGiveTwiceTheMean) {
  const auto got = to_vector(model_.aggregate_intermediate(trace_, Task::kSae));
  const auto s = states();
  for (std::size_t e = 0; e < got.size(); ++e) {
    double mean = 0.0;
    for (const auto& layer : s) mean += layer[e];
    mean /= static_cast<double>(s.size());
    EXPECT_NEAR(got[e], 2.0 * mean, 1e-12);
  }
}

TEST_F(Aggregate, SaturatedWeightSelectsOneLayer) {
  set_weights(Task::kSaa, {0.0, 40.0, 0.0, 0.0});
  const auto got = to_vector(model_.aggregate_intermediate(trace_, Task::kSaa));
  const auto s = states();
  for (std::size_t e = 0; e < got.size(); ++e) {
    const double mean = (s[0][e] + s[1][e] + s[2][e] + s[3][e]) / 4.0;
    EXPECT_NEAR(got[e], s[1][e] + mean, 1e-12);
  }
}

TEST_F(Aggregate, MatchesElementwiseReference) {
  const std::vector<double> w = {0.3, -1.2, 2.0, 0.7};
  set_weights(Task::kSae, w);
  const auto got = to_vector(model_.aggregate_intermediate(trace_, Task::kSae));
  const auto want = oracle::aggregate_reference(states(), w, true);
  for (std::size_t e = 0; e < got.size(); ++e) EXPECT_NEAR(got[e], want[e], 1e-12);
}

TEST_F(Aggregate, ConstantStatesGiveTwiceTheConstant) {
  for (std::size_t i = 0; i + 1 < trace_.decoder_states.size(); ++i)
    trace_.decoder_states[i] = Tensor::full(trace_.decoder_states[i].shape(), 1.5);
  set_weights(Task::kSae, {3.0, -2.0, 0.5, 9.0});
  for (double v : to_vector(model_.aggregate_intermediate(trace_, Task::kSae))) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST_F(Aggregate, ShiftInvariance) {
  const std::vector<double> w = {0.25, -0.5, 1.0, 0.75};
  set_weights(Task::kSae, w);
  const auto base = to_vector(model_.aggregate_intermediate(trace_, Task::kSae));
  for (double c : {-3.0, 1.0, 16.0}) {
    set_weights(Task::kSae, {w[0] + c, w[1] + c, w[2] + c, w[3] + c});
    const auto shifted = to_vector(model_.aggregate_intermediate(trace_, Task::kSae));
    for (std::size_t e = 0; e < base.size(); ++e) EXPECT_NEAR(shifted[e], base[e], 1e-13);
  }
}

TEST_F(Aggregate, SoftmaxOfWeightsSumsToOne) {
  set_weights(Task::kSaa, {5.0, -3.0, 0.1, 2.2});
  double total = 0.0;
  for (double p : to_vector(softmax(model_.head(Task::kSaa).layer_weights, 0))) total += p;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Model, NonHierarchicalHeadsReadFinalLayer) {
  ModelConfig cfg = tiny_config(20, 16, 3, 2);
  cfg.hierarchical = false;
  Seq2SeqModel model(cfg, 5);
  EXPECT_FALSE(model.head(Task::kSae).layer_weights.defined());
  std::mt19937_64 rng(5);
  const ForwardTrace t = model.forward(random_batch(20, 1, 4, 5, rng));
  EXPECT_EQ(to_vector(t.task_hidden[0]), to_vector(t.decoder_states.back()));
}

TEST(Model, ZeroHiddenGivesUniformHeadDistribution) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 6);
  Tensor bias = model.head(Task::kSae).proj.bias;
  std::fill(bias.mutable_values().begin(), bias.mutable_values().end(), 0.0);
  const Tensor logits = model.head_logits(Tensor::zeros({5, 16}), Task::kSae);
  EXPECT_EQ(logits.shape(), (Shape{5, 20}));
  for (double v : logits.values()) EXPECT_EQ(v, 0.0);
  for (double p : to_vector(softmax(logits, 1))) EXPECT_NEAR(p, 1.0 / 20.0, 1e-15);
}

TEST(Model, TaskHeadIsDistinctFromMainHead) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 7);
  std::mt19937_64 rng(7);
  const Batch b = random_batch(20, 2, 4, 5, rng);
  const auto before = to_vector(model.forward(b).main_logits);
  const auto sae_before = to_vector(model.forward(b).task_logits[0]);
  Tensor w = model.head(Task::kSae).proj.weight;
  for (double& v : w.mutable_values()) v += 0.5;
  const ForwardTrace after = model.forward(b);
  EXPECT_EQ(to_vector(after.main_logits), before);
  EXPECT_NE(to_vector(after.task_logits[0]), sae_before);
}

TEST(Model, SwitchedOffHeadsAreUndefined) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 8);
  std::mt19937_64 rng(8);
  ForwardOptions opt;
  opt.task_heads = {false, true};
  const ForwardTrace t = model.forward(random_batch(20, 1, 4, 5, rng), opt);
  EXPECT_FALSE(t.task_logits[0].defined());
  EXPECT_TRUE(t.task_logits[1].defined());
}

struct Targets {
  std::vector<int> main, sae, saa;
  Mask main_ignore, sae_ignore, saa_ignore;
};

Targets random_targets(std::size_t rows, std::size_t vocab, std::mt19937_64& rng) {
  Targets t;
  std::uniform_int_distribution<int> tok(0, static_cast<int>(vocab) - 1);
  for (std::size_t i = 0; i < rows; ++i) {
    t.main.push_back(tok(rng));
    t.sae.push_back(tok(rng));
    t.saa.push_back(tok(rng));
    t.main_ignore.push_back(rng() % 5 == 0);
    t.sae_ignore.push_back(rng() % 3 == 0);
    t.saa_ignore.push_back(rng() % 2 == 0);
  }
  return t;
}

Tensor combined_loss(const Seq2SeqModel& model, const Batch& b, const Targets& t, double w_main, double w_sae,
                     double w_saa) {
  const ForwardTrace tr = model.forward(b);
  Tensor loss = scale(cross_entropy_from_logits(tr.main_logits, t.main, t.main_ignore), w_main);
  loss = add(loss, scale(cross_entropy_from_logits(tr.task_logits[0], t.sae, t.sae_ignore), w_sae));
  return add(loss, scale(cross_entropy_from_logits(tr.task_logits[1], t.saa, t.saa_ignore), w_saa));
}

TEST(Model, EndToEndGradientMatchesFiniteDifferences) {
  Seq2SeqModel model(tiny_config(12, 8, 3, 2), 9);
  std::mt19937_64 rng(9);
  const Batch b = random_batch(12, 2, 4, 5, rng);
  const Targets t = random_targets(10, 12, rng);
  // Move the layer weights off their symmetric initial point.
  for (Task task : kTasks) {
    Tensor w = model.head(task).layer_weights;
    w.mutable_values()[0] = 0.4;
    w.mutable_values()[1] = -0.3;
  }
  for (auto& p : model.parameters()) p.zero_grad();
  backward(combined_loss(model, b, t, 1.0, 0.7, 0.4));
  double worst = 0.0;
  for (auto& np : model.named_parameters()) {
    Tensor p = np.tensor;
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    const auto numeric = oracle::numeric_gradient5(p, [&] {
      NoGradGuard guard;
      return combined_loss(model, b, t, 1.0, 0.7, 0.4).item();
    });
    const double err = oracle::max_relative_error(analytic, numeric, 1e-6);
    EXPECT_LT(err, 1e-4) << np.name;
    worst = std::max(worst, err);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Model, GradientFlowIsolation) {
  Seq2SeqModel model(tiny_config(12, 8, 3, 2), 10);
  std::mt19937_64 rng(10);
  const Batch b = random_batch(12, 2, 4, 5, rng);
  const Targets t = random_targets(10, 12, rng);
  auto grad_mass = [](const Tensor& x) {
    double s = 0.0;
    if (x.has_grad())
      for (double g : x.grad()) s += std::fabs(g);
    return s;
  };
  for (auto& p : model.parameters()) p.zero_grad();
  backward(combined_loss(model, b, t, 0.0, 1.0, 1.0));
  EXPECT_EQ(grad_mass(model.main_bias()), 0.0);
  EXPECT_EQ(grad_mass(model.final_norm().gamma), 0.0);
  EXPECT_GT(grad_mass(model.head(Task::kSae).layer_weights), 0.0);

  for (auto& p : model.parameters()) p.zero_grad();
  backward(combined_loss(model, b, t, 1.0, 0.0, 0.0));
  for (Task task : kTasks) {
    EXPECT_EQ(grad_mass(model.head(task).layer_weights), 0.0);
    EXPECT_EQ(grad_mass(model.head(task).proj.weight), 0.0);
  }
  EXPECT_GT(grad_mass(model.main_bias()), 0.0);
}

std::vector<int> random_source(std::size_t vocab, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> tok(TokenVocab::kUnk + 1, static_cast<int>(vocab) - 1);
  std::vector<int> s(1 + rng() % 8);
  for (int& x : s) x = tok(rng);
  return s;
}

TEST(Model, ForcedTokenGeneration) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 11);
  Tensor bias = model.main_bias();
  bias.mutable_values()[9] = 1e4;
  std::mt19937_64 rng(11);
  for (std::size_t beam : {1u, 3u}) {
    const Generation g = model.generate(random_source(20, rng), {beam, 6});
    EXPECT_EQ(g.tokens, std::vector<int>(6, 9));
    EXPECT_TRUE(g.truncated);
  }
}

TEST(Model, BeamOfOneIsGreedyAndWiderBeamsScoreHigher) {
  Seq2SeqModel model(tiny_config(20, 16, 3, 2), 12);
  std::mt19937_64 rng(12);
  std::vector<std::vector<int>> sources;
  for (int i = 0; i < 100; ++i) sources.push_back(random_source(20, rng));
  const auto batched = model.generate_greedy(sources, 8);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Generation greedy = model.generate(sources[i], {1, 8});
    EXPECT_EQ(greedy.tokens, batched[i].tokens) << i;
    EXPECT_NEAR(greedy.log_prob, batched[i].log_prob, 1e-9);
    const Generation wide = model.generate(sources[i], {4, 8});
    if (!greedy.truncated && !wide.truncated) {
      EXPECT_GE(wide.log_prob, greedy.log_prob - 1e-12) << i;
    }
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig cfg = tiny_config(10, 16, 3, 2);
  cfg.residual = false;
  Seq2SeqModel model(cfg, 13);
  const TokenVocab vocab({"a", "b", "c", "d"});
  const auto dir = std::filesystem::temp_directory_path() / "anchorparse_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "a.bin", model, vocab, {{"note", "x"}});
  const Checkpoint back = load_checkpoint(dir / "a.bin");
  EXPECT_EQ(back.model->config().to_json(), cfg.to_json());
  EXPECT_EQ(back.vocab.tokens(), vocab.tokens());
  EXPECT_EQ(back.meta.at("note"), "x");
  const auto a = model.named_parameters(), b = back.model->named_parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(to_vector(a[i].tensor), to_vector(b[i].tensor)) << a[i].name;
  }
  save_checkpoint(dir / "b.bin", *back.model, back.vocab, back.meta);
  EXPECT_EQ(slurp(dir / "a.bin"), slurp(dir / "b.bin"));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto path = std::filesystem::temp_directory_path() / "anchorparse_ckpt_bad.bin";
  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
}

TEST(Checkpoint, CopyParameters) {
  const ModelConfig cfg = tiny_config(10, 16, 3, 2);
  Seq2SeqModel a(cfg, 1), b(cfg, 2);
  copy_parameters(a, b);
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(to_vector(pa[i].tensor), to_vector(pb[i].tensor));
  Seq2SeqModel c(tiny_config(10, 16, 4, 2), 3);
  EXPECT_THROW(copy_parameters(a, c), ContractError);
}

}  // namespace
}  // namespace anchorparse
