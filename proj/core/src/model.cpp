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

#include "anchorparse/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "anchorparse/errors.hpp"

namespace anchorparse {

namespace {

constexpr int kPadId = 0;
constexpr int kBosId = 1;
constexpr int kEosId = 2;
constexpr double kInitStd = 0.02;

Tensor normal_tensor(Shape shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from_values(std::move(shape), std::move(v), true);
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  return {normal_tensor({in, out}, rng), Tensor::zeros({out}, true)};
}

LayerNormParams make_norm(std::size_t d) { return {Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)}; }

AttentionParams make_attention(std::size_t d, Rng& rng) {
  AttentionParams p;
  p.q = make_linear(d, d, rng);
  p.k = make_linear(d, d, rng);
  p.v = make_linear(d, d, rng);
  p.o = make_linear(d, d, rng);
  return p;
}

Tensor linear(const Tensor& x, const Linear& l) { return add(matmul(x, l.weight), l.bias); }

Tensor norm(const Tensor& x, const LayerNormParams& p) { return layer_norm(x, p.gamma, p.beta); }

Tensor feed_forward(const Tensor& x, const FeedForward& ff) { return linear(gelu(linear(x, ff.in)), ff.out); }

Tensor multi_head(const Tensor& xq, const Tensor& xkv, const AttentionParams& p, const AttentionSpec& spec) {
  return linear(attention(linear(xq, p.q), linear(xkv, p.k), linear(xkv, p.v), spec), p.o);
}

Tensor sinusoidal_table(std::size_t len, std::size_t d) {
  std::vector<double> v(len * d);
  for (std::size_t pos = 0; pos < len; ++pos)
    for (std::size_t i = 0; i < d; i += 2) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(d));
      v[pos * d + i] = std::sin(angle);
      if (i + 1 < d) v[pos * d + i + 1] = std::cos(angle);
    }
  return Tensor::from_values({len, d}, std::move(v));
}

// Copies selected rows into a fresh tensor; used only without gradients.
Tensor take_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  const std::size_t d = x.dim(1);
  std::vector<double> v(rows.size() * d);
  const auto src = x.values();
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d, v.begin() + static_cast<std::ptrdiff_t>(r * d));
  return Tensor::from_values({rows.size(), d}, std::move(v));
}

void check_ids(std::span<const int> ids, std::size_t vocab, const char* what) {
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw ContractError(std::string(what) + " token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(vocab));
}

}  // namespace

std::string_view to_string(Task task) { return task == Task::kSae ? "sae" : "saa"; }

void ModelConfig::validate() const {
  if (vocab_size < 7) throw ConfigError("model.vocab_size must exceed the 6 special tokens");
  if (d_model == 0 || heads == 0 || d_model % heads != 0)
    throw ConfigError("model.d_model must be a positive multiple of model.heads");
  if (decoder_layers < 3) throw ConfigError("model.decoder_layers must be at least 3");
  if (encoder_layers == 0) throw ConfigError("model.encoder_layers must be positive");
  if (ff_dim == 0) throw ConfigError("model.ff_dim must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model.dropout must be in [0, 1)");
  if (max_source_len == 0 || max_target_len < 2) throw ConfigError("model max lengths too small");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size},         {"d_model", d_model},
          {"heads", heads},                   {"encoder_layers", encoder_layers},
          {"decoder_layers", decoder_layers}, {"ff_dim", ff_dim},
          {"dropout", dropout},               {"max_source_len", max_source_len},
          {"max_target_len", max_target_len}, {"hierarchical", hierarchical},
          {"residual", residual}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j, ModelConfig c) {
  for (const auto& [key, value] : j.items()) {
    if (key == "vocab_size") c.vocab_size = value.get<std::size_t>();
    else if (key == "d_model") c.d_model = value.get<std::size_t>();
    else if (key == "heads") c.heads = value.get<std::size_t>();
    else if (key == "encoder_layers") c.encoder_layers = value.get<std::size_t>();
    else if (key == "decoder_layers") c.decoder_layers = value.get<std::size_t>();
    else if (key == "ff_dim") c.ff_dim = value.get<std::size_t>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else if (key == "max_source_len") c.max_source_len = value.get<std::size_t>();
    else if (key == "max_target_len") c.max_target_len = value.get<std::size_t>();
    else if (key == "hierarchical") c.hierarchical = value.get<bool>();
    else if (key == "residual") c.residual = value.get<bool>();
    else throw ConfigError("unknown model config key '" + key + "'");
  }
  return c;
}

Seq2SeqModel::Seq2SeqModel(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  const std::size_t d = cfg_.d_model;
  embedding_ = normal_tensor({cfg_.vocab_size, d}, rng);
  positions_ = sinusoidal_table(std::max(cfg_.max_source_len, cfg_.max_target_len), d);
  for (std::size_t i = 0; i < cfg_.encoder_layers; ++i) {
    EncoderLayer l;
    l.ln_attn = make_norm(d);
    l.ln_ff = make_norm(d);
    l.attn = make_attention(d, rng);
    l.ff = {make_linear(d, cfg_.ff_dim, rng), make_linear(cfg_.ff_dim, d, rng)};
    encoder_.push_back(std::move(l));
  }
  encoder_norm_ = make_norm(d);
  for (std::size_t i = 0; i < cfg_.decoder_layers; ++i) {
    DecoderLayer l;
    l.ln_self = make_norm(d);
    l.ln_cross = make_norm(d);
    l.ln_ff = make_norm(d);
    l.self_attn = make_attention(d, rng);
    l.cross_attn = make_attention(d, rng);
    l.ff = {make_linear(d, cfg_.ff_dim, rng), make_linear(cfg_.ff_dim, d, rng)};
    decoder_.push_back(std::move(l));
  }
  final_norm_ = make_norm(d);
  main_bias_ = Tensor::zeros({cfg_.vocab_size}, true);
  for (Task t : kTasks) {
    HierarchicalHead& h = heads_[static_cast<int>(t)];
    h.task = t;
    if (cfg_.hierarchical) h.layer_weights = Tensor::zeros({cfg_.decoder_layers - 1}, true);
    h.norm = make_norm(d);
    h.proj = make_linear(d, cfg_.vocab_size, rng);
  }
}

std::vector<NamedTensor> Seq2SeqModel::named_parameters() const {
  std::vector<NamedTensor> out;
  auto put = [&](std::string name, const Tensor& t) { out.push_back({std::move(name), t}); };
  auto put_linear = [&](const std::string& p, const Linear& l) {
    put(p + ".weight", l.weight);
    put(p + ".bias", l.bias);
  };
  auto put_norm = [&](const std::string& p, const LayerNormParams& n) {
    put(p + ".gamma", n.gamma);
    put(p + ".beta", n.beta);
  };
  auto put_attn = [&](const std::string& p, const AttentionParams& a) {
    put_linear(p + ".q", a.q);
    put_linear(p + ".k", a.k);
    put_linear(p + ".v", a.v);
    put_linear(p + ".o", a.o);
  };
  put("embedding", embedding_);
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    const std::string p = "encoder." + std::to_string(i);
    put_norm(p + ".ln_attn", encoder_[i].ln_attn);
    put_attn(p + ".attn", encoder_[i].attn);
    put_norm(p + ".ln_ff", encoder_[i].ln_ff);
    put_linear(p + ".ff.in", encoder_[i].ff.in);
    put_linear(p + ".ff.out", encoder_[i].ff.out);
  }
  put_norm("encoder.norm", encoder_norm_);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const std::string p = "decoder." + std::to_string(i);
    put_norm(p + ".ln_self", decoder_[i].ln_self);
    put_attn(p + ".self_attn", decoder_[i].self_attn);
    put_norm(p + ".ln_cross", decoder_[i].ln_cross);
    put_attn(p + ".cross_attn", decoder_[i].cross_attn);
    put_norm(p + ".ln_ff", decoder_[i].ln_ff);
    put_linear(p + ".ff.in", decoder_[i].ff.in);
    put_linear(p + ".ff.out", decoder_[i].ff.out);
  }
  put_norm("decoder.norm", final_norm_);
  put("main_head.bias", main_bias_);
  for (Task t : kTasks) {
    const HierarchicalHead& h = heads_[static_cast<int>(t)];
    const std::string p = "heads." + std::string(to_string(t));
    if (h.layer_weights.defined()) put(p + ".layer_weights", h.layer_weights);
    put_norm(p + ".norm", h.norm);
    put_linear(p + ".proj", h.proj);
  }
  return out;
}

std::vector<Tensor> Seq2SeqModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& n : named_parameters()) out.push_back(n.tensor);
  return out;
}

Tensor Seq2SeqModel::embed(std::span<const int> ids, std::size_t batch, std::size_t len, bool train,
                           Rng* rng) const {
  const std::size_t d = cfg_.d_model;
  Tensor x = scale(embedding_lookup(embedding_, ids), std::sqrt(static_cast<double>(d)));
  std::vector<double> pe(batch * len * d);
  const auto table = positions_.values();
  for (std::size_t b = 0; b < batch; ++b)
    std::copy_n(table.begin(), len * d, pe.begin() + static_cast<std::ptrdiff_t>(b * len * d));
  x = add(x, Tensor::from_values({batch * len, d}, std::move(pe)));
  return train && cfg_.dropout > 0.0 ? dropout(x, cfg_.dropout, true, *rng) : x;
}

Tensor Seq2SeqModel::encode(const Batch& batch, bool train, Rng* rng) const {
  const auto drop = [&](const Tensor& t) {
    return train && cfg_.dropout > 0.0 ? dropout(t, cfg_.dropout, true, *rng) : t;
  };
  AttentionSpec spec{batch.size, batch.source_len, batch.source_len, cfg_.heads, false, batch.source_pad};
  Tensor x = embed(batch.source, batch.size, batch.source_len, train, rng);
  for (const auto& l : encoder_) {
    const Tensor h = norm(x, l.ln_attn);
    x = add(x, drop(multi_head(h, h, l.attn, spec)));
    x = add(x, drop(feed_forward(norm(x, l.ln_ff), l.ff)));
  }
  return norm(x, encoder_norm_);
}

std::vector<Tensor> Seq2SeqModel::decode_layers(const Tensor& enc, const Batch& batch, bool train, Rng* rng) const {
  const auto drop = [&](const Tensor& t) {
    return train && cfg_.dropout > 0.0 ? dropout(t, cfg_.dropout, true, *rng) : t;
  };
  AttentionSpec self_spec{batch.size, batch.target_len, batch.target_len, cfg_.heads, true, {}};
  AttentionSpec cross_spec{batch.size, batch.target_len, batch.source_len, cfg_.heads, false, batch.source_pad};
  Tensor y = embed(batch.decoder_input, batch.size, batch.target_len, train, rng);
  std::vector<Tensor> states;
  for (const auto& l : decoder_) {
    const Tensor h = norm(y, l.ln_self);
    y = add(y, drop(multi_head(h, h, l.self_attn, self_spec)));
    y = add(y, drop(multi_head(norm(y, l.ln_cross), enc, l.cross_attn, cross_spec)));
    y = add(y, drop(feed_forward(norm(y, l.ln_ff), l.ff)));
    states.push_back(y);
  }
  return states;
}

Tensor Seq2SeqModel::main_head(const Tensor& final_state) const {
  return add(matmul(norm(final_state, final_norm_), transpose(embedding_)), main_bias_);
}

ForwardTrace Seq2SeqModel::forward(const Batch& batch, const ForwardOptions& options) const {
  const bool train = options.train;
  Rng* dropout_rng = options.dropout_rng;
  if (batch.source_len > cfg_.max_source_len || batch.target_len > cfg_.max_target_len)
    throw ContractError("batch lengths (" + std::to_string(batch.source_len) + ", " + std::to_string(batch.target_len) +
                        ") exceed model maxima (" + std::to_string(cfg_.max_source_len) + ", " +
                        std::to_string(cfg_.max_target_len) + ")");
  if (batch.source.size() != batch.size * batch.source_len || batch.source_pad.size() != batch.source.size() ||
      batch.decoder_input.size() != batch.size * batch.target_len)
    throw ContractError("batch buffers do not match the declared batch shape");
  check_ids(batch.source, cfg_.vocab_size, "source");
  check_ids(batch.decoder_input, cfg_.vocab_size, "decoder input");
  if (train && cfg_.dropout > 0.0 && !dropout_rng) throw ContractError("training forward needs a dropout generator");

  ForwardTrace t;
  t.batch = batch.size;
  t.source_len = batch.source_len;
  t.target_len = batch.target_len;
  t.encoder_states = encode(batch, train, dropout_rng);
  t.decoder_states = decode_layers(t.encoder_states, batch, train, dropout_rng);
  t.main_logits = main_head(t.decoder_states.back());
  for (Task task : kTasks) {
    const int i = static_cast<int>(task);
    if (!options.task_heads[i]) continue;
    t.task_hidden[i] = cfg_.hierarchical ? aggregate_intermediate(t, task) : t.decoder_states.back();
    t.task_logits[i] = head_logits(t.task_hidden[i], task);
  }
  return t;
}

Tensor Seq2SeqModel::aggregate_intermediate(const ForwardTrace& trace, Task task) const {
  const HierarchicalHead& h = head(task);
  if (!h.layer_weights.defined()) throw ContractError("model has no hierarchical layer weights");
  const std::size_t n = cfg_.decoder_layers - 1;
  if (trace.decoder_states.size() != n + 1) throw ContractError("trace does not hold N decoder states");
  std::vector<Tensor> inter(trace.decoder_states.begin(), trace.decoder_states.begin() + static_cast<std::ptrdiff_t>(n));
  Tensor mixed = weighted_sum(inter, softmax(h.layer_weights, 0));
  if (!cfg_.residual) return mixed;
  return add(mixed, weighted_sum(inter, Tensor::full({n}, 1.0 / static_cast<double>(n))));
}

Tensor Seq2SeqModel::head_logits(const Tensor& hidden, Task task) const {
  const HierarchicalHead& h = head(task);
  return linear(norm(hidden, h.norm), h.proj);
}

std::vector<std::vector<double>> Seq2SeqModel::next_token_log_probs(
    const Tensor& enc, const Batch& enc_batch, const std::vector<std::vector<int>>& prefixes) const {
  Batch b;
  b.size = prefixes.size();
  b.source_len = enc_batch.source_len;
  b.source_pad = enc_batch.source_pad;
  b.target_len = prefixes.front().size();
  for (const auto& p : prefixes) b.decoder_input.insert(b.decoder_input.end(), p.begin(), p.end());
  const auto states = decode_layers(enc, b, false, nullptr);
  std::vector<std::size_t> last;
  for (std::size_t i = 0; i < b.size; ++i) last.push_back(i * b.target_len + b.target_len - 1);
  const Tensor lp = log_softmax(main_head(take_rows(states.back(), last)), 1);
  const std::size_t v = cfg_.vocab_size;
  std::vector<std::vector<double>> out(b.size);
  for (std::size_t i = 0; i < b.size; ++i)
    out[i].assign(lp.values().begin() + static_cast<std::ptrdiff_t>(i * v),
                  lp.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * v));
  return out;
}

Generation Seq2SeqModel::generate(std::span<const int> source, const DecodeOptions& options) const {
  if (options.beam_size == 0) throw ContractError("beam size must be positive");
  NoGradGuard no_grad;
  const std::size_t max_len = options.max_len ? options.max_len : cfg_.max_target_len - 1;
  const std::size_t m = std::min(source.size(), cfg_.max_source_len);
  Batch one;
  one.size = 1;
  one.source_len = std::max<std::size_t>(m, 1);
  one.source.assign(source.begin(), source.begin() + static_cast<std::ptrdiff_t>(m));
  if (m == 0) one.source.push_back(kPadId);
  one.source_pad.assign(one.source_len, 0);
  check_ids(one.source, cfg_.vocab_size, "source");
  const Tensor enc = encode(one, false, nullptr);
  const std::size_t d = cfg_.d_model;

  struct Hyp {
    std::vector<int> tokens;  // starts with <BOS>
    double score = 0.0;
    bool truncated = false;
  };
  std::vector<Hyp> alive = {{{kBosId}, 0.0, false}};
  std::vector<Hyp> finished;
  const std::size_t beam = options.beam_size;

  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    // Replicate encoder states and padding for every alive hypothesis.
    Batch enc_batch;
    enc_batch.size = alive.size();
    enc_batch.source_len = one.source_len;
    std::vector<double> rep;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      rep.insert(rep.end(), enc.values().begin(), enc.values().end());
      enc_batch.source_pad.insert(enc_batch.source_pad.end(), one.source_pad.begin(), one.source_pad.end());
    }
    const Tensor enc_rep = Tensor::from_values({alive.size() * one.source_len, d}, std::move(rep));
    std::vector<std::vector<int>> prefixes;
    for (const auto& h : alive) prefixes.push_back(h.tokens);
    const auto lps = next_token_log_probs(enc_rep, enc_batch, prefixes);

    // (score, token, parent); best first, ties to the lower token id then parent.
    std::vector<std::tuple<double, int, std::size_t>> cand;
    for (std::size_t h = 0; h < alive.size(); ++h)
      for (std::size_t t = 0; t < cfg_.vocab_size; ++t) {
        if (t == kPadId || t == kBosId) continue;
        cand.emplace_back(alive[h].score + lps[h][t], static_cast<int>(t), h);
      }
    const std::size_t keep = std::min(beam, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(),
                      [](const auto& a, const auto& b) {
                        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
                        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
                        return std::get<2>(a) < std::get<2>(b);
                      });
    std::vector<Hyp> next;
    for (std::size_t c = 0; c < keep; ++c) {
      const auto& [score, tok, parent] = cand[c];
      Hyp h{alive[parent].tokens, score, false};
      if (tok == kEosId) {
        finished.push_back(std::move(h));
      } else {
        h.tokens.push_back(tok);
        next.push_back(std::move(h));
      }
    }
    alive = std::move(next);
    if (!finished.empty()) {
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_finished = std::max(best_finished, f.score);
      bool dominated = true;
      for (const auto& a : alive) dominated = dominated && best_finished >= a.score;
      if (dominated) alive.clear();
    }
  }
  for (auto& a : alive) {
    a.truncated = true;
    finished.push_back(std::move(a));
  }
  const auto better = [](const Hyp& a, const Hyp& b) {
    if (a.truncated != b.truncated) return !a.truncated;
    if (a.score != b.score) return a.score > b.score;
    return a.tokens < b.tokens;
  };
  const Hyp& best = *std::min_element(finished.begin(), finished.end(), better);
  Generation g;
  g.tokens.assign(best.tokens.begin() + 1, best.tokens.end());
  g.log_prob = best.score;
  g.truncated = best.truncated;
  return g;
}

std::vector<Generation> Seq2SeqModel::generate_greedy(const std::vector<std::vector<int>>& sources,
                                                      std::size_t max_len) const {
  std::vector<Generation> out(sources.size());
  if (sources.empty()) return out;
  NoGradGuard no_grad;
  if (max_len == 0) max_len = cfg_.max_target_len - 1;
  Batch enc_batch;
  enc_batch.size = sources.size();
  std::size_t m = 1;
  for (const auto& s : sources) m = std::max(m, std::min(s.size(), cfg_.max_source_len));
  enc_batch.source_len = m;
  for (const auto& s : sources) {
    const std::size_t n = std::min(s.size(), m);
    enc_batch.source.insert(enc_batch.source.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
    enc_batch.source.insert(enc_batch.source.end(), m - n, kPadId);
    enc_batch.source_pad.insert(enc_batch.source_pad.end(), n, 0);
    // An empty source still needs one visible key.
    enc_batch.source_pad.insert(enc_batch.source_pad.end(), m - n, n == 0 ? 0 : 1);
  }
  check_ids(enc_batch.source, cfg_.vocab_size, "source");
  const Tensor enc = encode(enc_batch, false, nullptr);

  std::vector<std::vector<int>> prefixes(sources.size(), std::vector<int>{kBosId});
  std::vector<bool> done(sources.size(), false);
  std::size_t remaining = sources.size();
  for (std::size_t step = 0; step < max_len && remaining > 0; ++step) {
    const auto lps = next_token_log_probs(enc, enc_batch, prefixes);
    for (std::size_t i = 0; i < sources.size(); ++i) {
      int best = -1;
      for (std::size_t t = 0; t < cfg_.vocab_size; ++t) {
        if (t == kPadId || t == kBosId) continue;
        if (best < 0 || lps[i][t] > lps[i][static_cast<std::size_t>(best)]) best = static_cast<int>(t);
      }
      if (!done[i]) {
        out[i].log_prob += lps[i][static_cast<std::size_t>(best)];
        if (best == kEosId) {
          done[i] = true;
          --remaining;
        } else {
          out[i].tokens.push_back(best);
        }
      }
      prefixes[i].push_back(done[i] ? kEosId : best);
    }
  }
  for (std::size_t i = 0; i < sources.size(); ++i) out[i].truncated = !done[i];
  return out;
}

}  // namespace anchorparse
