// Random batches and a plain-loop reference for the layer aggregate.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "anchorparse/model.hpp"
#include "anchorparse/vocab.hpp"

namespace anchorparse::oracle {

inline ModelConfig tiny_config(std::size_t vocab, std::size_t d, std::size_t layers, std::size_t heads) {
  ModelConfig cfg;
  cfg.vocab_size = vocab;
  cfg.d_model = d;
  cfg.heads = heads;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = layers;
  cfg.ff_dim = 2 * d;
  cfg.dropout = 0.0;
  cfg.max_source_len = 12;
  cfg.max_target_len = 12;
  return cfg;
}

// Source ids are drawn above the special range; trailing positions of later
// rows are padded so the padding path is exercised.
inline Batch random_batch(std::size_t vocab, std::size_t b, std::size_t m, std::size_t k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> tok(TokenVocab::kUnk + 1, static_cast<int>(vocab) - 1);
  Batch batch;
  batch.size = b;
  batch.source_len = m;
  batch.target_len = k;
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t len = m - std::min(i, m - 1);
    for (std::size_t j = 0; j < m; ++j) {
      batch.source.push_back(j < len ? tok(rng) : TokenVocab::kPad);
      batch.source_pad.push_back(j < len ? 0 : 1);
    }
    batch.decoder_input.push_back(TokenVocab::kBos);
    for (std::size_t j = 1; j < k; ++j) batch.decoder_input.push_back(tok(rng));
  }
  return batch;
}

// sum_i softmax(w)_i * H_i + sum_i H_i / n, one element at a time.
inline std::vector<double> aggregate_reference(const std::vector<std::vector<double>>& states,
                                               const std::vector<double>& w, bool residual) {
  const std::size_t n = states.size();
  double hi = w[0];
  for (double x : w) hi = std::max(hi, x);
  double z = 0.0;
  for (double x : w) z += std::exp(x - hi);
  std::vector<double> out(states[0].size(), 0.0);
  for (std::size_t e = 0; e < out.size(); ++e)
    for (std::size_t i = 0; i < n; ++i) {
      out[e] += std::exp(w[i] - hi) / z * states[i][e];
      if (residual) out[e] += states[i][e] / static_cast<double>(n);
    }
  return out;
}

inline std::vector<double> to_vector(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace anchorparse::oracle
