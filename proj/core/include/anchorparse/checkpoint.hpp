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

// Binary checkpoint layout (little-endian):
//
//   8 bytes   magic "APCKPT\0\0"
//   u32       format version
//   u64       header length L
//   L bytes   JSON header {"model": ModelConfig, "vocab": [tokens],
//                          "meta": {...}, "tensors": [{"name", "shape"}]}
//   doubles   tensor values in header order, raw IEEE-754
//
// Save then load reproduces every parameter bit for bit.

#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "anchorparse/model.hpp"
#include "anchorparse/vocab.hpp"

namespace anchorparse {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::unique_ptr<Seq2SeqModel> model;
  TokenVocab vocab;
  nlohmann::json meta;
};

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const TokenVocab& vocab,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameter values from `src` into `dst`; both must share a config.
void copy_parameters(const Seq2SeqModel& src, Seq2SeqModel& dst);

}  // namespace anchorparse
