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

#include "anchorparse/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>

#include "anchorparse/corpus.hpp"

namespace anchorparse {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'P', 'C', 'K', 'P', 'T', '\0', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const TokenVocab& vocab,
                     const nlohmann::json& meta) {
  const auto params = model.named_parameters();
  nlohmann::json header;
  header["model"] = model.config().to_json();
  header["vocab"] = vocab.tokens();
  header["meta"] = meta;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& p : params) index.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  header["tensors"] = index;
  const std::string text = header.dump();

  std::string blob(kMagic.begin(), kMagic.end());
  put<std::uint32_t>(blob, kCheckpointVersion);
  put<std::uint64_t>(blob, text.size());
  blob += text;
  for (const auto& p : params) {
    const auto v = p.tensor.values();
    blob.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  write_file_atomic(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string blob = read_file(path);
  if (blob.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), blob.begin()))
    throw CheckpointError("'" + path.string() + "' is not an anchorparse checkpoint");
  std::size_t pos = kMagic.size();
  const auto version = take<std::uint32_t>(blob, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = take<std::uint64_t>(blob, pos);
  if (pos + header_len > blob.size()) throw CheckpointError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(pos, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  pos += header_len;

  Checkpoint ck;
  ck.vocab = TokenVocab(header.at("vocab").get<std::vector<std::string>>());
  ck.meta = header.value("meta", nlohmann::json::object());
  const ModelConfig cfg = ModelConfig::from_json(header.at("model"));
  ck.model = std::make_unique<Seq2SeqModel>(cfg, 0);
  auto params = ck.model->named_parameters();
  const auto& index = header.at("tensors");
  if (index.size() != params.size()) throw CheckpointError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = index[i].at("name").get<std::string>();
    const auto shape = index[i].at("shape").get<Shape>();
    if (name != params[i].name || shape != params[i].tensor.shape())
      throw CheckpointError("checkpoint tensor '" + name + "' does not match model parameter '" + params[i].name + "'");
    auto dst = params[i].tensor.mutable_values();
    const std::size_t bytes = dst.size() * sizeof(double);
    if (pos + bytes > blob.size()) throw CheckpointError("checkpoint tensor data truncated");
    std::memcpy(dst.data(), blob.data() + pos, bytes);
    pos += bytes;
  }
  if (pos != blob.size()) throw CheckpointError("trailing bytes after checkpoint tensors");
  return ck;
}

void copy_parameters(const Seq2SeqModel& src, Seq2SeqModel& dst) {
  const auto a = src.named_parameters();
  auto b = dst.named_parameters();
  if (a.size() != b.size()) throw ContractError("parameter lists differ in length");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].tensor.shape() != b[i].tensor.shape())
      throw ContractError("parameter '" + a[i].name + "' does not match '" + b[i].name + "'");
    const auto v = a[i].tensor.values();
    std::copy(v.begin(), v.end(), b[i].tensor.mutable_values().begin());
  }
}

}  // namespace anchorparse
