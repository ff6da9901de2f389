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

#include "anchorparse/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "anchorparse/executor.hpp"

namespace anchorparse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kSplits[] = {"train", "dev", "test"};

}  // namespace

json example_to_json(const Example& ex) {
  json mask = json::array();
  for (auto m : ex.targets.saa_loss_mask) mask.push_back(m != 0);
  return {{"id", ex.id},
          {"split", ex.split},
          {"dialect", std::string(to_string(ex.dialect))},
          {"shape", ex.shape},
          {"schema_ref", ex.schema_ref},
          {"utterance", join_tokens(ex.utterance)},
          {"main", join_tokens(ex.targets.main)},
          {"sae", join_tokens(ex.targets.sae)},
          {"saa", join_tokens(ex.targets.saa)},
          {"saa_mask", mask}};
}

Example example_from_json(const json& j) {
  try {
    Example ex;
    ex.id = j.at("id").get<int>();
    ex.split = j.at("split").get<std::string>();
    ex.dialect = dialect_from_string(j.at("dialect").get<std::string>());
    ex.shape = j.value("shape", std::string("unknown"));
    ex.schema_ref = j.at("schema_ref").get<std::string>();
    ex.utterance = split_tokens(j.at("utterance").get<std::string>());
    ex.targets.main = split_tokens(j.at("main").get<std::string>());
    ex.targets.sae = split_tokens(j.at("sae").get<std::string>());
    ex.targets.saa = split_tokens(j.at("saa").get<std::string>());
    for (const auto& m : j.at("saa_mask")) ex.targets.saa_loss_mask.push_back(m.get<bool>() ? 1 : 0);
    return ex;
  } catch (const std::exception& e) {
    throw CorpusError(std::string("malformed example record: ") + e.what());
  }
}

void Corpus::add_schema(SchemaDocument doc) {
  const std::string id = doc.id;
  if (!schemas_.emplace(id, std::move(doc)).second) throw CorpusError("duplicate schema '" + id + "'");
}

void Corpus::add_example(Example ex) { examples_.push_back(std::move(ex)); }

const SchemaDocument& Corpus::schema(const std::string& ref) const {
  auto it = schemas_.find(ref);
  if (it == schemas_.end()) throw CorpusError("unknown schema reference '" + ref + "'");
  return it->second;
}

std::vector<const Example*> Corpus::split(const std::string& name) const {
  std::vector<const Example*> out;
  for (const auto& ex : examples_)
    if (ex.split == name) out.push_back(&ex);
  return out;
}

const Example* Corpus::find(int id) const {
  for (const auto& ex : examples_)
    if (ex.id == id) return &ex;
  return nullptr;
}

json CorpusStats::to_json() const {
  json hist = json::object();
  for (const auto& [k, v] : anchors_per_example) hist[std::to_string(k)] = v;
  return {{"examples", examples},
          {"per_split", per_split},
          {"shape_histogram", shape_histogram},
          {"anchors_per_example", hist},
          {"mean_anchors", mean_anchors},
          {"empty_sae", empty_sae}};
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  std::size_t total = 0;
  for (const auto& ex : corpus.examples()) {
    ++s.examples;
    ++s.per_split[ex.split];
    ++s.shape_histogram[ex.shape];
    const std::size_t n = ex.targets.anchor_count();
    ++s.anchors_per_example[n];
    total += n;
    if (ex.targets.sae.empty()) ++s.empty_sae;
  }
  s.mean_anchors = s.examples ? static_cast<double>(total) / static_cast<double>(s.examples) : 0.0;
  return s;
}

ValidationReport validate_corpus(const Corpus& corpus) {
  ValidationReport report;
  for (const auto& ex : corpus.examples()) {
    ++report.checked;
    auto fail = [&](const std::string& why) {
      report.failures.push_back(std::to_string(ex.id) + ": " + why);
    };
    if (!corpus.has_schema(ex.schema_ref)) {
      fail("unknown schema '" + ex.schema_ref + "'");
      continue;
    }
    const auto& schema = corpus.schema(ex.schema_ref);
    const std::string text = join_tokens(ex.targets.main);
    auto parsed = parse_logical_form(text, ex.dialect);
    if (!parsed) {
      fail(parsed.error().message());
      continue;
    }
    if (serialize(parsed.value()) != ex.targets.main) fail("main is not canonical");
    try {
      execute(parsed.value(), schema);
    } catch (const ExecutionError& e) {
      fail(std::string("execution failed: ") + e.what());
    }
    const auto expected = build_supervision_targets(ex.targets.main, schema.vocabulary());
    if (expected.sae != ex.targets.sae) fail("sae target mismatch");
    if (ex.targets.saa.size() != ex.targets.main.size()) fail("saa length differs from main");
    if (expected.saa != ex.targets.saa || expected.saa_loss_mask != ex.targets.saa_loss_mask)
      fail("saa target mismatch");
  }
  return report;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) throw std::ios_base::failure("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir / "schemas");
  for (const auto& [id, doc] : corpus.schemas())
    write_file_atomic(dir / "schemas" / (id + ".json"), schema_to_json(doc).dump(1) + "\n");
  for (const char* split : kSplits) {
    std::string lines;
    for (const Example* ex : corpus.split(split)) lines += example_to_json(*ex).dump() + "\n";
    write_file_atomic(dir / (std::string(split) + ".jsonl"), lines);
  }
  write_file_atomic(dir / "stats.json", corpus_stats(corpus).to_json().dump(2) + "\n");
}

Corpus read_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::ios_base::failure("corpus directory '" + dir.string() + "' not found");
  Corpus corpus;
  const fs::path schema_dir = dir / "schemas";
  if (!fs::is_directory(schema_dir))
    throw std::ios_base::failure("corpus '" + dir.string() + "' has no schemas/ directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(schema_dir))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    json j;
    try {
      j = json::parse(read_file(f));
    } catch (const json::parse_error& e) {
      throw CorpusError("schema file '" + f.string() + "': " + e.what());
    }
    try {
      corpus.add_schema(schema_from_json(j));
    } catch (const SchemaError& e) {
      throw CorpusError("schema file '" + f.string() + "': " + e.what());
    }
  }
  for (const char* split : kSplits) {
    const fs::path file = dir / (std::string(split) + ".jsonl");
    if (!fs::exists(file)) continue;
    std::istringstream in(read_file(file));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        corpus.add_example(example_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw CorpusError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  return corpus;
}

}  // namespace anchorparse
