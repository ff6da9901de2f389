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

#include "anchorparse_cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "anchorparse/analysis.hpp"
#include "anchorparse/checkpoint.hpp"
#include "anchorparse/config.hpp"
#include "anchorparse/corpus.hpp"
#include "anchorparse/datagen.hpp"
#include "anchorparse/errors.hpp"
#include "anchorparse/executor.hpp"
#include "anchorparse/manifest.hpp"
#include "anchorparse/training.hpp"
#include "anchorparse/vocab.hpp"
#include "anchorparse/wikisql.hpp"

namespace anchorparse::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kCheckpointFile = "checkpoint.bin";
constexpr const char* kMetricsFile = "metrics.jsonl";

// Flags shared by every subcommand; unused ones stay at their defaults.
struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string corpus;
  std::string checkpoint;
  std::optional<std::string> ablation;
  bool emit_plot_data = false;
  std::string split = "test";
  std::optional<int> example_id;
  std::size_t threads = 1;
  std::size_t beam = 1;
  std::string tables;
  std::string data;
  std::string manifest;
  bool verify = false;

  json to_json() const {
    json j = {{"out", out},         {"corpus", corpus},   {"checkpoint", checkpoint},
              {"emit_plot_data", emit_plot_data},         {"split", split},
              {"threads", threads}, {"beam", beam},       {"tables", tables},
              {"data", data}};
    j["example_id"] = example_id ? json(*example_id) : json();
    return j;
  }

  static Options from_json(const json& j) {
    Options o;
    o.out = j.value("out", "");
    o.corpus = j.value("corpus", "");
    o.checkpoint = j.value("checkpoint", "");
    o.emit_plot_data = j.value("emit_plot_data", false);
    o.split = j.value("split", "test");
    o.threads = j.value("threads", std::size_t{1});
    o.beam = j.value("beam", std::size_t{1});
    o.tables = j.value("tables", "");
    o.data = j.value("data", "");
    if (j.contains("example_id") && !j["example_id"].is_null()) o.example_id = j["example_id"].get<int>();
    return o;
  }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_input(const std::string& path, const char* flag, bool directory) {
  if (path.empty()) return;
  const bool ok = directory ? fs::is_directory(path) : fs::is_regular_file(path);
  if (!ok) throw MissingInput(std::string(flag) + ": " + (directory ? "directory" : "file") + " '" + path + "' does not exist");
}

void check_inputs(const Options& o) {
  require_input(o.config_path, "--config", false);
  require_input(o.tables, "--tables", false);
  require_input(o.data, "--data", false);
  require_input(o.checkpoint, "--checkpoint", false);
  require_input(o.manifest, "--manifest", false);
  require_input(o.corpus, "--corpus", true);
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

fs::path output_dir(const Options& o, const std::string& subcommand) {
  if (!o.out.empty()) return o.out;
  const char* env = std::getenv(kOutDirEnv);
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  return root / subcommand;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

RunConfig resolve_config(const Options& o, const std::string& subcommand) {
  RunConfig cfg = o.config_path.empty() ? RunConfig() : RunConfig::load(o.config_path);
  if (o.seed) {
    if (subcommand == "datagen") cfg.gen.seed = *o.seed;
    else cfg.train.seed = *o.seed;
  }
  if (o.ablation) cfg.train.ablation = ablation_from_string(*o.ablation);
  if (o.threads == 0) throw ConfigError("--threads must be positive");
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) { write_file_atomic(path, text); }

// ---------------------------------------------------------------------------
// Subcommands. Each fills the manifest's seeds, inputs and outputs.

void cmd_datagen(const RunConfig& cfg, const Options& o, const fs::path& out, RunManifest& m, std::ostream& os) {
  const Corpus corpus = generate_corpus(cfg.gen);
  const ValidationReport report = validate_corpus(corpus);
  if (!report.ok())
    throw DataError("generated corpus failed validation (" + std::to_string(report.failures.size()) +
                    " failures), first: " + report.failures.front());
  write_corpus(corpus, out);
  m.seeds["gen"] = cfg.gen.seed;
  m.outputs["corpus"] = absolute(out.string());
  const CorpusStats stats = corpus_stats(corpus);
  os << "wrote " << stats.examples << " examples and " << corpus.schemas().size() << " schemas to " << out.string()
     << '\n';
  (void)o;
}

void cmd_ingest(const RunConfig&, const Options& o, const fs::path& out, RunManifest& m, std::ostream& os) {
  require(o.tables, "--tables");
  require(o.data, "--data");
  IngestOptions opts;
  opts.split = o.split.empty() ? "train" : o.split;
  IngestReport report;
  const Corpus corpus = ingest_wikisql(o.tables, o.data, opts, &report);
  write_corpus(corpus, out);
  json r = {{"records", report.records},
            {"converted", report.converted},
            {"skipped", report.skipped},
            {"skip_rate", report.skip_rate()},
            {"skip_reasons", report.skip_reasons}};
  write_text(out / "ingest_report.json", r.dump(2) + "\n");
  m.inputs["tables"] = absolute(o.tables);
  m.inputs["data"] = absolute(o.data);
  m.outputs["corpus"] = absolute(out.string());
  os << "converted " << report.converted << " of " << report.records << " records (" << report.skipped
     << " skipped)\n";
}

void cmd_train(const RunConfig& cfg, const Options& o, const fs::path& out, RunManifest& m, std::ostream& os) {
  require(o.corpus, "--corpus");
  const Corpus corpus = read_corpus(o.corpus);
  const TokenVocab vocab = TokenVocab::from_corpus(corpus);
  fs::create_directories(out);
  const fs::path metrics_path = out / kMetricsFile;
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw std::ios_base::failure("cannot open '" + metrics_path.string() + "'");
  const FitResult fit_result = fit(corpus, vocab, cfg.model, cfg.train, &metrics);
  metrics.close();

  const json meta = {{"ablation", std::string(to_string(cfg.train.ablation))},
                     {"train", cfg.train.to_json()},
                     {"best_epoch", fit_result.best_epoch},
                     {"best_dev_exec_acc", fit_result.best_dev_exec_acc},
                     {"corpus", absolute(o.corpus)}};
  save_checkpoint(out / kCheckpointFile, *fit_result.model, vocab, meta);
  m.seeds["train"] = cfg.train.seed;
  m.inputs["corpus"] = absolute(o.corpus);
  m.outputs["checkpoint"] = absolute((out / kCheckpointFile).string());
  m.outputs["metrics"] = absolute(metrics_path.string());
  os << "trained " << fit_result.epochs.size() << " epochs (" << to_string(cfg.train.ablation)
     << "); best dev execution accuracy " << fit_result.best_dev_exec_acc << " at epoch " << fit_result.best_epoch
     << '\n';
}

Corpus corpus_for(const Options& o, const Checkpoint& ck) {
  if (!o.corpus.empty()) return read_corpus(o.corpus);
  if (ck.meta.contains("corpus")) return read_corpus(ck.meta["corpus"].get<std::string>());
  throw UsageError("--corpus is required (checkpoint does not record one)");
}

void cmd_evaluate(const RunConfig&, const Options& o, const fs::path& out, RunManifest& m, std::ostream& os) {
  require(o.checkpoint, "--checkpoint");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const Corpus corpus = corpus_for(o, ck);
  const std::vector<const Example*> golds = corpus.split(o.split);
  if (golds.empty()) throw DataError("split '" + o.split + "' has no examples");
  if (o.beam == 0) throw ConfigError("--beam must be positive");
  const auto preds = predict(*ck.model, ck.vocab, golds, o.beam);
  const EvalReport report = evaluate_predictions(preds, golds, corpus);

  std::ostringstream lines;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const Verdict v = judge(preds[i], *golds[i], corpus.schema(golds[i]->schema_ref));
    static constexpr const char* kNames[] = {"correct", "wrong_result", "parse_failure", "execution_failure"};
    lines << json{{"type", "prediction"},
                  {"id", golds[i]->id},
                  {"shape", golds[i]->shape},
                  {"prediction", join_tokens(preds[i])},
                  {"gold", join_tokens(golds[i]->targets.main)},
                  {"verdict", kNames[static_cast<int>(v)]}}
                 .dump()
          << '\n';
  }
  json summary = report.to_json();
  summary["type"] = "summary";
  summary["split"] = o.split;
  summary["beam"] = o.beam;
  lines << summary.dump() << '\n';
  fs::create_directories(out);
  write_text(out / "eval.jsonl", lines.str());
  write_text(out / "report.json", summary.dump(2) + "\n");
  write_text(out / "summary.txt", report.summary());
  m.inputs["checkpoint"] = absolute(o.checkpoint);
  if (!o.corpus.empty()) m.inputs["corpus"] = absolute(o.corpus);
  m.outputs["report"] = absolute((out / "report.json").string());
  os << report.summary();
}

void cmd_probe(const RunConfig&, const Options& o, const fs::path& out, RunManifest& m, std::ostream& os) {
  require(o.checkpoint, "--checkpoint");
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const WeightReport weights = weight_distribution_report(*ck.model);
  fs::create_directories(out);
  write_text(out / "weights.json", weights.to_json().dump(2) + "\n");
  if (o.emit_plot_data) {
    write_text(out / "plot_data.jsonl", weights.plot_data());
    m.outputs["plot_data"] = absolute((out / "plot_data.jsonl").string());
  }
  os << weights.render();

  const Corpus corpus = corpus_for(o, ck);
  const Example* ex = nullptr;
  if (o.example_id) {
    ex = corpus.find(*o.example_id);
    if (!ex) throw DataError("no example with id " + std::to_string(*o.example_id));
  } else {
    const auto split = corpus.split(o.split);
    if (split.empty()) throw DataError("split '" + o.split + "' has no examples");
    ex = split.front();
  }
  std::ostringstream lines;
  os << "\nexample " << ex->id << ": " << join_tokens(ex->utterance) << "\n  gold: " << join_tokens(ex->targets.main)
     << '\n';
  for (const auto& d : decode_intermediate_layers(*ck.model, ck.vocab, *ex)) {
    lines << json{{"example_id", ex->id},
                  {"layer", d.layer},
                  {"task", std::string(to_string(d.task))},
                  {"tokens", join_tokens(d.tokens)}}
                 .dump()
          << '\n';
    os << "  layer " << d.layer << ' ' << to_string(d.task) << ": " << join_tokens(d.tokens) << '\n';
  }
  write_text(out / "probe.jsonl", lines.str());
  m.inputs["checkpoint"] = absolute(o.checkpoint);
  m.outputs["weights"] = absolute((out / "weights.json").string());
  m.outputs["probe"] = absolute((out / "probe.jsonl").string());
}

using Handler = void (*)(const RunConfig&, const Options&, const fs::path&, RunManifest&, std::ostream&);

Handler handler_for(const std::string& name) {
  if (name == "datagen") return cmd_datagen;
  if (name == "ingest") return cmd_ingest;
  if (name == "train") return cmd_train;
  if (name == "evaluate") return cmd_evaluate;
  if (name == "probe") return cmd_probe;
  throw UsageError("unknown subcommand '" + name + "'");
}

void execute_run(const std::string& subcommand, const RunConfig& cfg, const Options& o, std::ostream& os) {
  RunManifest m;
  m.subcommand = subcommand;
  m.config = cfg.to_json();
  m.version = library_version();
  m.started_at = utc_timestamp();
  const fs::path out = output_dir(o, subcommand);
  Options recorded = o;
  recorded.out = absolute(out.string());
  recorded.corpus = absolute(o.corpus);
  recorded.checkpoint = absolute(o.checkpoint);
  recorded.tables = absolute(o.tables);
  recorded.data = absolute(o.data);
  m.options = recorded.to_json();
  handler_for(subcommand)(cfg, o, out, m, os);
  m.finished_at = utc_timestamp();
  write_manifest(m, out);
}

// Files under `dir` other than the manifest, relative path -> contents.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() == kManifestFile) continue;
    files[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
  }
  return files;
}

void cmd_replay(const Options& o, std::ostream& os) {
  require(o.manifest, "--manifest");
  const RunManifest original = read_manifest(o.manifest);
  if (original.subcommand == "replay") throw UsageError("cannot replay a replay manifest");
  const RunConfig cfg = RunConfig::from_json(original.config);
  Options replay = Options::from_json(original.options);
  const fs::path source_out = replay.out;
  replay.out = output_dir(o, "replay").string();
  if (fs::absolute(replay.out).lexically_normal() == fs::absolute(source_out).lexically_normal())
    throw UsageError("replay output directory must differ from the original run's");
  execute_run(original.subcommand, cfg, replay, os);
  if (!o.verify) return;
  const auto a = snapshot(source_out);
  const auto b = snapshot(replay.out);
  std::vector<std::string> diffs;
  for (const auto& [name, content] : a) {
    auto it = b.find(name);
    if (it == b.end()) diffs.push_back(name + " (missing)");
    else if (it->second != content) diffs.push_back(name);
  }
  for (const auto& [name, content] : b)
    if (!a.count(name)) diffs.push_back(name + " (extra)");
  if (!diffs.empty()) {
    std::string list;
    for (const auto& d : diffs) list += (list.empty() ? "" : ", ") + d;
    throw DataError("replay differs from the original run: " + list);
  }
  os << "replay identical: " << a.size() << " files\n";
}

std::string category_of(int code) {
  switch (code) {
    case kUsage: return "usage";
    case kIo: return "io";
    case kConfig: return "config";
    case kData: return "data";
    case kNumeric: return "numeric";
    default: return "internal";
  }
}

int fail(std::ostream& err, int code, const std::string& message) {
  std::string flat = message;
  for (char& c : flat)
    if (c == '\n' || c == '\r') c = ' ';
  err << "error: category=" << category_of(code) << " message=" << flat << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic parsing with anchor-supervised hierarchical decoders", "anchorparse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());
  Options o;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config_path, "JSON run configuration"); };
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, std::string("Output directory (default $") + kOutDirEnv + "/<subcommand>)");
  };
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", o.threads, "Worker threads for within-batch math")->check(CLI::PositiveNumber);
  };

  CLI::App* datagen = app.add_subcommand("datagen", "Generate a seeded synthetic corpus");
  add_config(datagen);
  add_out(datagen);
  add_threads(datagen);
  datagen->add_option("--seed", o.seed, "Generation seed");

  CLI::App* ingest = app.add_subcommand("ingest", "Convert WikiSQL files into a corpus");
  add_out(ingest);
  ingest->add_option("--tables", o.tables, "WikiSQL tables .jsonl");
  ingest->add_option("--data", o.data, "WikiSQL questions .jsonl");
  ingest->add_option("--split", o.split, "Split name given to the converted examples");

  CLI::App* train = app.add_subcommand("train", "Train a model on a corpus");
  add_config(train);
  add_out(train);
  add_threads(train);
  train->add_option("--corpus", o.corpus, "Corpus directory");
  train->add_option("--seed", o.seed, "Training seed");
  train->add_option("--ablation", o.ablation, "full, no_sae, no_saa, no_hierarchy or baseline");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a corpus split");
  add_out(evaluate);
  add_threads(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  evaluate->add_option("--corpus", o.corpus, "Corpus directory");
  evaluate->add_option("--split", o.split, "train, dev or test");
  evaluate->add_option("--beam", o.beam, "Beam size (1 is greedy)")->check(CLI::PositiveNumber);

  CLI::App* probe = app.add_subcommand("probe", "Report layer weights and per-layer decodings");
  add_out(probe);
  probe->add_option("--checkpoint", o.checkpoint, "Checkpoint file");
  probe->add_option("--corpus", o.corpus, "Corpus directory");
  probe->add_option("--example-id", o.example_id, "Example to decode");
  probe->add_option("--split", o.split, "Split used when no example id is given");
  probe->add_flag("--emit-plot-data", o.emit_plot_data, "Write (task, layer, weight) records");

  CLI::App* replay = app.add_subcommand("replay", "Re-run a recorded run from its manifest");
  add_out(replay);
  replay->add_option("--manifest", o.manifest, "manifest.json of the run to replay");
  replay->add_flag("--verify", o.verify, "Fail unless every output file is byte-identical");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << library_version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, kUsage, e.what());
  }

  try {
    check_inputs(o);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "replay") {
      cmd_replay(o, out);
    } else {
      execute_run(name, resolve_config(o, name), o, out);
    }
    return kOk;
  } catch (const UsageError& e) {
    return fail(err, kUsage, e.what());
  } catch (const MissingInput& e) {
    return fail(err, kIo, e.what());
  } catch (const ConfigError& e) {
    return fail(err, kConfig, e.what());
  } catch (const NumericError& e) {
    return fail(err, kNumeric, e.what());
  } catch (const DataError& e) {
    return fail(err, kData, e.what());
  } catch (const CorpusError& e) {
    return fail(err, kData, e.what());
  } catch (const CheckpointError& e) {
    return fail(err, kData, e.what());
  } catch (const SchemaError& e) {
    return fail(err, kData, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(err, kIo, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, kIo, e.what());
  } catch (const std::exception& e) {
    return fail(err, kInternal, e.what());
  }
}

}  // namespace anchorparse::cli
