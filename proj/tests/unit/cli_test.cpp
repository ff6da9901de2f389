#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "anchorparse/config.hpp"
#include "anchorparse/errors.hpp"
#include "anchorparse/manifest.hpp"
#include "anchorparse_cli/cli.hpp"

namespace anchorparse {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("anchorparse_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "anchorparse");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig = R"({
  "version": 1,
  "gen": {"train_count": 40, "dev_count": 8, "test_count": 8, "db_schemas": 3, "kb_schemas": 3},
  "model": {"d_model": 16, "heads": 2, "encoder_layers": 1, "decoder_layers": 3, "ff_dim": 32, "dropout": 0.0},
  "train": {"epochs": 1, "batch_size": 8, "dev_limit": 8}
})";

TEST(Cli, UnknownFlagIsAUsageError) {
  const Result r = run({"datagen", "--bogus"});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_EQ(r.err.rfind("error: category=usage", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
}

TEST(Cli, MissingFileIsAnIoError) {
  const Result r = run({"datagen", "--config", "/nonexistent/run.json"});
  EXPECT_EQ(r.code, cli::kIo);
  EXPECT_NE(r.err.find("category=io"), std::string::npos);
  EXPECT_EQ(run({"evaluate", "--checkpoint", "/nonexistent/ck.bin"}).code, cli::kIo);
  EXPECT_EQ(run({"train", "--corpus", "/nonexistent/corpus"}).code, cli::kIo);
}

TEST(Cli, InvalidConfigIsAConfigError) {
  const fs::path dir = temp_dir("badcfg");
  write(dir / "unknown.json", R"({"version": 1, "train": {"epochz": 3}})");
  write(dir / "version.json", R"({"version": 7})");
  write(dir / "section.json", R"({"version": 1, "optimizer": {}})");
  write(dir / "infeasible.json", R"({"version": 1, "gen": {"tables": [0, 0]}})");
  for (const char* name : {"unknown.json", "version.json", "section.json", "infeasible.json"}) {
    const Result r = run({"datagen", "--config", (dir / name).string(), "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, cli::kConfig) << name << ": " << r.err;
  }
  EXPECT_EQ(run({"train", "--corpus", dir.string(), "--ablation", "half"}).code, cli::kConfig);
}

TEST(Cli, ConfigRoundTrips) {
  RunConfig cfg = RunConfig::from_json(json::parse(kTinyConfig));
  EXPECT_EQ(cfg.gen.train_count, 40u);
  EXPECT_EQ(cfg.model.decoder_layers, 3u);
  EXPECT_EQ(cfg.train.batch_size, 8u);
  EXPECT_EQ(cfg.train.learning_rate, TrainConfig{}.learning_rate);
  const RunConfig back = RunConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
}

TEST(Cli, ShippedConfigsLoad) {
  const fs::path dir = fs::path(ANCHORPARSE_FIXTURE_DIR).parent_path().parent_path() / "configs";
  std::size_t loaded = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(RunConfig::load(entry.path())) << entry.path();
    ++loaded;
  }
  EXPECT_GE(loaded, 2u);
  EXPECT_EQ(RunConfig::load(dir / "desk.json").to_json(), RunConfig().to_json());
}

TEST(Cli, DatagenWritesCorpusAndManifest) {
  const fs::path dir = temp_dir("datagen");
  write(dir / "cfg.json", kTinyConfig);
  const Result r = run({"datagen", "--config", (dir / "cfg.json").string(), "--seed", "9", "--out", (dir / "c").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const RunManifest m = read_manifest(dir / "c" / kManifestFile);
  EXPECT_EQ(m.subcommand, "datagen");
  EXPECT_EQ(m.seeds.at("gen"), 9u);
  EXPECT_EQ(m.config["gen"]["seed"], 9);
  EXPECT_FALSE(m.started_at.empty());
  EXPECT_EQ(m.version, library_version());
}

TEST(Cli, DefaultOutputDirectoryComesFromEnvironment) {
  const fs::path dir = temp_dir("envout");
  write(dir / "cfg.json", kTinyConfig);
  ASSERT_EQ(setenv(cli::kOutDirEnv, (dir / "root").c_str(), 1), 0);
  const Result r = run({"datagen", "--config", (dir / "cfg.json").string()});
  unsetenv(cli::kOutDirEnv);
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "root" / "datagen" / kManifestFile));
}

TEST(Cli, TrainEvaluateProbeAndReplay) {
  const fs::path dir = temp_dir("pipeline");
  write(dir / "cfg.json", kTinyConfig);
  const std::string cfg = (dir / "cfg.json").string();
  const std::string corpus = (dir / "corpus").string();
  ASSERT_EQ(run({"datagen", "--config", cfg, "--out", corpus}).code, cli::kOk);

  const std::string train_out = (dir / "train").string();
  Result r = run({"train", "--config", cfg, "--corpus", corpus, "--ablation", "baseline", "--out", train_out});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::ifstream metrics(dir / "train" / "metrics.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(metrics, line)) {
    ++lines;
    EXPECT_EQ(line.find("w_s"), std::string::npos) << line;
  }
  EXPECT_GT(lines, 0u);

  const std::string ck = (dir / "train" / "checkpoint.bin").string();
  r = run({"evaluate", "--checkpoint", ck, "--corpus", corpus, "--split", "test", "--out", (dir / "eval").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::ifstream report_in(dir / "eval" / "report.json");
  const json report = json::parse(report_in);
  EXPECT_TRUE(report.contains("exec_acc"));

  const std::string full_out = (dir / "train_full").string();
  ASSERT_EQ(run({"train", "--config", cfg, "--corpus", corpus, "--out", full_out}).code, cli::kOk);
  r = run({"probe", "--checkpoint", full_out + "/checkpoint.bin", "--example-id", "17", "--emit-plot-data", "--out",
           (dir / "probe").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  std::ifstream probe(dir / "probe" / "probe.jsonl");
  lines = 0;
  while (std::getline(probe, line)) ++lines;
  EXPECT_EQ(lines, (3u - 1u) * 2u);
  EXPECT_TRUE(fs::exists(dir / "probe" / "plot_data.jsonl"));
  EXPECT_EQ(run({"probe", "--checkpoint", full_out + "/checkpoint.bin", "--example-id", "99999", "--out",
                 (dir / "probe_missing").string()})
                .code,
            cli::kData);

  for (const std::string& source : {corpus, train_out}) {
    r = run({"replay", "--manifest", source + "/manifest.json", "--verify", "--out", source + "_replay"});
    EXPECT_EQ(r.code, cli::kOk) << source << ": " << r.err;
    EXPECT_NE(r.out.find("replay identical"), std::string::npos);
  }
  EXPECT_EQ(run({"replay", "--manifest", corpus + "/manifest.json", "--out", corpus}).code, cli::kUsage);
}

TEST(Cli, ReplayDetectsTamperedOutputs) {
  const fs::path dir = temp_dir("tamper");
  write(dir / "cfg.json", kTinyConfig);
  const std::string corpus = (dir / "corpus").string();
  ASSERT_EQ(run({"datagen", "--config", (dir / "cfg.json").string(), "--out", corpus}).code, cli::kOk);
  write(dir / "corpus" / "extra.txt", "x");
  const Result r = run({"replay", "--manifest", corpus + "/manifest.json", "--verify", "--out", corpus + "_replay"});
  EXPECT_EQ(r.code, cli::kData);
  EXPECT_NE(r.err.find("extra.txt"), std::string::npos);
}

}  // namespace
}  // namespace anchorparse
