// Copyright 2026 The Phrasecl Authors.
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

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "phrasecl/cli.hpp"
#include "phrasecl/corpus.hpp"

namespace phrasecl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phrasecl_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome r;
  args.insert(args.begin(), "phrasecl");
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

TEST(Cli, UnknownSubcommandIsAUsageError) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"evaluate"}).code, 2);
}

TEST(Cli, EvaluatePerfectPredictions) {
  const fs::path dir = scratch("eval");
  write_file(dir / "p.json", R"([{"id": "a", "label": "Support Vector Machines"},
                                 {"id": "b", "label": "state vector machine"}])");
  write_file(dir / "g.json", R"([{"id": "a", "label": "support vector machines"},
                                 {"id": "b", "label": "state vector machine"}])");
  const Outcome r = run({"evaluate", "--pred", (dir / "p.json").string(), "--gold",
                     (dir / "g.json").string(), "--out-dir", dir.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("macro F1 1.0000"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "manifest_evaluate.json"));
}

TEST(Cli, MissingCheckpointIsAValidationError) {
  const fs::path dir = scratch("missing");
  write_file(dir / "d.json", R"({"SVM": ["support vector machines"]})");
  write_file(dir / "x.json", R"([{"id": "a", "tokens": ["an", "SVM"], "acronym": 1}])");
  const Outcome r = run({"predict", "--model", (dir / "nope.ckpt").string(), "--dictionary",
                     (dir / "d.json").string(), "--data", (dir / "x.json").string(), "--out-dir",
                     dir.string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("ValidationError"), std::string::npos) << r.err;
}

TEST(Cli, MalformedInputIsAFormatError) {
  const fs::path dir = scratch("format");
  write_file(dir / "p.json", "[{");
  write_file(dir / "g.json", "[]");
  const Outcome r = run({"evaluate", "--pred", (dir / "p.json").string(), "--gold",
                     (dir / "g.json").string(), "--out-dir", dir.string()});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("FormatError"), std::string::npos) << r.err;
}

TEST(Cli, TinyPipelineIsReproducible) {
  const fs::path dir = scratch("pipeline");
  const std::string out = dir.string();
  write_file(dir / "config.json", R"({
    "seed": 3,
    "synthetic": {"num_acronyms": 2, "senses_per_acronym": 2, "examples_per_sense": 6},
    "pretrain": {"steps_phase1": 2, "steps_phase2": 1, "batch_size": 4,
                 "encoder": {"hidden_dim": 8, "num_layers": 1, "num_heads": 2, "ffn_dim": 16,
                             "max_sequence_length": 32}},
    "finetune": {"epochs": 1, "batch_size": 4, "lr_start": 0.001, "lr_end": 0.0001}
  })");
  const std::string cfg = (dir / "config.json").string();
  auto step = [&](std::vector<std::string> args) {
    args.insert(args.end(), {"--config", cfg, "--out-dir", out});
    const Outcome r = run(args);
    EXPECT_EQ(r.code, 0) << args[0] << ": " << r.err;
    return r;
  };
  step({"synth"});
  const std::string dict = (dir / "dictionary.json").string();
  step({"pretrain", "--dictionary", dict, "--train", (dir / "train.json").string()});
  step({"finetune", "--checkpoint", (dir / "encoder.ckpt").string(), "--dictionary", dict,
        "--train", (dir / "train.json").string(), "--dev", (dir / "dev.json").string()});
  step({"predict", "--model", (dir / "model.ckpt").string(), "--dictionary", dict, "--data",
        (dir / "test.json").string(), "--probs", (dir / "probs.json").string()});
  step({"evaluate", "--pred", (dir / "predictions.json").string(), "--gold",
        (dir / "test_gold.json").string()});
  step({"baseline", "--dictionary", dict, "--data", (dir / "test.json").string(), "--probs",
        (dir / "baseline_probs.json").string()});
  step({"ensemble", "--probs", (dir / "probs.json").string(), "--probs",
        (dir / "baseline_probs.json").string(), "--weights", "1,1"});
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "ensemble_predictions.json"));
  const nlohmann::json report = nlohmann::json::parse(read_file(dir / "report.json"));
  EXPECT_TRUE(report.contains("macro_f1"));

  const std::string first_pred = read_file(dir / "predictions.json");
  const std::string first_manifest = read_file(dir / "manifest_finetune.json");
  const std::string test_input = read_file(dir / "test.json");
  step({"finetune", "--checkpoint", (dir / "encoder.ckpt").string(), "--dictionary", dict,
        "--train", (dir / "train.json").string(), "--dev", (dir / "dev.json").string()});
  step({"predict", "--model", (dir / "model.ckpt").string(), "--dictionary", dict, "--data",
        (dir / "test.json").string()});
  EXPECT_EQ(read_file(dir / "manifest_finetune.json"), first_manifest);
  EXPECT_EQ(read_file(dir / "predictions.json"), first_pred);
  EXPECT_EQ(read_file(dir / "test.json"), test_input);
}

TEST(Cli, FileHashIsStable) {
  const fs::path dir = scratch("hash");
  write_file(dir / "a.txt", "abc");
  EXPECT_EQ(file_hash(dir / "a.txt"), file_hash(dir / "a.txt"));
  EXPECT_EQ(file_hash(dir / "a.txt").size(), 16u);
  write_file(dir / "b.txt", "abd");
  EXPECT_NE(file_hash(dir / "a.txt"), file_hash(dir / "b.txt"));
}

}  // namespace
}  // namespace phrasecl
