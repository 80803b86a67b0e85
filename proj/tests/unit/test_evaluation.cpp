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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "phrasecl/corpus.hpp"
#include "phrasecl/errors.hpp"
#include "phrasecl/evaluation.hpp"

namespace phrasecl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phrasecl_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(HarmonicF1, ReportedRows) {
  EXPECT_NEAR(harmonic_f1(0.74, 0.37), 2 * 0.74 * 0.37 / 1.11, 1e-15);
  EXPECT_NEAR(harmonic_f1(0.74, 0.37), 0.49, 0.005);
  EXPECT_NEAR(harmonic_f1(0.94, 0.92), 0.93, 0.005);
  EXPECT_NEAR(harmonic_f1(0.94, 0.92), 0.92989, 1e-5);
  EXPECT_EQ(harmonic_f1(0.0, 0.0), 0.0);
  EXPECT_EQ(harmonic_f1(1.0, 1.0), 1.0);
}

TEST(MacroMetrics, HandCountedExample) {
  // Gold: a a b c ; predicted: a b b a.
  const LabelMap gold = {{"1", "a"}, {"2", "a"}, {"3", "b"}, {"4", "c"}};
  const LabelMap pred = {{"1", "a"}, {"2", "b"}, {"3", "b"}, {"4", "a"}};
  const MetricReport r = macro_metrics(pred, gold);
  EXPECT_EQ(r.n_classes, 3u);
  // a: tp1 fp1 fn1 -> P .5 R .5 ; b: tp1 fp1 fn0 -> P .5 R 1 ; c: tp0 fp0 fn1 -> P 0 R 0.
  EXPECT_DOUBLE_EQ(r.per_class.at("a").precision, 0.5);
  EXPECT_DOUBLE_EQ(r.per_class.at("b").recall, 1.0);
  EXPECT_EQ(r.per_class.at("c").precision, 0.0);
  EXPECT_DOUBLE_EQ(r.macro_precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.macro_recall, 0.5);
  EXPECT_DOUBLE_EQ(r.macro_f1, 2.0 * (1.0 / 3.0) * 0.5 / (1.0 / 3.0 + 0.5));
  // Differs from the mean of per-class F1s (0.5 + 2/3 + 0) / 3.
  EXPECT_GT(std::abs(r.macro_f1 - (0.5 + 2.0 / 3.0) / 3.0), 1e-3);
}

TEST(MacroMetrics, PerfectAndPermutationInvariant) {
  const LabelMap gold = {{"x", "p"}, {"y", "q"}, {"z", "r"}, {"w", "p"}};
  const MetricReport r = macro_metrics(gold, gold);
  EXPECT_EQ(r.macro_precision, 1.0);
  EXPECT_EQ(r.macro_recall, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  // Relabelling ids permutes example order without changing scores.
  const LabelMap gold2 = {{"a", "p"}, {"b", "p"}, {"c", "r"}, {"d", "q"}};
  const LabelMap pred2 = {{"a", "q"}, {"b", "p"}, {"c", "r"}, {"d", "q"}};
  const LabelMap gold3 = {{"d", "p"}, {"c", "p"}, {"b", "r"}, {"a", "q"}};
  const LabelMap pred3 = {{"d", "q"}, {"c", "p"}, {"b", "r"}, {"a", "q"}};
  EXPECT_EQ(macro_metrics(pred2, gold2).macro_f1, macro_metrics(pred3, gold3).macro_f1);
  EXPECT_NE(r.table().find("macro F1 1.0000"), std::string::npos);
}

TEST(MacroMetrics, MissingPredictionsAreListed) {
  const LabelMap gold = {{"e1", "a"}, {"e2", "b"}};
  const LabelMap pred = {{"e1", "a"}};
  try {
    macro_metrics(pred, gold);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("e2"), std::string::npos);
  }
}

TEST(MacroMetrics, ExplicitClassSetIncludesUnseenClasses) {
  const LabelMap gold = {{"1", "a"}};
  const MetricReport r = macro_metrics(gold, gold, std::set<std::string>{"a", "b"});
  EXPECT_EQ(r.n_classes, 2u);
  EXPECT_DOUBLE_EQ(r.macro_precision, 0.5);
}

ProbabilityTable two_candidate(double p1, double p2) {
  return {{"ex", {{"first", p1}, {"second", p2}}}};
}

TEST(Fusion, WeightedMeanAndArgmax) {
  const std::vector<ProbabilityTable> tables = {two_candidate(0.6, 0.4), two_candidate(0.2, 0.8)};
  const std::vector<double> equal = {1.0, 1.0};
  const ProbabilityTable fused = fuse_probabilities(tables, equal);
  EXPECT_NEAR(fused.at("ex")[0].second, 0.4, 1e-15);
  EXPECT_NEAR(fused.at("ex")[1].second, 0.6, 1e-15);
  EXPECT_NEAR(fused.at("ex")[0].second + fused.at("ex")[1].second, 1.0, 1e-9);
  EXPECT_EQ(ensemble_fuse(tables, equal).at("ex"), "second");

  const std::vector<double> only_first = {1.0, 0.0};
  EXPECT_EQ(ensemble_fuse(tables, only_first).at("ex"), "first");
  const std::vector<double> scaled = {3.5, 3.5};
  EXPECT_EQ(ensemble_fuse(tables, scaled), ensemble_fuse(tables, equal));
  const std::vector<ProbabilityTable> tie = {two_candidate(0.5, 0.5)};
  const std::vector<double> one = {1.0};
  EXPECT_EQ(ensemble_fuse(tie, one).at("ex"), "first");
}

TEST(Fusion, RejectsMismatches) {
  const std::vector<double> w2 = {1.0, 1.0};
  std::vector<ProbabilityTable> tables = {two_candidate(0.6, 0.4),
                                          {{"ex", {{"first", 0.5}, {"third", 0.5}}}}};
  EXPECT_THROW(fuse_probabilities(tables, w2), ValidationError);
  tables[1] = {{"other", {{"first", 0.5}, {"second", 0.5}}}};
  EXPECT_THROW(fuse_probabilities(tables, w2), ValidationError);
  tables[1] = two_candidate(0.1, 0.9);
  const std::vector<double> zeros = {0.0, 0.0}, negative = {1.0, -1.0}, short_w = {1.0};
  EXPECT_THROW(fuse_probabilities(tables, zeros), ParameterError);
  EXPECT_THROW(fuse_probabilities(tables, negative), ParameterError);
  EXPECT_THROW(fuse_probabilities(tables, short_w), ParameterError);
}

TEST(ArgmaxFirst, TiesGoToTheEarliest) {
  const std::vector<double> v = {0.1, 0.7, 0.7, 0.2};
  EXPECT_EQ(argmax_first(v), 1u);
}

TEST(Files, PredictionAndProbabilityRoundTrip) {
  const fs::path dir = scratch("io");
  write_predictions(dir / "p.json", {{"b", "Long Form"}, {"a", "other"}});
  const LabelMap back = read_predictions(dir / "p.json");
  EXPECT_EQ(back.at("b"), "Long Form");
  EXPECT_EQ(read_gold(dir / "p.json").size(), 2u);

  const ProbabilityTable t = {{"a", {{"x", 0.25}, {"y", 0.75}}}, {"b", {{"z", 1.0}}}};
  write_probabilities(dir / "probs.json", t, {"b", "a"});
  EXPECT_EQ(read_probabilities(dir / "probs.json"), t);
  // Candidate order is preserved as written, not sorted.
  const ProbabilityTable order = {{"a", {{"y", 0.5}, {"x", 0.5}}}};
  write_probabilities(dir / "order.json", order, {"a"});
  EXPECT_EQ(read_probabilities(dir / "order.json").at("a")[0].first, "y");

  write_file(dir / "bad.json", "{not json");
  EXPECT_THROW(read_predictions(dir / "bad.json"), FormatError);
  write_file(dir / "dup.json", R"([{"id": "a", "label": "x"}, {"id": "a", "label": "y"}])");
  EXPECT_THROW(read_predictions(dir / "dup.json"), ValidationError);
}

TEST(Files, NormalizeLabel) {
  EXPECT_EQ(normalize_label("  Support   Vector\tMachines "), "support vector machines");
}

}  // namespace
}  // namespace phrasecl
