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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "phrasecl/corpus.hpp"
#include "phrasecl/errors.hpp"

namespace phrasecl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("phrasecl_corpus_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Dictionary svm_dictionary() {
  return parse_dictionary(R"({"SVM": ["support vector machines", "state vector machine"],
                              "AB": ["alpha beta"],
                              "CNN": ["convolutional neural network", "condensed nearest neighbor",
                                      "cable news network"]})");
}

AcronymExample labeled(const std::string& id, const std::string& sf, std::size_t gold,
                       const Dictionary& dict) {
  AcronymExample ex;
  ex.id = id;
  ex.tokens = {"we", "use", sf, "here"};
  ex.acronym_span = {2, 3};
  ex.short_form = sf;
  ex.gold_index = gold;
  ex.gold_long_form = dict.candidates(sf)[gold].text;
  return ex;
}

TEST(Tokenize, SplitsOnWhitespaceAndLowercases) {
  EXPECT_EQ(tokenize("  Support\tVector\nMachines "),
            (std::vector<std::string>{"support", "vector", "machines"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Dictionary, LoadsCandidatesInFileOrder) {
  const Dictionary d = parse_dictionary(R"({"SVM": ["support vector machines", "state vector machine"]})");
  EXPECT_EQ(d.candidate_count("SVM"), 2u);
  EXPECT_EQ(d.candidates("SVM")[0].text, "support vector machines");
  EXPECT_EQ(d.candidates("SVM")[1].tokens, (std::vector<std::string>{"state", "vector", "machine"}));
  const Dictionary single = parse_dictionary(R"({"AB": ["alpha beta"]})");
  EXPECT_EQ(single.candidate_count("AB"), 1u);
}

TEST(Dictionary, RejectsDuplicatesAndMalformedInput) {
  EXPECT_THROW(parse_dictionary(R"({"SVM": ["support vector machines", "Support  vector machines"]})"),
               ValidationError);
  EXPECT_THROW(parse_dictionary(R"({"SVM": []})"), ValidationError);
  EXPECT_THROW(parse_dictionary(R"({"SVM": ["a" )"), FormatError);
  EXPECT_THROW(parse_dictionary(R"(["SVM"])"), FormatError);
  EXPECT_THROW(load_dictionary("/nonexistent/dictionary.json"), FormatError);
  EXPECT_THROW(svm_dictionary().candidates("XYZ"), LookupError);
}

TEST(Dictionary, FileRoundTripIsByteIdentical) {
  const fs::path dir = scratch("dict_roundtrip");
  const std::string canonical = svm_dictionary().serialize();
  write_file(dir / "d.json", canonical);
  const Dictionary loaded = load_dictionary(dir / "d.json");
  EXPECT_EQ(loaded.serialize(), canonical);
  EXPECT_EQ(load_dictionary(dir / "d.json").serialize(), canonical);
}

TEST(Dataset, ParsesSpansAndLabels) {
  const Dictionary dict = svm_dictionary();
  const auto data = parse_dataset(R"([
    {"id": "a", "tokens": ["the", "SVM", "model"], "acronym": 1, "label": "support vector machines"},
    {"id": "b", "tokens": ["a", "CNN", "x"], "acronym": [1, 2]},
    {"id": "c", "tokens": ["see", "AB", "now"], "acronym": 1, "short_form": "AB",
     "label": "Alpha Beta"}
  ])", dict, Split::dev);
  ASSERT_EQ(data.size(), 3u);
  EXPECT_EQ(data[0].short_form, "SVM");
  EXPECT_EQ(data[0].gold_index, 0u);
  EXPECT_EQ(data[0].acronym_span, (TokenSpan{1, 2}));
  EXPECT_FALSE(data[1].labeled());
  EXPECT_EQ(data[2].gold_long_form, "alpha beta");
  EXPECT_EQ(data[2].split, Split::dev);
}

TEST(Dataset, MultiTokenShortForm) {
  const Dictionary dict = parse_dictionary(R"({"S V M": ["support vector machines"]})");
  const auto data = parse_dataset(
      R"([{"id": "m", "tokens": ["x", "S", "V", "M", "y"], "acronym": [1, 4]}])", dict, Split::test);
  EXPECT_EQ(data[0].short_form, "S V M");
  EXPECT_EQ(data[0].acronym_span.length(), 3);
}

TEST(Dataset, ValidationErrorsNameTheExample) {
  const Dictionary dict = svm_dictionary();
  try {
    parse_dataset(R"([{"id": "bad-7", "tokens": ["the", "SVM"], "acronym": 1, "label": "not listed"}])",
                  dict, Split::train);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-7"), std::string::npos);
  }
  EXPECT_THROW(parse_dataset(R"([{"id": "s", "tokens": ["the", "SVM"], "acronym": 1, "short_form": "CNN"}])",
                             dict, Split::train),
               ValidationError);
  EXPECT_THROW(parse_dataset(R"([{"id": "r", "tokens": ["the", "SVM"], "acronym": 2}])", dict,
                             Split::train),
               ValidationError);
  EXPECT_THROW(parse_dataset(R"([{"id": "u", "tokens": ["the", "RNN"], "acronym": 1}])", dict,
                             Split::train),
               ValidationError);
  EXPECT_THROW(parse_dataset(R"([{"id": "f", "tokens": "the SVM", "acronym": 1}])", dict,
                             Split::train),
               FormatError);
}

TEST(Dataset, CanonicalRoundTrip) {
  const Dictionary dict = svm_dictionary();
  std::vector<AcronymExample> data = {labeled("e1", "SVM", 1, dict), labeled("e2", "CNN", 2, dict)};
  data[1].tokens = {"x", "CNN", "CNN", "y"};
  data[1].acronym_span = {1, 3};
  data[1].short_form = "CNN CNN";
  const Dictionary dict2 = parse_dictionary(
      R"({"SVM": ["support vector machines", "state vector machine"], "CNN CNN": ["c c"]})");
  data[1].gold_index = 0;
  data[1].gold_long_form = "c c";
  const std::string text = serialize_dataset(data);
  EXPECT_EQ(serialize_dataset(parse_dataset(text, dict2, Split::train)), text);
}

TEST(Dataset, TruncationKeepsTheAcronym) {
  AcronymExample ex;
  ex.id = "long";
  for (int i = 0; i < 400; ++i) ex.tokens.push_back("w" + std::to_string(i));
  ex.tokens[350] = "SVM";
  ex.acronym_span = {350, 351};
  ex.short_form = "SVM";
  const AcronymExample t = truncate_example(ex, 300);
  EXPECT_EQ(t.tokens.size(), 300u);
  EXPECT_EQ(span_text(t.tokens, t.acronym_span), "SVM");
  // Centred window: about (300 - 1) / 2 tokens of left context, clipped at the end.
  EXPECT_EQ(t.tokens.front(), "w100");
  ex.acronym_span = {0, 1};
  ex.tokens[0] = "SVM";
  const AcronymExample head = truncate_example(ex, 300);
  EXPECT_EQ(head.acronym_span.start, 0);
  EXPECT_EQ(truncate_example(ex, 500).tokens.size(), 400u);
  ex.acronym_span = {0, 301};
  EXPECT_THROW(truncate_example(ex, 300), ValidationError);
}

TEST(Vocabulary, ReservedTokensAndFrequencyCutoff) {
  const Dictionary dict = parse_dictionary(R"({"A": ["a"]})");
  AcronymExample ex;
  ex.id = "v";
  ex.tokens = {"a", "a", "b"};
  ex.acronym_span = {0, 1};
  ex.short_form = "a";
  const Vocabulary v = build_vocabulary({ex}, dict, 2);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.size(), 6);
  EXPECT_EQ(v.id("[MASK]"), Vocabulary::kMask);
  EXPECT_EQ(v.id("never-seen"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("A"), v.id("a"));

  const Vocabulary all = build_vocabulary({ex}, dict, 1);
  EXPECT_EQ(all.size(), 2 + 5);
  EXPECT_THROW(build_vocabulary({}, dict, 1), EmptyCorpusError);
  EXPECT_THROW(build_vocabulary({ex}, dict, 0), ParameterError);
}

TEST(Vocabulary, BijectionAndRestore) {
  const Dictionary dict = svm_dictionary();
  const Vocabulary v = build_vocabulary({labeled("x", "SVM", 0, dict)}, dict, 1);
  for (int id = 0; id < v.size(); ++id) EXPECT_EQ(v.id(v.token(id)), id);
  const Vocabulary r = Vocabulary::from_tokens(v.tokens());
  EXPECT_EQ(r.tokens(), v.tokens());
  EXPECT_THROW(Vocabulary::from_tokens({"x"}), ValidationError);
}

TEST(Vocabulary, SyntheticSizeMatchesIndependentRecount) {
  SyntheticConfig config;
  config.seed = 7;
  const SyntheticCorpus corpus = generate_synthetic(config);
  const fs::path dir = scratch("vocab_recount");
  write_synthetic(corpus, dir);

  // Recount from the emitted files only.
  std::set<std::string> distinct;
  for (const char* f : {"train.json", "dev.json", "test.json"}) {
    for (const auto& item : nlohmann::json::parse(read_file(dir / f))) {
      for (const auto& t : item["tokens"]) distinct.insert(lowercase(t.get<std::string>()));
    }
  }
  const nlohmann::json dict_json = nlohmann::json::parse(read_file(dir / "dictionary.json"));
  for (const auto& [sf, lfs] : dict_json.items()) {
    for (const auto& lf : lfs) {
      for (const auto& t : tokenize(lf.get<std::string>())) distinct.insert(t);
    }
  }
  const Vocabulary v = build_vocabulary(corpus.examples, corpus.dictionary, 1);
  EXPECT_EQ(static_cast<std::size_t>(v.size()), distinct.size() + 5);
}

TEST(Candidates, SameShortFormNegativesAreForced) {
  const Dictionary dict = svm_dictionary();
  const CandidateSet set = sample_candidates(labeled("c", "CNN", 1, dict), dict, 2, 99);
  EXPECT_EQ(set.positive.text, "condensed nearest neighbor");
  ASSERT_EQ(set.negatives.size(), 2u);
  EXPECT_EQ(set.negatives[0].text, "convolutional neural network");
  EXPECT_EQ(set.negatives[1].text, "cable news network");
  EXPECT_FALSE(set.exhausted);
}

TEST(Candidates, PadsFromOtherShortForms) {
  const Dictionary dict = svm_dictionary();
  const CandidateSet set = sample_candidates(labeled("p", "AB", 0, dict), dict, 2, 5);
  ASSERT_EQ(set.negatives.size(), 2u);
  for (const Phrase& p : set.negatives) {
    EXPECT_FALSE(p == set.positive);
    EXPECT_FALSE(dict.index_of("AB", p.text).has_value());
  }
  EXPECT_NE(set.negatives[0].text, set.negatives[1].text);
  const CandidateSet again = sample_candidates(labeled("p", "AB", 0, dict), dict, 2, 5);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(again.negatives[i].text, set.negatives[i].text);
}

TEST(Candidates, SameShortFormTakesPriorityAndSubsetsDeterministically) {
  const Dictionary dict = parse_dictionary(R"({"X": ["a", "b", "c", "d", "e"], "Y": ["f"]})");
  AcronymExample ex = labeled("s", "X", 2, dict);
  const CandidateSet set = sample_candidates(ex, dict, 2, 11);
  ASSERT_EQ(set.negatives.size(), 2u);
  for (const Phrase& p : set.negatives) EXPECT_TRUE(dict.index_of("X", p.text).has_value());
  const CandidateSet none = sample_candidates(ex, dict, 0, 11);
  EXPECT_TRUE(none.negatives.empty());
  EXPECT_FALSE(none.exhausted);
}

TEST(Candidates, ExhaustedPoolIsFlagged) {
  const Dictionary dict = parse_dictionary(R"({"AB": ["alpha beta"]})");
  const CandidateSet set = sample_candidates(labeled("e", "AB", 0, dict), dict, 2, 1);
  EXPECT_TRUE(set.negatives.empty());
  EXPECT_TRUE(set.exhausted);
  AcronymExample unlabeled = labeled("u", "AB", 0, dict);
  unlabeled.gold_index.reset();
  EXPECT_THROW(sample_candidates(unlabeled, dict, 2, 1), ValidationError);
}

TEST(SplitStats, OfficialProportions) {
  std::vector<AcronymExample> examples(9000);
  for (std::size_t i = 7532; i < 7532 + 894; ++i) examples[i].split = Split::dev;
  for (std::size_t i = 7532 + 894; i < 9000; ++i) examples[i].split = Split::test;
  const SplitStats s = split_stats(examples);
  EXPECT_EQ(s.train, 7532u);
  EXPECT_EQ(s.dev, 894u);
  EXPECT_EQ(s.test, 574u);
  EXPECT_DOUBLE_EQ(s.train_percent, 83.69);
  EXPECT_DOUBLE_EQ(s.dev_percent, 9.93);
  EXPECT_DOUBLE_EQ(s.test_percent, 6.38);
  const SplitStats empty = split_stats({});
  EXPECT_EQ(empty.total, 0u);
  EXPECT_EQ(empty.train_percent, 0.0);
}

TEST(SplitStats, SyntheticFilesFollowTheGeneratorSplit) {
  const SyntheticCorpus corpus = generate_synthetic(SyntheticConfig{});
  const fs::path dir = scratch("split_files");
  write_synthetic(corpus, dir);
  std::map<std::string, std::size_t> counts;
  for (const char* f : {"train.json", "dev.json", "test.json"}) {
    counts[f] = nlohmann::json::parse(read_file(dir / f)).size();
  }
  EXPECT_EQ(counts["train.json"], 960u);
  EXPECT_EQ(counts["dev.json"], 120u);
  EXPECT_EQ(counts["test.json"], 120u);
  const SplitStats s = split_stats(corpus.examples);
  EXPECT_DOUBLE_EQ(s.train_percent, 80.0);
  EXPECT_DOUBLE_EQ(s.dev_percent, 10.0);
  EXPECT_DOUBLE_EQ(s.test_percent, 10.0);
}

TEST(Synthetic, ShapeOfTheDefaultCorpus) {
  const SyntheticCorpus corpus = generate_synthetic(SyntheticConfig{});
  EXPECT_EQ(corpus.examples.size(), 1200u);
  EXPECT_EQ(corpus.dictionary.size(), 10u);
  for (const auto& [sf, cands] : corpus.dictionary.entries()) {
    EXPECT_EQ(cands.size(), 3u);
    for (const Phrase& p : cands) {
      ASSERT_EQ(p.tokens.size(), sf.size());
      for (std::size_t k = 0; k < sf.size(); ++k) {
        EXPECT_EQ(p.tokens[k][0], static_cast<char>(std::tolower(sf[k])));
      }
    }
  }
  for (const auto& ex : corpus.examples) {
    EXPECT_EQ(std::count(ex.tokens.begin(), ex.tokens.end(), ex.short_form), 1);
    EXPECT_EQ(span_text(ex.tokens, ex.acronym_span), ex.short_form);
    ASSERT_TRUE(ex.labeled());
    EXPECT_EQ(corpus.dictionary.candidates(ex.short_form)[*ex.gold_index].text, *ex.gold_long_form);
  }
}

TEST(Synthetic, DeterministicFromSeed) {
  SyntheticConfig a;
  a.seed = 3;
  EXPECT_EQ(serialize_dataset(generate_synthetic(a).examples),
            serialize_dataset(generate_synthetic(a).examples));
  SyntheticConfig b = a;
  b.seed = 4;
  EXPECT_NE(serialize_dataset(generate_synthetic(a).examples),
            serialize_dataset(generate_synthetic(b).examples));
}

TEST(Synthetic, FullCueStrengthPutsACueInEverySentence) {
  SyntheticConfig config;
  config.cue_strength = 1.0;
  const SyntheticCorpus corpus = generate_synthetic(config);
  for (const auto& ex : corpus.examples) {
    const auto& cues = corpus.cues.at(ex.short_form)[*ex.gold_index];
    const bool found = std::any_of(ex.tokens.begin(), ex.tokens.end(), [&](const std::string& t) {
      return std::find(cues.begin(), cues.end(), t) != cues.end();
    });
    EXPECT_TRUE(found) << ex.id;
  }
}

TEST(Synthetic, ZeroCueStrengthLeavesContextUninformative) {
  SyntheticConfig config;
  config.cue_strength = 0.0;
  config.examples_per_sense = 200;
  const SyntheticCorpus corpus = generate_synthetic(config);
  // Token-vote classifier: each context token votes for the sense it was seen
  // with most often in training.
  std::map<std::string, std::map<std::string, std::map<std::size_t, int>>> counts;
  for (const auto& ex : corpus.split(Split::train)) {
    for (const auto& t : ex.tokens) ++counts[ex.short_form][t][*ex.gold_index];
  }
  std::size_t correct = 0, total = 0;
  for (Split s : {Split::dev, Split::test}) {
    for (const auto& ex : corpus.split(s)) {
      std::map<std::size_t, double> score;
      for (const auto& t : ex.tokens) {
        for (const auto& [sense, c] : counts[ex.short_form][t]) score[sense] += c;
      }
      std::size_t best = 0;
      double best_score = -1.0;
      for (const auto& [sense, v] : score) {
        if (v > best_score) best = sense, best_score = v;
      }
      correct += best == *ex.gold_index;
      ++total;
    }
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  EXPECT_NEAR(acc, 1.0 / 3.0, 0.06);
  for (const auto& ex : corpus.examples) {
    for (const auto& cues : corpus.cues.at(ex.short_form)) {
      for (const auto& c : cues) {
        EXPECT_EQ(std::count(ex.tokens.begin(), ex.tokens.end(), c), 0);
      }
    }
  }
}

TEST(Synthetic, LongFormRateSpellsOutTheGold) {
  SyntheticConfig config;
  config.long_form_rate = 1.0;
  config.num_acronyms = 3;
  const SyntheticCorpus corpus = generate_synthetic(config);
  for (const auto& ex : corpus.examples) {
    for (const auto& t : make_phrase(*ex.gold_long_form).tokens) {
      EXPECT_NE(std::find(ex.tokens.begin(), ex.tokens.end(), t), ex.tokens.end());
    }
  }
}

TEST(Synthetic, RejectsBadConfig) {
  SyntheticConfig c;
  c.num_acronyms = 0;
  EXPECT_THROW(generate_synthetic(c), ParameterError);
  c = SyntheticConfig{};
  c.cue_strength = 1.5;
  EXPECT_THROW(generate_synthetic(c), ParameterError);
}

TEST(Synthetic, TestFileIsUnlabeledWithSeparateGold) {
  const fs::path dir = scratch("test_file");
  const SyntheticCorpus corpus = generate_synthetic(SyntheticConfig{});
  write_synthetic(corpus, dir);
  const auto test = load_dataset(dir / "test.json", corpus.dictionary, Split::test);
  EXPECT_EQ(test.size(), 120u);
  for (const auto& ex : test) EXPECT_FALSE(ex.labeled());
  EXPECT_EQ(nlohmann::json::parse(read_file(dir / "test_gold.json")).size(), 120u);
}

}  // namespace
}  // namespace phrasecl
