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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace phrasecl {

// Whitespace split plus lowercasing. This is the only tokenizer.
std::vector<std::string> tokenize(std::string_view text);
std::string lowercase(std::string_view text);

// A long-form candidate: the text as written in the dictionary and its
// normalized tokens.
struct Phrase {
  std::string text;
  std::vector<std::string> tokens;

  friend bool operator==(const Phrase& a, const Phrase& b) { return a.tokens == b.tokens; }
};

Phrase make_phrase(std::string_view text);

// Short form -> ordered candidate long forms. Keys iterate in sorted order;
// candidate order is the order of the source file.
class Dictionary {
 public:
  using Entries = std::map<std::string, std::vector<Phrase>>;

  // Throws ValidationError on an empty candidate list or a duplicate
  // (after normalization) candidate.
  void add(const std::string& short_form, const std::vector<std::string>& long_forms);

  bool contains(const std::string& short_form) const { return entries_.count(short_form) != 0; }
  // Throws LookupError for an unknown short form.
  const std::vector<Phrase>& candidates(const std::string& short_form) const;
  std::size_t candidate_count(const std::string& short_form) const {
    return candidates(short_form).size();
  }
  // Position of long_form (normalized match) among the candidates.
  std::optional<std::size_t> index_of(const std::string& short_form,
                                      std::string_view long_form) const;

  const Entries& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  // Canonical JSON text.
  std::string serialize() const;

 private:
  Entries entries_;
};

Dictionary parse_dictionary(std::string_view json_text);
// Throws FormatError when the file is unreadable or malformed.
Dictionary load_dictionary(const std::filesystem::path& path);

enum class Split { train, dev, test };
const char* split_name(Split split);
Split parse_split(std::string_view name);

// Half-open token range [start, end).
struct TokenSpan {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct AcronymExample {
  std::string id;
  std::vector<std::string> tokens;
  TokenSpan acronym_span;
  std::string short_form;
  std::optional<std::string> gold_long_form;
  // Index of the gold long form in the dictionary's candidate list.
  std::optional<std::size_t> gold_index;
  Split split = Split::train;

  std::size_t length() const { return tokens.size(); }
  bool labeled() const { return gold_index.has_value(); }
};

// Tokens of the span joined by single spaces.
std::string span_text(const std::vector<std::string>& tokens, TokenSpan span);

// Parses and validates a dataset. Errors: FormatError on malformed JSON;
// ValidationError (naming the example id) on a bad span, unknown short form
// or a gold label outside the dictionary.
std::vector<AcronymExample> parse_dataset(std::string_view json_text, const Dictionary& dict,
                                          Split split);
std::vector<AcronymExample> load_dataset(const std::filesystem::path& path,
                                         const Dictionary& dict, Split split);
// Canonical JSON text; labels are written only when present.
std::string serialize_dataset(const std::vector<AcronymExample>& examples);

// Keeps a window of at most max_length tokens centred on the acronym span.
// Throws ValidationError when the span alone exceeds max_length.
AcronymExample truncate_example(const AcronymExample& ex, std::size_t max_length);

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;
  static constexpr int kNumReserved = 5;
  static const std::vector<std::string>& reserved_tokens();

  Vocabulary();
  // Rebuilds from an id-ordered token list (checkpoint restore). Throws
  // ValidationError unless it starts with the reserved tokens and is
  // duplicate free.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  // Lowercases; unknown tokens map to kUnk.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Appends a (normalized) token if absent; returns its id.
  int add(std::string_view token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Corpus tokens with frequency >= min_freq (first-occurrence order), then
// dictionary phrase tokens, after the reserved tokens. Throws
// EmptyCorpusError on an empty corpus and ParameterError for min_freq < 1.
Vocabulary build_vocabulary(const std::vector<AcronymExample>& examples, const Dictionary& dict,
                            std::size_t min_freq);

struct CandidateSet {
  std::string example_id;
  Phrase positive;
  std::vector<Phrase> negatives;
  std::size_t ratio = 2;
  // Set when fewer than `ratio` negatives could be drawn.
  bool exhausted = false;
};

// Negatives come from the example's own short form first, then (when that
// pool is too small) from other short forms' candidates. Pure function of
// its arguments. Throws ValidationError for an unlabeled example.
CandidateSet sample_candidates(const AcronymExample& ex, const Dictionary& dict,
                               std::size_t ratio, std::uint64_t seed);

struct SplitStats {
  std::size_t train = 0;
  std::size_t dev = 0;
  std::size_t test = 0;
  std::size_t total = 0;
  // Percent of total, rounded to two decimals.
  double train_percent = 0.0;
  double dev_percent = 0.0;
  double test_percent = 0.0;
};

SplitStats split_stats(const std::vector<AcronymExample>& examples);

// ---- synthetic corpus ------------------------------------------------------

struct SyntheticConfig {
  std::size_t num_acronyms = 10;
  std::size_t senses_per_acronym = 3;
  std::size_t examples_per_sense = 40;
  // Probability that each cue slot of a sentence holds a cue word of its sense.
  double cue_strength = 0.9;
  std::uint64_t seed = 7;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::size_t cue_slots = 2;
  std::size_t cue_words_per_sense = 3;
  // Probability that the gold long form is spelled out in the sentence.
  double long_form_rate = 0.0;
  std::size_t min_filler = 6;
  std::size_t max_filler = 12;
  std::size_t filler_vocabulary = 80;
};

struct SyntheticCorpus {
  Dictionary dictionary;
  std::vector<AcronymExample> examples;  // all splits, all labeled
  // Cue words per short form, per sense index.
  std::map<std::string, std::vector<std::vector<std::string>>> cues;

  std::vector<AcronymExample> split(Split which) const;
};

// Throws ParameterError when a count is zero or a probability is outside
// [0, 1].
SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

// Writes dictionary.json, train.json, dev.json, test.json (unlabeled) and
// test_gold.json (prediction format) into out_dir.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir);

// ---- shared file helpers ---------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace phrasecl
