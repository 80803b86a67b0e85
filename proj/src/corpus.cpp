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

#include "phrasecl/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phrasecl/errors.hpp"
#include "phrasecl/random.hpp"

namespace phrasecl {

using nlohmann::json;

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(lowercase(text.substr(start, i - start)));
  }
  return out;
}

Phrase make_phrase(std::string_view text) { return Phrase{std::string(text), tokenize(text)}; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

// ---- Dictionary ------------------------------------------------------------

void Dictionary::add(const std::string& short_form, const std::vector<std::string>& long_forms) {
  if (short_form.empty()) throw ValidationError("dictionary: empty short form");
  if (long_forms.empty()) {
    throw ValidationError("dictionary: short form '" + short_form + "' has no candidates");
  }
  if (entries_.count(short_form)) {
    throw ValidationError("dictionary: short form '" + short_form + "' listed twice");
  }
  std::vector<Phrase> phrases;
  for (const auto& lf : long_forms) {
    Phrase p = make_phrase(lf);
    if (p.tokens.empty()) {
      throw ValidationError("dictionary: empty candidate under '" + short_form + "'");
    }
    if (std::find(phrases.begin(), phrases.end(), p) != phrases.end()) {
      throw ValidationError("dictionary: duplicate candidate '" + lf + "' under '" +
                            short_form + "'");
    }
    phrases.push_back(std::move(p));
  }
  entries_.emplace(short_form, std::move(phrases));
}

const std::vector<Phrase>& Dictionary::candidates(const std::string& short_form) const {
  auto it = entries_.find(short_form);
  if (it == entries_.end()) throw LookupError("unknown short form '" + short_form + "'");
  return it->second;
}

std::optional<std::size_t> Dictionary::index_of(const std::string& short_form,
                                                std::string_view long_form) const {
  auto it = entries_.find(short_form);
  if (it == entries_.end()) return std::nullopt;
  const auto tokens = tokenize(long_form);
  for (std::size_t i = 0; i < it->second.size(); ++i) {
    if (it->second[i].tokens == tokens) return i;
  }
  return std::nullopt;
}

std::string Dictionary::serialize() const {
  json j = json::object();
  for (const auto& [sf, phrases] : entries_) {
    json arr = json::array();
    for (const auto& p : phrases) arr.push_back(p.text);
    j[sf] = std::move(arr);
  }
  return j.dump(2) + "\n";
}

Dictionary parse_dictionary(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("dictionary: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("dictionary: top level must be an object");
  Dictionary dict;
  for (const auto& [sf, value] : j.items()) {
    if (!value.is_array()) throw FormatError("dictionary: '" + sf + "' must map to an array");
    std::vector<std::string> lfs;
    for (const auto& lf : value) {
      if (!lf.is_string()) throw FormatError("dictionary: non-string candidate under '" + sf + "'");
      lfs.push_back(lf.get<std::string>());
    }
    dict.add(sf, lfs);
  }
  return dict;
}

Dictionary load_dictionary(const std::filesystem::path& path) {
  return parse_dictionary(read_file(path));
}

// ---- Dataset ---------------------------------------------------------------

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "dev") return Split::dev;
  if (name == "test") return Split::test;
  throw ParameterError("unknown split '" + std::string(name) + "'");
}

std::string span_text(const std::vector<std::string>& tokens, TokenSpan span) {
  std::string out;
  for (int i = span.start; i < span.end; ++i) {
    if (i > span.start) out += ' ';
    out += tokens[static_cast<std::size_t>(i)];
  }
  return out;
}

namespace {

AcronymExample parse_example(const json& item, const Dictionary& dict, Split split) {
  if (!item.is_object()) throw FormatError("dataset: entries must be objects");
  AcronymExample ex;
  ex.split = split;
  try {
    ex.id = item.at("id").get<std::string>();
    ex.tokens = item.at("tokens").get<std::vector<std::string>>();
    const json& acr = item.at("acronym");
    if (acr.is_number_integer()) {
      ex.acronym_span.start = acr.get<int>();
      ex.acronym_span.end = ex.acronym_span.start + 1;
    } else if (acr.is_array() && acr.size() == 2) {
      ex.acronym_span.start = acr[0].get<int>();
      ex.acronym_span.end = acr[1].get<int>();
    } else {
      throw FormatError("dataset: 'acronym' must be an integer or [start, end]");
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  const int n = static_cast<int>(ex.tokens.size());
  if (ex.acronym_span.start < 0 || ex.acronym_span.start >= ex.acronym_span.end ||
      ex.acronym_span.end > n) {
    throw ValidationError("example '" + ex.id + "': acronym span out of range");
  }
  ex.short_form = span_text(ex.tokens, ex.acronym_span);
  if (auto sf = item.find("short_form"); sf != item.end()) {
    if (!sf->is_string() || sf->get<std::string>() != ex.short_form) {
      throw ValidationError("example '" + ex.id + "': acronym span does not match short form");
    }
  }
  if (!dict.contains(ex.short_form)) {
    throw ValidationError("example '" + ex.id + "': short form '" + ex.short_form +
                          "' not in dictionary");
  }
  if (auto label = item.find("label"); label != item.end() && !label->is_null()) {
    if (!label->is_string()) throw FormatError("example '" + ex.id + "': label must be a string");
    const auto text = label->get<std::string>();
    const auto index = dict.index_of(ex.short_form, text);
    if (!index) {
      throw ValidationError("example '" + ex.id + "': label '" + text +
                            "' is not a candidate of '" + ex.short_form + "'");
    }
    ex.gold_index = *index;
    ex.gold_long_form = dict.candidates(ex.short_form)[*index].text;
  }
  return ex;
}

}  // namespace

std::vector<AcronymExample> parse_dataset(std::string_view json_text, const Dictionary& dict,
                                          Split split) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  if (!j.is_array()) throw FormatError("dataset: top level must be an array");
  std::vector<AcronymExample> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(parse_example(item, dict, split));
  return out;
}

std::vector<AcronymExample> load_dataset(const std::filesystem::path& path,
                                         const Dictionary& dict, Split split) {
  return parse_dataset(read_file(path), dict, split);
}

std::string serialize_dataset(const std::vector<AcronymExample>& examples) {
  json arr = json::array();
  for (const auto& ex : examples) {
    json item;
    item["id"] = ex.id;
    item["tokens"] = ex.tokens;
    if (ex.acronym_span.length() == 1) {
      item["acronym"] = ex.acronym_span.start;
    } else {
      item["acronym"] = {ex.acronym_span.start, ex.acronym_span.end};
    }
    if (ex.gold_long_form) item["label"] = *ex.gold_long_form;
    arr.push_back(std::move(item));
  }
  return arr.dump(2) + "\n";
}

AcronymExample truncate_example(const AcronymExample& ex, std::size_t max_length) {
  const std::size_t n = ex.tokens.size();
  if (n <= max_length) return ex;
  const auto span_len = static_cast<std::size_t>(ex.acronym_span.length());
  if (span_len > max_length) {
    throw ValidationError("example '" + ex.id + "': acronym span longer than max length");
  }
  const std::size_t left = (max_length - span_len) / 2;
  std::size_t start = static_cast<std::size_t>(ex.acronym_span.start) >= left
                          ? static_cast<std::size_t>(ex.acronym_span.start) - left
                          : 0;
  start = std::min(start, n - max_length);
  AcronymExample out = ex;
  out.tokens.assign(ex.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                    ex.tokens.begin() + static_cast<std::ptrdiff_t>(start + max_length));
  out.acronym_span.start -= static_cast<int>(start);
  out.acronym_span.end -= static_cast<int>(start);
  return out;
}

// ---- Vocabulary ------------------------------------------------------------

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> kTokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return kTokens;
}

Vocabulary::Vocabulary() {
  for (const auto& t : reserved_tokens()) {
    index_.emplace(t, static_cast<int>(tokens_.size()));
    tokens_.push_back(t);
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  const auto& reserved = reserved_tokens();
  if (tokens.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw ValidationError("vocabulary: reserved tokens missing or out of order");
  }
  Vocabulary v;
  for (std::size_t i = reserved.size(); i < tokens.size(); ++i) {
    if (v.index_.count(tokens[i])) throw ValidationError("vocabulary: duplicate token " + tokens[i]);
    v.index_.emplace(tokens[i], static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

int Vocabulary::id(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  if (auto it = index_.find(lowercase(token)); it != index_.end()) return it->second;
  return kUnk;
}

bool Vocabulary::contains(std::string_view token) const { return id(token) != kUnk; }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw IndexError("vocabulary: id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::add(std::string_view token) {
  std::string norm = lowercase(token);
  if (auto it = index_.find(norm); it != index_.end()) return it->second;
  const int id = size();
  index_.emplace(norm, id);
  tokens_.push_back(std::move(norm));
  return id;
}

Vocabulary build_vocabulary(const std::vector<AcronymExample>& examples, const Dictionary& dict,
                            std::size_t min_freq) {
  if (min_freq < 1) throw ParameterError("build_vocabulary: min_freq must be >= 1");
  if (examples.empty()) throw EmptyCorpusError("build_vocabulary: empty corpus");
  std::unordered_map<std::string, std::size_t> freq;
  std::vector<std::string> order;
  for (const auto& ex : examples) {
    for (const auto& tok : ex.tokens) {
      auto norm = lowercase(tok);
      if (freq[norm]++ == 0) order.push_back(std::move(norm));
    }
  }
  Vocabulary vocab;
  for (const auto& tok : order) {
    if (freq[tok] >= min_freq) vocab.add(tok);
  }
  for (const auto& [sf, phrases] : dict.entries()) {
    for (const auto& p : phrases) {
      for (const auto& tok : p.tokens) vocab.add(tok);
    }
  }
  return vocab;
}

// ---- Candidate sampling ----------------------------------------------------

CandidateSet sample_candidates(const AcronymExample& ex, const Dictionary& dict,
                               std::size_t ratio, std::uint64_t seed) {
  if (!ex.gold_index) {
    throw ValidationError("sample_candidates: example '" + ex.id + "' is unlabeled");
  }
  const auto& own = dict.candidates(ex.short_form);
  CandidateSet set;
  set.example_id = ex.id;
  set.ratio = ratio;
  set.positive = own[*ex.gold_index];

  Rng rng(derive_seed(seed, "sample_candidates"));
  std::vector<std::size_t> same;
  for (std::size_t i = 0; i < own.size(); ++i) {
    if (i != *ex.gold_index) same.push_back(i);
  }
  if (same.size() > ratio) {
    shuffle(same.begin(), same.end(), rng);
    same.resize(ratio);
    std::sort(same.begin(), same.end());
  }
  for (std::size_t i : same) set.negatives.push_back(own[i]);

  if (set.negatives.size() < ratio) {
    std::vector<const Phrase*> pool;
    for (const auto& [sf, phrases] : dict.entries()) {
      if (sf == ex.short_form) continue;
      for (const auto& p : phrases) {
        if (p == set.positive) continue;
        bool dup = std::find(set.negatives.begin(), set.negatives.end(), p) != set.negatives.end();
        for (const Phrase* q : pool) dup = dup || *q == p;
        if (!dup) pool.push_back(&p);
      }
    }
    shuffle(pool.begin(), pool.end(), rng);
    for (const Phrase* p : pool) {
      if (set.negatives.size() >= ratio) break;
      set.negatives.push_back(*p);
    }
  }
  set.exhausted = set.negatives.size() < ratio;
  return set;
}

// ---- Split statistics ------------------------------------------------------

SplitStats split_stats(const std::vector<AcronymExample>& examples) {
  SplitStats s;
  for (const auto& ex : examples) {
    switch (ex.split) {
      case Split::train: ++s.train; break;
      case Split::dev: ++s.dev; break;
      case Split::test: ++s.test; break;
    }
  }
  s.total = examples.size();
  if (s.total == 0) return s;
  auto pct = [&](std::size_t c) {
    return std::round(static_cast<double>(c) * 10000.0 / static_cast<double>(s.total)) / 100.0;
  };
  s.train_percent = pct(s.train);
  s.dev_percent = pct(s.dev);
  s.test_percent = pct(s.test);
  return s;
}

}  // namespace phrasecl
