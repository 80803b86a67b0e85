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
#include <set>

#include <nlohmann/json.hpp>

#include "phrasecl/corpus.hpp"
#include "phrasecl/errors.hpp"
#include "phrasecl/random.hpp"

namespace phrasecl {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

bool is_vowel(char c) { return kVowels.find(c) != std::string_view::npos; }

// Pronounceable lowercase pseudo-word, optionally with a fixed first letter.
// Unique against `used`.
std::string fresh_word(Rng& rng, std::set<std::string>& used, char initial = 0) {
  for (;;) {
    std::string w;
    if (initial != 0) {
      w += initial;
      if (!is_vowel(initial)) w += kVowels[uniform_index(rng, kVowels.size())];
    }
    const std::size_t syllables = 2 + uniform_index(rng, 2);
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kConsonants[uniform_index(rng, kConsonants.size())];
      w += kVowels[uniform_index(rng, kVowels.size())];
    }
    if (used.insert(w).second) return w;
  }
}

void check_config(const SyntheticConfig& c) {
  if (c.num_acronyms < 1 || c.senses_per_acronym < 1 || c.examples_per_sense < 1 ||
      c.cue_slots < 1 || c.cue_words_per_sense < 1 || c.filler_vocabulary < 1) {
    throw ParameterError("synthetic: all counts must be >= 1");
  }
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(c.cue_strength) || !prob(c.long_form_rate) || !prob(c.dev_fraction) ||
      !prob(c.test_fraction) || c.dev_fraction + c.test_fraction > 1.0) {
    throw ParameterError("synthetic: probabilities and split fractions must lie in [0, 1]");
  }
  if (c.min_filler > c.max_filler) throw ParameterError("synthetic: min_filler > max_filler");
  if (c.num_acronyms > 26 * 26 * 26) throw ParameterError("synthetic: too many acronyms");
}

}  // namespace

std::vector<AcronymExample> SyntheticCorpus::split(Split which) const {
  std::vector<AcronymExample> out;
  for (const auto& ex : examples) {
    if (ex.split == which) out.push_back(ex);
  }
  return out;
}

SyntheticCorpus generate_synthetic(const SyntheticConfig& config) {
  check_config(config);
  Rng rng(derive_seed(config.seed, "synthetic"));
  std::set<std::string> used;

  std::vector<std::string> filler;
  for (std::size_t i = 0; i < config.filler_vocabulary; ++i) filler.push_back(fresh_word(rng, used));

  SyntheticCorpus corpus;
  std::set<std::string> short_forms;
  struct Sense {
    std::string short_form;
    std::size_t index;
    std::string long_form;
  };
  std::vector<Sense> senses;
  for (std::size_t a = 0; a < config.num_acronyms; ++a) {
    std::string sf;
    do {
      sf.clear();
      for (int k = 0; k < 3; ++k) sf += static_cast<char>('A' + uniform_index(rng, 26));
    } while (!short_forms.insert(sf).second);

    std::vector<std::string> long_forms;
    std::vector<std::vector<std::string>> cues;
    for (std::size_t s = 0; s < config.senses_per_acronym; ++s) {
      std::string lf;
      for (char letter : sf) {
        if (!lf.empty()) lf += ' ';
        lf += fresh_word(rng, used, static_cast<char>(letter - 'A' + 'a'));
      }
      long_forms.push_back(lf);
      std::vector<std::string> sense_cues;
      for (std::size_t c = 0; c < config.cue_words_per_sense; ++c) {
        sense_cues.push_back(fresh_word(rng, used));
      }
      cues.push_back(std::move(sense_cues));
      senses.push_back({sf, s, lf});
    }
    corpus.dictionary.add(sf, long_forms);
    corpus.cues.emplace(sf, std::move(cues));
  }

  const auto n_dev = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.examples_per_sense) * config.dev_fraction));
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(config.examples_per_sense) * config.test_fraction));
  const std::size_t n_train = config.examples_per_sense - std::min(config.examples_per_sense,
                                                                   n_dev + n_test);

  std::vector<AcronymExample> by_split[3];
  std::size_t serial = 0;
  for (const Sense& sense : senses) {
    const auto& sense_cues = corpus.cues.at(sense.short_form)[sense.index];
    const Phrase phrase = make_phrase(sense.long_form);
    for (std::size_t e = 0; e < config.examples_per_sense; ++e) {
      const std::size_t len =
          config.min_filler + uniform_index(rng, config.max_filler - config.min_filler + 1);
      std::vector<std::string> tokens;
      for (std::size_t i = 0; i < len; ++i) tokens.push_back(filler[uniform_index(rng, filler.size())]);
      // Inserted items are kept as whole units so the acronym position can be
      // recovered after all insertions.
      std::vector<std::vector<std::string>> units;
      for (auto& t : tokens) units.push_back({std::move(t)});
      auto insert_unit = [&](std::vector<std::string> unit) {
        const auto pos = uniform_index(rng, units.size() + 1);
        units.insert(units.begin() + static_cast<std::ptrdiff_t>(pos), std::move(unit));
        return pos;
      };
      for (std::size_t c = 0; c < config.cue_slots; ++c) {
        if (uniform01(rng) < config.cue_strength) {
          insert_unit({sense_cues[uniform_index(rng, sense_cues.size())]});
        }
      }
      if (config.long_form_rate > 0.0 && uniform01(rng) < config.long_form_rate) {
        insert_unit(phrase.tokens);
      }
      const auto acronym_unit = insert_unit({"\x01"});

      AcronymExample ex;
      for (std::size_t u = 0; u < units.size(); ++u) {
        if (u == acronym_unit) {
          ex.acronym_span = {static_cast<int>(ex.tokens.size()),
                             static_cast<int>(ex.tokens.size()) + 1};
          ex.tokens.push_back(sense.short_form);
        } else {
          for (auto& t : units[u]) ex.tokens.push_back(std::move(t));
        }
      }
      char id[32];
      std::snprintf(id, sizeof(id), "syn-%05zu", serial++);
      ex.id = id;
      ex.short_form = sense.short_form;
      ex.gold_long_form = sense.long_form;
      ex.gold_index = sense.index;
      ex.split = e < n_train ? Split::train : (e < n_train + n_dev ? Split::dev : Split::test);
      by_split[static_cast<int>(ex.split)].push_back(std::move(ex));
    }
  }
  for (auto& part : by_split) {
    shuffle(part.begin(), part.end(), rng);
    for (auto& ex : part) corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "dictionary.json", corpus.dictionary.serialize());
  write_file(out_dir / "train.json", serialize_dataset(corpus.split(Split::train)));
  write_file(out_dir / "dev.json", serialize_dataset(corpus.split(Split::dev)));
  auto test = corpus.split(Split::test);
  nlohmann::json gold = nlohmann::json::array();
  for (auto& ex : test) {
    gold.push_back({{"id", ex.id}, {"label", *ex.gold_long_form}});
    ex.gold_long_form.reset();
    ex.gold_index.reset();
  }
  write_file(out_dir / "test.json", serialize_dataset(test));
  write_file(out_dir / "test_gold.json", gold.dump(2) + "\n");
}

}  // namespace phrasecl
