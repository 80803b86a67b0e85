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

#include <string>
#include <vector>

#include "phrasecl/corpus.hpp"

namespace phrasecl {

struct RuleScore {
  std::string candidate;
  std::size_t overlap = 0;   // candidate tokens found in the sentence
  double normalized = 0.0;   // overlap / candidate length
};

// Case-folded multiset intersection of sentence and candidate tokens.
RuleScore schwartz_similarity(const std::vector<std::string>& sentence_tokens,
                              const Phrase& candidate);

// Candidate with the highest normalized overlap; earlier candidates win ties.
// Throws LookupError for an unknown short form.
const Phrase& rule_based_predict(const AcronymExample& ex, const Dictionary& dict);

// Normalized scores of every candidate, in dictionary order.
std::vector<RuleScore> rule_based_scores(const AcronymExample& ex, const Dictionary& dict);

}  // namespace phrasecl
