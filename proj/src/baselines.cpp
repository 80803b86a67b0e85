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

#include "phrasecl/baselines.hpp"

#include <algorithm>
#include <map>

#include "phrasecl/errors.hpp"

namespace phrasecl {

RuleScore schwartz_similarity(const std::vector<std::string>& sentence_tokens,
                              const Phrase& candidate) {
  if (candidate.tokens.empty()) throw ParameterError("schwartz_similarity: empty candidate");
  std::map<std::string, std::size_t> available;
  for (const auto& t : sentence_tokens) ++available[lowercase(t)];
  RuleScore score;
  score.candidate = candidate.text;
  for (const auto& t : candidate.tokens) {
    auto it = available.find(lowercase(t));
    if (it != available.end() && it->second > 0) {
      --it->second;
      ++score.overlap;
    }
  }
  score.normalized =
      static_cast<double>(score.overlap) / static_cast<double>(candidate.tokens.size());
  return score;
}

std::vector<RuleScore> rule_based_scores(const AcronymExample& ex, const Dictionary& dict) {
  std::vector<RuleScore> out;
  for (const auto& cand : dict.candidates(ex.short_form)) {
    out.push_back(schwartz_similarity(ex.tokens, cand));
  }
  return out;
}

const Phrase& rule_based_predict(const AcronymExample& ex, const Dictionary& dict) {
  const auto& cands = dict.candidates(ex.short_form);
  const auto scores = rule_based_scores(ex, dict);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i].normalized > scores[best].normalized) best = i;
  }
  return cands[best];
}

}  // namespace phrasecl
