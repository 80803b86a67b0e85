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

#include "phrasecl/sequence.hpp"

#include <algorithm>

#include "phrasecl/errors.hpp"

namespace phrasecl {

SentenceLayout layout_sentence(const AcronymExample& ex, const Vocabulary& vocab,
                               const NspPair* pair, int max_length) {
  if (max_length < (pair ? 4 : 3)) throw ParameterError("layout_sentence: max_length too small");
  const int n = static_cast<int>(ex.tokens.size());
  const TokenSpan span = ex.acronym_span;
  if (span.start < 0 || span.start >= span.end || span.end > n) {
    throw ValidationError("example '" + ex.id + "': acronym span out of range");
  }

  // Collapsed sentence: tokens before the span, the slot, tokens after.
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < span.start; ++i) ids.push_back(vocab.id(ex.tokens[static_cast<std::size_t>(i)]));
  const int slot = static_cast<int>(ids.size());
  ids.push_back(Vocabulary::kMask);
  for (int i = span.end; i < n; ++i) ids.push_back(vocab.id(ex.tokens[static_cast<std::size_t>(i)]));

  const int a_cap = max_length - (pair ? 3 : 2);
  int a_begin = 0;
  int a_len = static_cast<int>(ids.size());
  if (a_len > a_cap) {
    a_begin = std::clamp(slot - (a_cap - 1) / 2, 0, a_len - a_cap);
    a_len = a_cap;
  }
  int b_len = 0;
  if (pair) b_len = std::min(static_cast<int>(pair->tokens.size()), max_length - 3 - a_len);

  SentenceLayout out;
  auto& tok = out.base.token_ids;
  auto& seg = out.base.segment_ids;
  tok.push_back(Vocabulary::kCls);
  seg.push_back(0);
  tok.insert(tok.end(), ids.begin() + a_begin, ids.begin() + a_begin + a_len);
  seg.insert(seg.end(), static_cast<std::size_t>(a_len), 0);
  tok.push_back(Vocabulary::kSep);
  seg.push_back(0);
  if (pair) {
    for (int i = 0; i < b_len; ++i) {
      tok.push_back(vocab.id(pair->tokens[static_cast<std::size_t>(i)]));
      seg.push_back(1);
    }
    tok.push_back(Vocabulary::kSep);
    seg.push_back(1);
  }
  out.sentence_begin = 1;
  out.sentence_length = a_len;
  out.slot_position = 1 + slot - a_begin;
  for (int i = span.start; i < span.end; ++i) {
    const int id = vocab.id(ex.tokens[static_cast<std::size_t>(i)]);
    if (id != Vocabulary::kUnk) out.span_ids.push_back(id);
  }
  return out;
}

std::vector<int> phrase_ids(const Phrase& phrase, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& t : phrase.tokens) {
    const int id = vocab.id(t);
    if (id != Vocabulary::kUnk) ids.push_back(id);
  }
  if (ids.empty()) {
    throw ValidationError("phrase '" + phrase.text + "' has no in-vocabulary tokens");
  }
  return ids;
}

SequenceInput with_phrase_slot(const SentenceLayout& layout, std::vector<int> phrase_token_ids) {
  SequenceInput in = layout.base;
  in.phrase_slots.push_back({layout.slot_position, std::move(phrase_token_ids)});
  return in;
}

}  // namespace phrasecl
