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
#include "phrasecl/encoder.hpp"

namespace phrasecl {

// Second segment for next-sentence prediction. label 1 = B follows A.
struct NspPair {
  std::vector<std::string> tokens;
  int label = 1;
};

// "[CLS] A [SEP]" or "[CLS] A [SEP] B [SEP]" with the acronym span of A
// collapsed to one slot. Student, teacher and fine-tuning inputs are all
// built from the same layout, so they are position-aligned.
struct SentenceLayout {
  SequenceInput base;  // slot position holds [MASK]
  int slot_position = 0;
  int sentence_begin = 1;
  int sentence_length = 0;  // collapsed length of A
  // In-vocabulary ids of the acronym span tokens (may be empty).
  std::vector<int> span_ids;
};

// A keeps priority over B when the sequence must be truncated; A is cut to a
// window centred on the acronym.
SentenceLayout layout_sentence(const AcronymExample& ex, const Vocabulary& vocab,
                               const NspPair* pair, int max_length);

// In-vocabulary ids of a phrase. Throws ValidationError when none of its
// tokens is in the vocabulary.
std::vector<int> phrase_ids(const Phrase& phrase, const Vocabulary& vocab);

// The layout with its slot replaced by a phrase-averaged slot.
SequenceInput with_phrase_slot(const SentenceLayout& layout, std::vector<int> phrase_token_ids);

}  // namespace phrasecl
