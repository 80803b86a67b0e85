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

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phrasecl/autograd.hpp"
#include "phrasecl/random.hpp"

namespace phrasecl {

using ad::Matrix;
using ad::Vector;

struct EncoderConfig {
  int vocab_size = 0;
  int hidden_dim = 64;
  int num_layers = 2;
  int num_heads = 4;
  int ffn_dim = 128;
  int max_sequence_length = 300;
  double dropout_rate = 0.1;

  // Throws ParameterError on a violated invariant.
  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

struct LayerParams {
  ad::Tensor ln1_gamma, ln1_beta;
  ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  ad::Tensor ln2_gamma, ln2_beta;
  ad::Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// All trainable tensors of the encoder. Value type: copying yields an
// independent model (the teacher is a copy of the student's initialization).
// The [MASK] embedding is row Vocabulary::kMask of token_embedding.
struct EncoderParams {
  EncoderConfig config;
  ad::Tensor token_embedding;     // V x d
  ad::Tensor position_embedding;  // max_len x d
  ad::Tensor segment_embedding;   // 2 x d
  std::vector<LayerParams> layers;
  ad::Tensor mlm_weight;  // d x V
  ad::Tensor mlm_bias;    // 1 x V
  ad::Tensor nsp_weight;  // d x 1
  ad::Tensor nsp_bias;    // 1 x 1

  // Gaussian(0, 0.02) weights, zero biases, unit layer-norm gains.
  static EncoderParams initialize(const EncoderConfig& config, std::uint64_t seed);

  // Stable order; names are unique.
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
};

// FNV-1a over every tensor's name and raw bytes, in tensors() order.
std::uint64_t params_hash(const EncoderParams& params);

// A position whose input embedding is the mean of several token rows.
struct PhraseSlot {
  int position = 0;
  std::vector<int> token_ids;
};

struct SequenceInput {
  std::vector<int> token_ids;
  // Empty means all zeros.
  std::vector<int> segment_ids;
  std::vector<PhraseSlot> phrase_slots;
};

struct EmbeddedSequence {
  ad::Var embeddings;  // n x d
  std::vector<char> attention_mask;  // 1 = attend, 0 = padding
  std::vector<int> segment_ids;
  std::vector<int> phrase_slots;
};

// Token (or phrase-mean) + position + segment embeddings. Throws IndexError
// for out-of-range ids or slot positions, ParameterError for an empty or
// over-long sequence.
EmbeddedSequence embed_sequence(ad::Tape& tape, const EncoderParams& params,
                                const SequenceInput& input);

// Pre-LN transformer stack; with zero layers it returns the embeddings.
// Dropout is active iff dropout_rng is non-null. Throws NumericalError on a
// non-finite output.
ad::Var encode(const EmbeddedSequence& input, const EncoderParams& params,
               Rng* dropout_rng = nullptr);

// (|positions| x V) logits, rows in the order of positions.
ad::Var mlm_logits(ad::Var hidden, std::span<const int> positions, const EncoderParams& params);
// 1 x 1 logit read from row 0 ([CLS]).
ad::Var nsp_logit(ad::Var hidden, const EncoderParams& params);

struct CosineResult {
  double value = 0.0;
  // Set when either vector is zero; value is then 0.
  bool degenerate = false;
};

CosineResult cosine_similarity(std::span<const double> u, std::span<const double> v);
CosineResult cosine_similarity(const Vector& u, const Vector& v);

// Eval-mode forward on a fresh non-recording tape.
Matrix encode_eval(const EncoderParams& params, const SequenceInput& input);

}  // namespace phrasecl
