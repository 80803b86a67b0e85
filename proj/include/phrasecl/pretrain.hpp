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
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "phrasecl/corpus.hpp"
#include "phrasecl/encoder.hpp"
#include "phrasecl/optim.hpp"
#include "phrasecl/sequence.hpp"

namespace phrasecl {

// BERT-style corruption of the non-acronym tokens.
struct MlmPolicy {
  bool enabled = true;
  double rate = 0.15;
  double mask_fraction = 0.8;
  double random_fraction = 0.1;
};

// Student input: the acronym span collapsed into one [MASK] slot, plus MLM
// corruption elsewhere.
struct MaskedSequence {
  SequenceInput input;
  int mask_position = 0;  // absolute index of the acronym slot
  int sentence_begin = 1;
  int sentence_length = 0;
  std::vector<int> mlm_positions;  // ascending, never mask_position
  std::vector<int> mlm_targets;    // original ids at mlm_positions
  std::optional<int> nsp_label;

  // The collapsed sentence A as fed to the model.
  std::vector<int> sentence_ids() const;
};

// Deterministic in `seed`. max_length bounds the whole sequence.
MaskedSequence build_student_input(const AcronymExample& ex, const Vocabulary& vocab,
                                   const MlmPolicy& policy, std::uint64_t seed,
                                   const NspPair* pair = nullptr, int max_length = 300);

// Teacher inputs: the unmasked sentence with the acronym replaced by a
// phrase-averaged slot of each candidate, aligned with the student input
// built from the same example and pair.
struct TeacherInputs {
  SequenceInput positive;
  std::vector<SequenceInput> negatives;
  int mask_position = 0;
};

// Throws ValidationError for a candidate without in-vocabulary tokens.
TeacherInputs build_teacher_inputs(const AcronymExample& ex, const CandidateSet& candidates,
                                   const Vocabulary& vocab, const NspPair* pair = nullptr,
                                   int max_length = 300);

// -log( exp(S(s, t_i)/tau) / Z ), Z summing exp(S(s, .)/tau) over every
// teacher row and every negative representation; S is cosine similarity.
// `student_row` is the student's hidden state at the acronym position.
// Throws ParameterError for tau <= 0 or an out-of-range index.
ad::Var contrastive_pretrain_loss(ad::Var student_row, const Matrix& teacher_rows,
                                  const Matrix& negative_reprs, int index, double tau);
// Value form over whole hidden-state matrices; h̃_i is student_h.row(index).
double contrastive_pretrain_loss(const Matrix& student_h, const Matrix& teacher_pos_h,
                                 const std::vector<Vector>& negative_reprs, int index,
                                 double tau);

double mlm_loss(const Matrix& logits, std::span<const int> target_ids);
double nsp_loss(double logit, int label);

struct PretrainLossBreakdown {
  double l_cl = 0.0;
  double l_mlm = 0.0;
  double l_nsp = 0.0;
  double total = 0.0;
};

// l_cl + l_mlm + l_nsp, accumulated in that order. Throws NumericalError for
// a non-finite part.
double total_pretrain_loss(const PretrainLossBreakdown& parts);

struct PretrainConfig {
  std::int64_t steps_phase1 = 2000;
  std::int64_t steps_phase2 = 2000;
  std::size_t batch_size = 32;
  double tau = 0.02;
  double lr = 1e-4;
  double warmup_fraction = 0.10;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  std::size_t negatives = 2;
  // When false, phase 1 also trains MLM + NSP only (ablation).
  bool contrastive = true;
  MlmPolicy mlm;
  EncoderConfig encoder;  // vocab_size is taken from the vocabulary

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults.
  static PretrainConfig from_json(const nlohmann::json& j);
};

struct PretrainLogRecord {
  std::int64_t step = 0;
  int phase = 1;
  PretrainLossBreakdown loss;
  double lr = 0.0;

  nlohmann::json to_json() const;
};

// Training state: trainable student, frozen teacher (a copy of the student's
// initial parameters), optimizer moments, step counter. The teacher's
// representations are cached per (example, candidate) since it never
// changes.
class Pretrainer {
 public:
  // `corpus` must be labeled. `init` defaults to a fresh initialization from
  // config.seed.
  Pretrainer(PretrainConfig config, std::vector<AcronymExample> corpus, Dictionary dict,
             Vocabulary vocab, const EncoderParams* init = nullptr);

  // One optimizer step on the given corpus indices. contrastive = false
  // drops the contrastive term. Throws NumericalError naming the tensor with
  // a non-finite gradient.
  PretrainLossBreakdown step(std::span<const std::size_t> batch, bool contrastive);
  // Next batch of the seeded epoch-wise shuffle.
  std::vector<std::size_t> next_batch();

  double learning_rate(std::int64_t step) const;
  std::int64_t step_count() const { return step_; }
  std::int64_t total_steps() const { return config_.steps_phase1 + config_.steps_phase2; }

  const EncoderParams& student() const { return student_; }
  const EncoderParams& teacher() const { return teacher_; }
  std::uint64_t initial_teacher_hash() const { return teacher_hash_; }
  const PretrainConfig& config() const { return config_; }
  const std::vector<NspPair>& nsp_pairs() const { return pairs_; }

 private:
  struct TeacherEntry {
    Matrix sentence_rows;  // teacher states over sentence A
    Vector slot;           // teacher state at the slot
  };
  const TeacherEntry& teacher_repr(std::size_t example, const Phrase& candidate);

  PretrainConfig config_;
  std::vector<AcronymExample> corpus_;
  Dictionary dict_;
  Vocabulary vocab_;
  EncoderParams student_;
  EncoderParams teacher_;
  std::uint64_t teacher_hash_ = 0;
  AdamW optimizer_;
  GradientBuffer grads_;
  std::int64_t step_ = 0;
  std::vector<NspPair> pairs_;
  std::map<std::pair<std::size_t, std::string>, TeacherEntry> teacher_cache_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
};

struct PretrainResult {
  EncoderParams student;
  EncoderParams initial;
  std::vector<PretrainLogRecord> log;
  nlohmann::json hyperparameters;
  std::uint64_t teacher_hash_before = 0;
  std::uint64_t teacher_hash_after = 0;
};

// Phase 1 optimizes the full objective (or MLM + NSP when
// config.contrastive is false) for steps_phase1 steps, phase 2 MLM + NSP for
// steps_phase2 steps, under one warmup/decay schedule.
PretrainResult run_pretraining(const PretrainConfig& config,
                               const std::vector<AcronymExample>& corpus, const Dictionary& dict,
                               const Vocabulary& vocab, const EncoderParams* init = nullptr);

// Mean over examples of S(student mask state, teacher gold slot) minus the
// mean S(student mask state, teacher negative slots).
double separation_statistic(const EncoderParams& student, const EncoderParams& teacher,
                            const std::vector<AcronymExample>& examples, const Dictionary& dict,
                            const Vocabulary& vocab, std::size_t negatives, std::uint64_t seed);

}  // namespace phrasecl
