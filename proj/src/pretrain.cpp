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

#include "phrasecl/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phrasecl/errors.hpp"

namespace phrasecl {

std::vector<int> MaskedSequence::sentence_ids() const {
  const auto begin = input.token_ids.begin() + sentence_begin;
  return {begin, begin + sentence_length};
}

MaskedSequence build_student_input(const AcronymExample& ex, const Vocabulary& vocab,
                                   const MlmPolicy& policy, std::uint64_t seed,
                                   const NspPair* pair, int max_length) {
  const SentenceLayout layout = layout_sentence(ex, vocab, pair, max_length);
  MaskedSequence out;
  out.input = layout.base;
  out.mask_position = layout.slot_position;
  out.sentence_begin = layout.sentence_begin;
  out.sentence_length = layout.sentence_length;
  if (pair) out.nsp_label = pair->label;

  if (!policy.enabled || policy.rate <= 0.0) return out;
  auto& ids = out.input.token_ids;
  std::vector<int> eligible;
  for (int p = 0; p < static_cast<int>(ids.size()); ++p) {
    const int id = ids[static_cast<std::size_t>(p)];
    if (p == out.mask_position || id == Vocabulary::kCls || id == Vocabulary::kSep ||
        id == Vocabulary::kPad) {
      continue;
    }
    eligible.push_back(p);
  }
  if (eligible.empty()) return out;
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(policy.rate * static_cast<double>(eligible.size()))),
      1, eligible.size());
  Rng rng(derive_seed(seed, "mlm"));
  shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(count);
  std::sort(eligible.begin(), eligible.end());
  for (int p : eligible) {
    int& id = ids[static_cast<std::size_t>(p)];
    out.mlm_positions.push_back(p);
    out.mlm_targets.push_back(id);
    const double r = uniform01(rng);
    if (r < policy.mask_fraction) {
      id = Vocabulary::kMask;
    } else if (r < policy.mask_fraction + policy.random_fraction &&
               vocab.size() > Vocabulary::kNumReserved) {
      id = Vocabulary::kNumReserved +
           static_cast<int>(uniform_index(
               rng, static_cast<std::uint64_t>(vocab.size() - Vocabulary::kNumReserved)));
    }
  }
  return out;
}

TeacherInputs build_teacher_inputs(const AcronymExample& ex, const CandidateSet& candidates,
                                   const Vocabulary& vocab, const NspPair* pair,
                                   int max_length) {
  const SentenceLayout layout = layout_sentence(ex, vocab, pair, max_length);
  TeacherInputs out;
  out.mask_position = layout.slot_position;
  out.positive = with_phrase_slot(layout, phrase_ids(candidates.positive, vocab));
  for (const Phrase& neg : candidates.negatives) {
    out.negatives.push_back(with_phrase_slot(layout, phrase_ids(neg, vocab)));
  }
  return out;
}

ad::Var contrastive_pretrain_loss(ad::Var student_row, const Matrix& teacher_rows,
                                  const Matrix& negative_reprs, int index, double tau) {
  if (!(tau > 0.0)) throw ParameterError("contrastive loss: tau must be > 0");
  if (index < 0 || index >= teacher_rows.rows()) {
    throw ParameterError("contrastive loss: acronym index out of range");
  }
  if (negative_reprs.rows() > 0 && negative_reprs.cols() != teacher_rows.cols()) {
    throw ParameterError("contrastive loss: negative width mismatch");
  }
  Matrix all(teacher_rows.rows() + negative_reprs.rows(), teacher_rows.cols());
  all.topRows(teacher_rows.rows()) = teacher_rows;
  if (negative_reprs.rows() > 0) all.bottomRows(negative_reprs.rows()) = negative_reprs;
  ad::Tape& tape = *student_row.tape();
  ad::Var sims = ad::cosine_rows(student_row, tape.constant(std::move(all)));
  return ad::nll_softmax(sims, index, 1.0 / tau);
}

double contrastive_pretrain_loss(const Matrix& student_h, const Matrix& teacher_pos_h,
                                 const std::vector<Vector>& negative_reprs, int index,
                                 double tau) {
  if (student_h.rows() != teacher_pos_h.rows()) {
    throw ParameterError("contrastive loss: student and teacher lengths differ");
  }
  if (index < 0 || index >= student_h.rows()) {
    throw ParameterError("contrastive loss: acronym index out of range");
  }
  Matrix negs(static_cast<Eigen::Index>(negative_reprs.size()), student_h.cols());
  for (std::size_t m = 0; m < negative_reprs.size(); ++m) {
    negs.row(static_cast<Eigen::Index>(m)) = negative_reprs[m].transpose();
  }
  ad::Tape tape(false);
  ad::Var s = tape.constant(student_h.row(index));
  return contrastive_pretrain_loss(s, teacher_pos_h, negs, index, tau).scalar();
}

double mlm_loss(const Matrix& logits, std::span<const int> target_ids) {
  ad::Tape tape(false);
  return ad::cross_entropy(tape.constant(logits), target_ids).scalar();
}

double nsp_loss(double logit, int label) {
  if (label != 0 && label != 1) throw ParameterError("nsp_loss: label must be 0 or 1");
  ad::Tape tape(false);
  const double y[1] = {static_cast<double>(label)};
  return ad::bce_with_logits(tape.constant(Matrix::Constant(1, 1, logit)), y).scalar();
}

double total_pretrain_loss(const PretrainLossBreakdown& parts) {
  if (!std::isfinite(parts.l_cl) || !std::isfinite(parts.l_mlm) || !std::isfinite(parts.l_nsp)) {
    throw NumericalError("pre-training loss has a non-finite part");
  }
  return parts.l_cl + parts.l_mlm + parts.l_nsp;
}

// ---- config ----------------------------------------------------------------

void PretrainConfig::validate() const {
  if (steps_phase1 < 0 || steps_phase2 < 0) throw ParameterError("pretrain: negative step count");
  if (batch_size < 1) throw ParameterError("pretrain: batch_size must be >= 1");
  if (!(tau > 0.0)) throw ParameterError("pretrain: tau must be > 0");
  if (!(lr >= 0.0)) throw ParameterError("pretrain: lr must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
    throw ParameterError("pretrain: warmup_fraction must lie in [0, 1]");
  }
  if (!(weight_decay >= 0.0)) throw ParameterError("pretrain: weight_decay must be >= 0");
  if (!(mlm.rate >= 0.0 && mlm.rate <= 1.0 && mlm.mask_fraction >= 0.0 &&
        mlm.random_fraction >= 0.0 && mlm.mask_fraction + mlm.random_fraction <= 1.0)) {
    throw ParameterError("pretrain: MLM rates must lie in [0, 1]");
  }
}

nlohmann::json PretrainConfig::to_json() const {
  nlohmann::json enc = encoder.to_json();
  enc.erase("vocab_size");
  return {{"steps_phase1", steps_phase1},
          {"steps_phase2", steps_phase2},
          {"batch_size", batch_size},
          {"tau", tau},
          {"lr", lr},
          {"warmup_fraction", warmup_fraction},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"negatives", negatives},
          {"contrastive", contrastive},
          {"mlm",
           {{"enabled", mlm.enabled},
            {"rate", mlm.rate},
            {"mask_fraction", mlm.mask_fraction},
            {"random_fraction", mlm.random_fraction}}},
          {"encoder", enc}};
}

PretrainConfig PretrainConfig::from_json(const nlohmann::json& j) {
  PretrainConfig c;
  try {
    c.steps_phase1 = j.value("steps_phase1", c.steps_phase1);
    c.steps_phase2 = j.value("steps_phase2", c.steps_phase2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.tau = j.value("tau", c.tau);
    c.lr = j.value("lr", c.lr);
    c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.seed = j.value("seed", c.seed);
    c.negatives = j.value("negatives", c.negatives);
    c.contrastive = j.value("contrastive", c.contrastive);
    if (auto m = j.find("mlm"); m != j.end()) {
      c.mlm.enabled = m->value("enabled", c.mlm.enabled);
      c.mlm.rate = m->value("rate", c.mlm.rate);
      c.mlm.mask_fraction = m->value("mask_fraction", c.mlm.mask_fraction);
      c.mlm.random_fraction = m->value("random_fraction", c.mlm.random_fraction);
    }
    if (auto e = j.find("encoder"); e != j.end()) c.encoder = EncoderConfig::from_json(*e);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("pretrain config: ") + e.what());
  }
  return c;
}

nlohmann::json PretrainLogRecord::to_json() const {
  return {{"step", step},           {"phase", phase},     {"l_cl", loss.l_cl},
          {"l_mlm", loss.l_mlm},    {"l_nsp", loss.l_nsp}, {"total", loss.total},
          {"lr", lr}};
}

// ---- Pretrainer ------------------------------------------------------------

namespace {

PretrainConfig with_vocab(PretrainConfig config, const Vocabulary& vocab) {
  config.validate();
  config.encoder.vocab_size = vocab.size();
  config.encoder.validate();
  return config;
}

EncoderParams initial_student(const PretrainConfig& config, const EncoderParams* init) {
  if (init == nullptr) return EncoderParams::initialize(config.encoder, config.seed);
  if (init->config.vocab_size != config.encoder.vocab_size) {
    throw ParameterError("pretrain: initial checkpoint vocabulary size mismatch");
  }
  return *init;
}

}  // namespace

Pretrainer::Pretrainer(PretrainConfig config, std::vector<AcronymExample> corpus, Dictionary dict,
                       Vocabulary vocab, const EncoderParams* init)
    : config_(with_vocab(std::move(config), vocab)),
      corpus_(std::move(corpus)),
      dict_(std::move(dict)),
      vocab_(std::move(vocab)),
      student_(initial_student(config_, init)),
      teacher_(student_),
      teacher_hash_(params_hash(teacher_)),
      optimizer_(AdamWConfig{.weight_decay = config_.weight_decay}),
      grads_(student_.tensors()) {
  if (corpus_.empty()) throw EmptyCorpusError("pretrain: empty corpus");
  // The step loop reads the architecture from the student, which may come
  // from a checkpoint.
  config_.encoder = student_.config;
  for (const auto& ex : corpus_) {
    if (!ex.labeled()) {
      throw ValidationError("pretrain: example '" + ex.id + "' has no gold long form");
    }
  }
  Rng rng(derive_seed(config_.seed, "nsp"));
  const std::size_t n = corpus_.size();
  for (std::size_t k = 0; k < n; ++k) {
    NspPair pair;
    const bool has_next = k + 1 < n;
    if (has_next && (n < 3 || uniform01(rng) < 0.5)) {
      pair.tokens = corpus_[k + 1].tokens;
      pair.label = 1;
    } else if (n >= 3) {
      std::size_t j;
      do {
        j = uniform_index(rng, n);
      } while (j == k || j == k + 1);
      pair.tokens = corpus_[j].tokens;
      pair.label = 0;
    } else {
      pair.label = 0;
    }
    pairs_.push_back(std::move(pair));
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

double Pretrainer::learning_rate(std::int64_t step) const {
  return warmup_linear_decay(step, total_steps(), config_.warmup_fraction, config_.lr);
}

std::vector<std::size_t> Pretrainer::next_batch() {
  const std::size_t n = corpus_.size();
  const std::size_t bs = std::min(config_.batch_size, n);
  if (cursor_ == 0 || cursor_ + bs > n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    Rng rng(derive_seed(config_.seed, "batches", epoch_++));
    shuffle(order_.begin(), order_.end(), rng);
    cursor_ = 0;
  }
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + bs));
  cursor_ += bs;
  return batch;
}

const Pretrainer::TeacherEntry& Pretrainer::teacher_repr(std::size_t example,
                                                         const Phrase& candidate) {
  auto key = std::make_pair(example, candidate.text);
  if (auto it = teacher_cache_.find(key); it != teacher_cache_.end()) return it->second;
  const SentenceLayout layout = layout_sentence(corpus_[example], vocab_, &pairs_[example],
                                                config_.encoder.max_sequence_length);
  const Matrix h = encode_eval(teacher_, with_phrase_slot(layout, phrase_ids(candidate, vocab_)));
  TeacherEntry entry;
  entry.sentence_rows = h.middleRows(layout.sentence_begin, layout.sentence_length);
  entry.slot = h.row(layout.slot_position).transpose();
  return teacher_cache_.emplace(std::move(key), std::move(entry)).first->second;
}

PretrainLossBreakdown Pretrainer::step(std::span<const std::size_t> batch, bool contrastive) {
  if (batch.empty()) throw ParameterError("pretrain_step: empty batch");
  ad::Tape tape;
  Rng mlm_rng(derive_seed(config_.seed, "mlm", static_cast<std::uint64_t>(step_)));
  Rng dropout_rng(derive_seed(config_.seed, "dropout", static_cast<std::uint64_t>(step_)));
  Rng* dropout = config_.encoder.dropout_rate > 0.0 ? &dropout_rng : nullptr;

  std::vector<ad::Var> cl, mlm, nsp;
  for (std::size_t slot = 0; slot < batch.size(); ++slot) {
    const std::size_t idx = batch[slot];
    const AcronymExample& ex = corpus_.at(idx);
    const NspPair& pair = pairs_[idx];
    const MaskedSequence ms = build_student_input(ex, vocab_, config_.mlm, mlm_rng(), &pair,
                                                  config_.encoder.max_sequence_length);
    ad::Var h = encode(embed_sequence(tape, student_, ms.input), student_, dropout);

    if (contrastive) {
      const CandidateSet cands = sample_candidates(
          ex, dict_, config_.negatives,
          derive_seed(config_.seed, "negatives",
                      static_cast<std::uint64_t>(step_) * batch.size() + slot));
      const Matrix pos = teacher_repr(idx, cands.positive).sentence_rows;
      Matrix negs(static_cast<Eigen::Index>(cands.negatives.size()), student_.config.hidden_dim);
      for (std::size_t m = 0; m < cands.negatives.size(); ++m) {
        negs.row(static_cast<Eigen::Index>(m)) = teacher_repr(idx, cands.negatives[m]).slot;
      }
      cl.push_back(contrastive_pretrain_loss(ad::row(h, ms.mask_position), pos, negs,
                                             ms.mask_position - ms.sentence_begin, config_.tau));
    }
    mlm.push_back(ad::cross_entropy(mlm_logits(h, ms.mlm_positions, student_), ms.mlm_targets));
    const double label[1] = {static_cast<double>(*ms.nsp_label)};
    nsp.push_back(ad::bce_with_logits(nsp_logit(h, student_), label));
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  auto mean = [&](const std::vector<ad::Var>& parts) {
    ad::Var acc = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) acc = ad::add(acc, parts[i]);
    return ad::scale(acc, inv);
  };
  ad::Var l_mlm = mean(mlm);
  ad::Var l_nsp = mean(nsp);
  ad::Var total = l_mlm;
  PretrainLossBreakdown parts;
  if (contrastive) {
    ad::Var l_cl = mean(cl);
    parts.l_cl = l_cl.scalar();
    total = ad::add(l_cl, l_mlm);
  }
  total = ad::add(total, l_nsp);
  parts.l_mlm = l_mlm.scalar();
  parts.l_nsp = l_nsp.scalar();
  parts.total = total_pretrain_loss(parts);

  tape.backward(total);
  grads_.zero();
  grads_.add(tape);
  grads_.check_finite();
  optimizer_.step(grads_, learning_rate(step_));
  for (const ad::Tensor* t : student_.tensors()) {
    if (!t->value.allFinite()) throw NumericalError("non-finite parameter " + t->name);
  }
  ++step_;
  return parts;
}

PretrainResult run_pretraining(const PretrainConfig& config,
                               const std::vector<AcronymExample>& corpus, const Dictionary& dict,
                               const Vocabulary& vocab, const EncoderParams* init) {
  Pretrainer trainer(config, corpus, dict, vocab, init);
  PretrainResult result;
  result.initial = trainer.teacher();
  result.hyperparameters = trainer.config().to_json();
  result.hyperparameters["vocab_size"] = vocab.size();
  result.teacher_hash_before = trainer.initial_teacher_hash();
  const std::int64_t total = trainer.total_steps();
  while (trainer.step_count() < total) {
    const std::int64_t s = trainer.step_count();
    const int phase = s < config.steps_phase1 ? 1 : 2;
    const bool contrastive = phase == 1 && config.contrastive;
    PretrainLogRecord rec;
    rec.step = s;
    rec.phase = phase;
    rec.lr = trainer.learning_rate(s);
    const auto batch = trainer.next_batch();
    rec.loss = trainer.step(batch, contrastive);
    result.log.push_back(rec);
  }
  result.teacher_hash_after = params_hash(trainer.teacher());
  result.student = trainer.student();
  return result;
}

double separation_statistic(const EncoderParams& student, const EncoderParams& teacher,
                            const std::vector<AcronymExample>& examples, const Dictionary& dict,
                            const Vocabulary& vocab, std::size_t negatives, std::uint64_t seed) {
  const int max_len = student.config.max_sequence_length;
  const MlmPolicy no_mlm{.enabled = false};
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    const AcronymExample& ex = examples[k];
    if (!ex.labeled()) continue;
    const CandidateSet cands =
        sample_candidates(ex, dict, negatives, derive_seed(seed, "separation", k));
    if (cands.negatives.empty()) continue;
    const MaskedSequence ms = build_student_input(ex, vocab, no_mlm, 0, nullptr, max_len);
    const Vector s = encode_eval(student, ms.input).row(ms.mask_position).transpose();
    const TeacherInputs ti = build_teacher_inputs(ex, cands, vocab, nullptr, max_len);
    const Vector pos = encode_eval(teacher, ti.positive).row(ti.mask_position).transpose();
    double neg = 0.0;
    for (const auto& in : ti.negatives) {
      neg += cosine_similarity(s, Vector(encode_eval(teacher, in).row(ti.mask_position).transpose()))
                 .value;
    }
    neg /= static_cast<double>(ti.negatives.size());
    sum += cosine_similarity(s, pos).value - neg;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace phrasecl
