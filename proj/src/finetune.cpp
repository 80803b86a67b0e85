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

#include "phrasecl/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phrasecl/checkpoint.hpp"
#include "phrasecl/errors.hpp"
#include "phrasecl/optim.hpp"
#include "phrasecl/sequence.hpp"

namespace phrasecl {

namespace {

ad::Tensor gaussian(const std::string& name, int rows, int cols, Rng& rng, double sd) {
  ad::Tensor t{name, Matrix(rows, cols), true};
  for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) t.value(r, c) = sd * standard_normal(rng);
  }
  return t;
}

void check_lambda_tau(double lambda, double tau) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ParameterError("finetune: lambda must lie in [0, 1]");
  }
  if (!(tau > 0.0)) throw ParameterError("finetune: tau must be positive");
}

ad::Var mean_of(const std::vector<ad::Var>& parts) {
  ad::Var acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = ad::add(acc, parts[i]);
  return ad::scale(acc, 1.0 / static_cast<double>(parts.size()));
}

std::vector<int> span_slot_ids(const SentenceLayout& layout) {
  // An acronym made only of unknown tokens still needs a non-empty bag.
  return layout.span_ids.empty() ? std::vector<int>{Vocabulary::kUnk} : layout.span_ids;
}

}  // namespace

// ---- parameters -----------------------------------------------------------

ProjectionParams ProjectionParams::initialize(int hidden_dim, int projection_dim, int output_dim,
                                              std::uint64_t seed) {
  if (hidden_dim <= 0 || projection_dim <= 0 || output_dim <= 0) {
    throw ParameterError("projection: dimensions must be positive");
  }
  Rng rng(derive_seed(seed, "head.init"));
  ProjectionParams p;
  // Fan-in scaling keeps |z| comparable to |h|; with tiny projections the
  // cosine gradients (which scale with 1 / |z|) swamp the classifier terms.
  p.w1 = gaussian("head.w1", 2 * hidden_dim, projection_dim, rng,
                  std::sqrt(2.0 / (2.0 * hidden_dim)));
  p.w2 = gaussian("head.w2", projection_dim, output_dim, rng,
                  std::sqrt(1.0 / projection_dim));
  p.classifier_weight = gaussian("head.classifier.weight", 2 * hidden_dim, 1, rng, 0.02);
  p.classifier_bias = ad::Tensor{"head.classifier.bias", Matrix::Zero(1, 1), false};
  return p;
}

std::vector<ad::Tensor*> ProjectionParams::tensors() {
  return {&w1, &w2, &classifier_weight, &classifier_bias};
}

std::vector<const ad::Tensor*> ProjectionParams::tensors() const {
  return {&w1, &w2, &classifier_weight, &classifier_bias};
}

std::vector<ad::Tensor*> DisambiguationModel::tensors() {
  auto out = encoder.tensors();
  for (ad::Tensor* t : head.tensors()) out.push_back(t);
  return out;
}

std::vector<const ad::Tensor*> DisambiguationModel::tensors() const {
  auto out = encoder.tensors();
  for (const ad::Tensor* t : head.tensors()) out.push_back(t);
  return out;
}

DisambiguationModel make_model(EncoderParams encoder, Vocabulary vocab, std::uint64_t seed,
                               int projection_dim) {
  const int d = encoder.config.hidden_dim;
  const int p = projection_dim > 0 ? projection_dim : d;
  DisambiguationModel model{std::move(encoder), std::move(vocab), {}};
  model.head = ProjectionParams::initialize(d, p, p, seed);
  return model;
}

void save_model(const std::filesystem::path& path, const DisambiguationModel& model,
                const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_null() ? nlohmann::json::object() : extra;
  meta["encoder"] = model.encoder.config.to_json();
  meta["vocabulary"] = model.vocab.tokens();
  meta["head"] = {{"projection_dim", model.head.w1.value.cols()},
                  {"output_dim", model.head.w2.value.cols()}};
  const auto tensors = model.tensors();
  save_archive(path, meta, tensors);
}

DisambiguationModel load_model(const std::filesystem::path& path) {
  const Archive archive = load_archive(path);
  if (!archive.meta.contains("head")) {
    throw FormatError(path.string() + ": not a fine-tuned model (no head)");
  }
  EncoderCheckpoint ckpt = encoder_from_archive(archive);
  const int p = archive.meta["head"].value("projection_dim", 0);
  const int q = archive.meta["head"].value("output_dim", 0);
  if (p <= 0 || q <= 0) throw FormatError(path.string() + ": bad head dimensions");
  DisambiguationModel model;
  model.encoder = std::move(ckpt.params);
  model.vocab = std::move(ckpt.vocab);
  model.head = ProjectionParams::initialize(model.encoder.config.hidden_dim, p, q, 0);
  for (ad::Tensor* t : model.head.tensors()) {
    t->value = archive.tensor(t->name, t->value.rows(), t->value.cols());
  }
  return model;
}

// ---- features -------------------------------------------------------------

ExampleFeatures example_features(ad::Tape& tape, const AcronymExample& ex, const Dictionary& dict,
                                 const DisambiguationModel& model, Rng* dropout_rng) {
  const auto& cands = dict.candidates(ex.short_form);
  const SentenceLayout layout =
      layout_sentence(ex, model.vocab, nullptr, model.encoder.config.max_sequence_length);
  const int slot = layout.slot_position;

  ExampleFeatures out;
  out.gold = ex.gold_index.value_or(0);
  ad::Var hx_states = encode(
      embed_sequence(tape, model.encoder, with_phrase_slot(layout, span_slot_ids(layout))),
      model.encoder, dropout_rng);
  out.h_x = ad::row(hx_states, slot);

  std::vector<ad::Var> rows;
  rows.reserve(cands.size());
  for (const Phrase& cand : cands) {
    ad::Var states = encode(embed_sequence(tape, model.encoder,
                                           with_phrase_slot(layout, phrase_ids(cand, model.vocab))),
                            model.encoder, dropout_rng);
    rows.push_back(ad::concat_cols(out.h_x, ad::row(states, slot)));
  }
  out.features = ad::stack_rows(rows);
  return out;
}

CandidateFeature candidate_feature(const AcronymExample& ex, const Phrase& candidate,
                                   const Dictionary& dict, const DisambiguationModel& model) {
  const auto& cands = dict.candidates(ex.short_form);
  const auto it = std::find(cands.begin(), cands.end(), candidate);
  if (it == cands.end()) {
    throw ValidationError("candidate '" + candidate.text + "' is not listed for " +
                          ex.short_form);
  }
  const SentenceLayout layout =
      layout_sentence(ex, model.vocab, nullptr, model.encoder.config.max_sequence_length);
  const Matrix hx =
      encode_eval(model.encoder, with_phrase_slot(layout, span_slot_ids(layout)));
  const Matrix ht =
      encode_eval(model.encoder, with_phrase_slot(layout, phrase_ids(candidate, model.vocab)));

  CandidateFeature f;
  f.h_x = hx.row(layout.slot_position).transpose();
  f.h_t = ht.row(layout.slot_position).transpose();
  f.h.resize(f.h_x.size() + f.h_t.size());
  f.h << f.h_x, f.h_t;
  f.positive = ex.gold_index.has_value() &&
               *ex.gold_index == static_cast<std::size_t>(it - cands.begin());
  return f;
}

// ---- head -----------------------------------------------------------------

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector project(const Vector& h, const ProjectionParams& params) {
  const Matrix hidden = (h.transpose() * params.w1.value).cwiseMax(0.0);
  return (hidden * params.w2.value).transpose();
}

ad::Var project(ad::Var h_rows, const ProjectionParams& params) {
  ad::Tape& tape = *h_rows.tape();
  ad::Var hidden = ad::relu(ad::matmul(h_rows, tape.param(params.w1)));
  return ad::matmul(hidden, tape.param(params.w2));
}

double classifier_logit(const Vector& h, const ProjectionParams& params) {
  return (h.transpose() * params.classifier_weight.value)(0, 0) +
         params.classifier_bias.value(0, 0);
}

double classify(const Vector& h, const ProjectionParams& params) {
  return sigmoid(classifier_logit(h, params));
}

ad::Var classifier_logits(ad::Var h_rows, const ProjectionParams& params) {
  ad::Tape& tape = *h_rows.tape();
  return ad::add_row(ad::matmul(h_rows, tape.param(params.classifier_weight)),
                     tape.param(params.classifier_bias));
}

// ---- loss -----------------------------------------------------------------

double combine_finetune_loss(double ce_pos, double ce_neg, double cl, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ParameterError("finetune: lambda must lie in [0, 1]");
  }
  return (1.0 - lambda) / 2.0 * (ce_pos + ce_neg) + lambda * cl;
}

FinetuneTerms finetune_loss(std::span<const ExampleFeatures> examples,
                            const ProjectionParams& params, double lambda, double tau) {
  check_lambda_tau(lambda, tau);
  if (examples.empty()) throw ParameterError("finetune_loss: no examples");
  ad::Tape& tape = *examples.front().features.tape();

  std::vector<ad::Var> pos_logits, neg_logits, cl_terms;
  for (const ExampleFeatures& ex : examples) {
    const int k = static_cast<int>(ex.features.rows());
    const int gold = static_cast<int>(ex.gold);
    if (gold < 0 || gold >= k) throw ParameterError("finetune_loss: gold index out of range");
    ad::Var logits = classifier_logits(ex.features, params);
    pos_logits.push_back(ad::row(logits, gold));
    std::vector<int> others;
    for (int c = 0; c < k; ++c) {
      if (c != gold) others.push_back(c);
    }
    if (!others.empty()) neg_logits.push_back(ad::select_rows(logits, others));

    ad::Var anchor = project(ad::concat_cols(ex.h_x, ex.h_x), params);
    ad::Var z = project(ex.features, params);
    cl_terms.push_back(ad::nll_softmax(ad::cosine_rows(anchor, z), gold, 1.0 / tau));
  }

  FinetuneTerms terms;
  const std::vector<double> ones(pos_logits.size(), 1.0);
  terms.ce_pos = ad::bce_with_logits(ad::stack_rows(pos_logits), ones);
  if (neg_logits.empty()) {
    terms.no_negatives = true;
    terms.ce_neg = tape.constant(Matrix::Zero(1, 1));
  } else {
    ad::Var stacked = ad::stack_rows(neg_logits);
    const std::vector<double> zeros(static_cast<std::size_t>(stacked.rows()), 0.0);
    terms.ce_neg = ad::bce_with_logits(stacked, zeros);
  }
  terms.cl = mean_of(cl_terms);
  terms.total = ad::add(ad::scale(ad::add(terms.ce_pos, terms.ce_neg), (1.0 - lambda) / 2.0),
                        ad::scale(terms.cl, lambda));
  return terms;
}

FinetuneLossBreakdown finetune_loss(std::span<const FeatureGroup> groups,
                                    const ProjectionParams& params, double lambda, double tau) {
  ad::Tape tape(false);
  std::vector<ExampleFeatures> feats;
  for (const FeatureGroup& g : groups) {
    ExampleFeatures f;
    f.h_x = tape.constant(g.h_x.transpose());
    f.features = tape.constant(g.features);
    f.gold = g.gold;
    feats.push_back(f);
  }
  if (feats.empty()) throw ParameterError("finetune_loss: no examples");
  const FinetuneTerms t = finetune_loss(feats, params, lambda, tau);
  FinetuneLossBreakdown out;
  out.ce_pos = t.ce_pos.scalar();
  out.ce_neg = t.ce_neg.scalar();
  out.cl = t.cl.scalar();
  out.total = t.total.scalar();
  out.no_negatives = t.no_negatives;
  return out;
}

// ---- inference ------------------------------------------------------------

ScoredCandidates predict(const AcronymExample& ex, const Dictionary& dict,
                         const DisambiguationModel& model) {
  const auto& cands = dict.candidates(ex.short_form);
  ad::Tape tape(false);
  const ExampleFeatures f = example_features(tape, ex, dict, model);
  const Matrix logits = classifier_logits(f.features, model.head).value();

  ScoredCandidates out;
  out.example_id = ex.id;
  std::vector<double> probs;
  for (std::size_t c = 0; c < cands.size(); ++c) {
    const double p = sigmoid(logits(static_cast<Eigen::Index>(c), 0));
    probs.push_back(p);
    out.scores.emplace_back(cands[c].text, p);
  }
  // Ranking on the logits keeps ties exact even where the sigmoid saturates.
  std::vector<double> raw(logits.data(), logits.data() + logits.size());
  out.predicted = argmax_first(raw);
  return out;
}

MetricReport evaluate_model(const DisambiguationModel& model,
                            const std::vector<AcronymExample>& examples, const Dictionary& dict) {
  LabelMap pred, gold;
  for (const AcronymExample& ex : examples) {
    if (!ex.gold_long_form) throw ValidationError("evaluate: example " + ex.id + " is unlabeled");
    pred[ex.id] = predict(ex, dict, model).label();
    gold[ex.id] = dict.candidates(ex.short_form)[*ex.gold_index].text;
  }
  return macro_metrics(pred, gold);
}

// ---- training -------------------------------------------------------------

void FinetuneConfig::validate() const {
  if (epochs < 0) throw ParameterError("finetune: epochs must be >= 0");
  if (batch_size == 0) throw ParameterError("finetune: batch_size must be positive");
  if (!(lr_start > 0.0) || !(lr_end >= 0.0)) throw ParameterError("finetune: bad learning rate");
  if (warmup_epochs < 0) throw ParameterError("finetune: warmup_epochs must be >= 0");
  if (!(weight_decay >= 0.0)) throw ParameterError("finetune: weight_decay must be >= 0");
  if (projection_dim < 0) throw ParameterError("finetune: projection_dim must be >= 0");
  check_lambda_tau(lambda, tau);
}

nlohmann::json FinetuneConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"lr_start", lr_start},
          {"lr_end", lr_end},
          {"warmup_epochs", warmup_epochs},
          {"lambda", lambda},
          {"tau", tau},
          {"weight_decay", weight_decay},
          {"projection_dim", projection_dim},
          {"seed", seed}};
}

FinetuneConfig FinetuneConfig::from_json(const nlohmann::json& j) {
  FinetuneConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr_start = j.value("lr_start", c.lr_start);
  c.lr_end = j.value("lr_end", c.lr_end);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  c.lambda = j.value("lambda", c.lambda);
  c.tau = j.value("tau", c.tau);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.projection_dim = j.value("projection_dim", c.projection_dim);
  c.seed = j.value("seed", c.seed);
  return c;
}

nlohmann::json FinetuneEpochRecord::to_json() const {
  return {{"epoch", epoch}, {"mean_loss", mean_loss}, {"dev_macro_f1", dev_macro_f1}, {"lr", lr}};
}

FinetuneResult run_finetuning(const DisambiguationModel& initial,
                              const std::vector<AcronymExample>& train,
                              const std::vector<AcronymExample>& dev, const Dictionary& dict,
                              const FinetuneConfig& config) {
  config.validate();
  for (const AcronymExample& ex : train) {
    if (!ex.labeled()) throw ValidationError("finetune: training example " + ex.id + " is unlabeled");
  }
  FinetuneResult result;
  result.model = initial;
  if (!dev.empty()) result.initial_dev_f1 = evaluate_model(initial, dev, dict).macro_f1;
  if (config.epochs == 0 || train.empty()) return result;

  DisambiguationModel current = initial;
  GradientBuffer grads(current.tensors());
  AdamW optimizer(AdamWConfig{0.9, 0.999, 1e-8, config.weight_decay});
  Rng* dropout = nullptr;
  Rng dropout_rng;

  const std::size_t n = train.size();
  const std::int64_t per_epoch =
      static_cast<std::int64_t>((n + config.batch_size - 1) / config.batch_size);
  const std::int64_t total = per_epoch * config.epochs;
  const std::int64_t warmup = per_epoch * config.warmup_epochs;
  double best_f1 = result.initial_dev_f1;
  std::int64_t step = 0;
  std::vector<std::size_t> order(n);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, "finetune.shuffle", static_cast<std::uint64_t>(epoch)));
    shuffle(order.begin(), order.end(), shuffle_rng);

    FinetuneEpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size, ++step) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      ad::Tape tape;
      dropout_rng.seed(derive_seed(config.seed, "finetune.dropout", static_cast<std::uint64_t>(step)));
      dropout = current.encoder.config.dropout_rate > 0.0 ? &dropout_rng : nullptr;
      std::vector<ExampleFeatures> feats;
      for (std::size_t i = begin; i < end; ++i) {
        feats.push_back(example_features(tape, train[order[i]], dict, current, dropout));
      }
      const FinetuneTerms terms = finetune_loss(feats, current.head, config.lambda, config.tau);
      const double loss = terms.total.scalar();
      if (!std::isfinite(loss)) throw NumericalError("finetune: non-finite loss");
      tape.backward(terms.total);
      grads.zero();
      grads.add(tape);
      grads.check_finite();
      rec.lr = warmup_anneal(step, total, warmup, config.lr_start, config.lr_end);
      optimizer.step(grads, rec.lr);
      for (const ad::Tensor* t : current.tensors()) {
        if (!t->value.allFinite()) throw NumericalError("non-finite parameter " + t->name);
      }
      result.step_losses.push_back(loss);
      loss_sum += loss;
    }
    rec.mean_loss = loss_sum / static_cast<double>(per_epoch);
    if (!dev.empty()) {
      rec.dev_macro_f1 = evaluate_model(current, dev, dict).macro_f1;
      if (rec.dev_macro_f1 > best_f1) {
        best_f1 = rec.dev_macro_f1;
        result.best_epoch = epoch;
        result.model = current;
      }
    }
    result.epochs.push_back(rec);
  }
  if (dev.empty()) {
    result.model = current;
    result.best_epoch = config.epochs;
  }
  return result;
}

}  // namespace phrasecl
