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
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "phrasecl/corpus.hpp"
#include "phrasecl/encoder.hpp"
#include "phrasecl/evaluation.hpp"

namespace phrasecl {

// Projection used by the contrastive term and the linear classifier used by
// the two classification terms. Row-vector storage: z = ReLU(h * w1) * w2,
// so w1 is (2d x p) and w2 is (p x q).
struct ProjectionParams {
  ad::Tensor w1;
  ad::Tensor w2;
  ad::Tensor classifier_weight;  // 2d x 1
  ad::Tensor classifier_bias;    // 1 x 1

  static ProjectionParams initialize(int hidden_dim, int projection_dim, int output_dim,
                                     std::uint64_t seed);
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
};

struct DisambiguationModel {
  EncoderParams encoder;
  Vocabulary vocab;
  ProjectionParams head;

  // Encoder tensors, then head tensors.
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
};

// Fresh head on top of a (pre-trained) encoder. projection_dim = 0 means d.
DisambiguationModel make_model(EncoderParams encoder, Vocabulary vocab, std::uint64_t seed,
                               int projection_dim = 0);
void save_model(const std::filesystem::path& path, const DisambiguationModel& model,
                const nlohmann::json& extra = {});
// Throws ValidationError when missing, FormatError when corrupt.
DisambiguationModel load_model(const std::filesystem::path& path);

struct CandidateFeature {
  Vector h_x;
  Vector h_t;
  Vector h;  // [h_x ; h_t]
  bool positive = false;
};

// h_x: final state at the acronym slot of the unmasked sentence. h_t: final
// state at the slot when it holds the candidate's averaged embedding. Throws
// ValidationError when the candidate is not listed for the short form.
CandidateFeature candidate_feature(const AcronymExample& ex, const Phrase& candidate,
                                   const Dictionary& dict, const DisambiguationModel& model);

Vector project(const Vector& h, const ProjectionParams& params);
ad::Var project(ad::Var h_rows, const ProjectionParams& params);
double classifier_logit(const Vector& h, const ProjectionParams& params);
double classify(const Vector& h, const ProjectionParams& params);
// (rows x 1) logits.
ad::Var classifier_logits(ad::Var h_rows, const ProjectionParams& params);

double sigmoid(double x);

// (1 - lambda) / 2 * (ce_pos + ce_neg) + lambda * cl. Throws ParameterError
// for lambda outside [0, 1].
double combine_finetune_loss(double ce_pos, double ce_neg, double cl, double lambda);

// Features of one example on a tape: h_x (1 x d) and one [h_x ; h_t] row per
// dictionary candidate, in dictionary order.
struct ExampleFeatures {
  ad::Var h_x;
  ad::Var features;
  std::size_t gold = 0;
};

ExampleFeatures example_features(ad::Tape& tape, const AcronymExample& ex, const Dictionary& dict,
                                 const DisambiguationModel& model, Rng* dropout_rng = nullptr);

struct FinetuneTerms {
  ad::Var ce_pos;
  ad::Var ce_neg;
  ad::Var cl;
  ad::Var total;
  // Set when the batch has no negative candidate; ce_neg is then 0.
  bool no_negatives = false;
};

// Binary cross-entropy over the gold rows (ce_pos) and the other rows
// (ce_neg), plus a softmax contrastive term per example whose anchor is the
// projection of [h_x ; h_x] and whose positive is the gold row. Throws
// ParameterError for lambda outside [0, 1] or tau <= 0.
FinetuneTerms finetune_loss(std::span<const ExampleFeatures> examples,
                            const ProjectionParams& params, double lambda, double tau);

struct FinetuneLossBreakdown {
  double ce_pos = 0.0;
  double ce_neg = 0.0;
  double cl = 0.0;
  double total = 0.0;
  bool no_negatives = false;
};

// Value form over precomputed features: one (h_x, candidate rows, gold) per
// example.
struct FeatureGroup {
  Vector h_x;
  Matrix features;  // K x 2d
  std::size_t gold = 0;
};
FinetuneLossBreakdown finetune_loss(std::span<const FeatureGroup> groups,
                                    const ProjectionParams& params, double lambda, double tau);

struct ScoredCandidates {
  std::string example_id;
  std::vector<std::pair<std::string, double>> scores;  // dictionary order
  std::size_t predicted = 0;
  const std::string& label() const { return scores.at(predicted).first; }
};

// Throws LookupError for an unknown short form.
ScoredCandidates predict(const AcronymExample& ex, const Dictionary& dict,
                         const DisambiguationModel& model);

// Macro metrics of model predictions against the examples' gold labels.
MetricReport evaluate_model(const DisambiguationModel& model,
                            const std::vector<AcronymExample>& examples, const Dictionary& dict);

struct FinetuneConfig {
  int epochs = 15;
  std::size_t batch_size = 32;
  double lr_start = 1e-4;
  double lr_end = 1e-5;
  int warmup_epochs = 1;
  double lambda = 0.5;
  double tau = 0.02;
  double weight_decay = 0.01;
  int projection_dim = 0;  // 0 = hidden size
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static FinetuneConfig from_json(const nlohmann::json& j);
};

struct FinetuneEpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double dev_macro_f1 = 0.0;
  double lr = 0.0;  // rate of the epoch's last step
  nlohmann::json to_json() const;
};

struct FinetuneResult {
  DisambiguationModel model;  // best dev epoch (last epoch without dev data)
  std::vector<FinetuneEpochRecord> epochs;
  std::vector<double> step_losses;
  double initial_dev_f1 = 0.0;
  int best_epoch = 0;  // 0 = the initial model
};

// `initial` must carry a head (see make_model). Training examples must be
// labeled.
FinetuneResult run_finetuning(const DisambiguationModel& initial,
                              const std::vector<AcronymExample>& train,
                              const std::vector<AcronymExample>& dev, const Dictionary& dict,
                              const FinetuneConfig& config);

}  // namespace phrasecl
