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

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace phrasecl {

struct ClassScores {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
};

// Macro precision/recall are arithmetic means over classes; macro F1 is the
// harmonic mean of those two means (not the mean of per-class F1 scores).
struct MetricReport {
  std::map<std::string, ClassScores> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_classes = 0;

  nlohmann::json to_json() const;
  // Human-readable table: per-class rows and a macro summary line.
  std::string table() const;
};

// 2PR / (P + R), 0 when P + R = 0.
double harmonic_f1(double precision, double recall);

using LabelMap = std::map<std::string, std::string>;  // example id -> label

// Classes default to the set of gold labels. A class with no predictions (or
// no gold examples) scores 0 on the undefined ratio. Throws ValidationError
// listing gold ids without a prediction.
MetricReport macro_metrics(const LabelMap& predictions, const LabelMap& gold,
                           const std::optional<std::set<std::string>>& classes = std::nullopt);

// Candidate probabilities of one example in candidate order.
using CandidateProbs = std::vector<std::pair<std::string, double>>;
using ProbabilityTable = std::map<std::string, CandidateProbs>;

// fused(c) = sum_k w_k p_k(c) / sum_k w_k. Throws ValidationError when tables
// disagree on ids or candidate lists, ParameterError for negative weights,
// all-zero weights or a count mismatch.
ProbabilityTable fuse_probabilities(std::span<const ProbabilityTable> tables,
                                    std::span<const double> weights);
// Argmax of the fused table; ties go to the earlier candidate.
LabelMap ensemble_fuse(std::span<const ProbabilityTable> tables, std::span<const double> weights);

// Index of the largest value; the first one wins ties.
std::size_t argmax_first(std::span<const double> values);

// ---- files -----------------------------------------------------------------

// Prediction file: JSON array of {"id", "label"}; order preserved on write.
void write_predictions(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& predictions);
LabelMap read_predictions(const std::filesystem::path& path);
// Gold labels from either a prediction-format file or a labeled dataset file
// (entries carrying "tokens").
LabelMap read_gold(const std::filesystem::path& path);

// Probability file: {"id": {candidate: prob}}, candidate order preserved.
void write_probabilities(const std::filesystem::path& path, const ProbabilityTable& table,
                         const std::vector<std::string>& id_order);
ProbabilityTable read_probabilities(const std::filesystem::path& path);

// Lowercase, whitespace-collapsed label used when comparing files from
// different sources.
std::string normalize_label(const std::string& label);

}  // namespace phrasecl
