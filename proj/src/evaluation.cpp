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

#include "phrasecl/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "phrasecl/corpus.hpp"
#include "phrasecl/errors.hpp"

namespace phrasecl {

double harmonic_f1(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

MetricReport macro_metrics(const LabelMap& predictions, const LabelMap& gold,
                           const std::optional<std::set<std::string>>& classes) {
  std::vector<std::string> missing;
  for (const auto& [id, label] : gold) {
    if (!predictions.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = "missing predictions for " + std::to_string(missing.size()) + " id(s):";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " " + missing[i];
    if (missing.size() > 10) msg += " ...";
    throw ValidationError(msg);
  }

  MetricReport report;
  std::set<std::string> class_set;
  if (classes) {
    class_set = *classes;
  } else {
    for (const auto& [id, label] : gold) class_set.insert(label);
  }
  for (const auto& c : class_set) report.per_class[c];

  for (const auto& [id, truth] : gold) {
    const std::string& pred = predictions.at(id);
    if (pred == truth) {
      if (auto it = report.per_class.find(truth); it != report.per_class.end()) ++it->second.tp;
      continue;
    }
    if (auto it = report.per_class.find(pred); it != report.per_class.end()) ++it->second.fp;
    if (auto it = report.per_class.find(truth); it != report.per_class.end()) ++it->second.fn;
  }

  report.n_classes = report.per_class.size();
  if (report.n_classes == 0) return report;
  double p_sum = 0.0, r_sum = 0.0;
  for (auto& [label, s] : report.per_class) {
    s.precision = s.tp + s.fp > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
    s.recall = s.tp + s.fn > 0 ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
    p_sum += s.precision;
    r_sum += s.recall;
  }
  report.macro_precision = p_sum / static_cast<double>(report.n_classes);
  report.macro_recall = r_sum / static_cast<double>(report.n_classes);
  report.macro_f1 = harmonic_f1(report.macro_precision, report.macro_recall);
  return report;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [label, s] : per_class) {
    classes[label] = {{"precision", s.precision}, {"recall", s.recall},
                      {"tp", s.tp},               {"fp", s.fp},
                      {"fn", s.fn}};
  }
  return {{"macro_precision", macro_precision},
          {"macro_recall", macro_recall},
          {"macro_f1", macro_f1},
          {"n_classes", n_classes},
          {"per_class", classes}};
}

std::string MetricReport::table() const {
  std::ostringstream out;
  char line[512];
  std::snprintf(line, sizeof(line), "%-40s %9s %9s\n", "class", "precision", "recall");
  out << line;
  for (const auto& [label, s] : per_class) {
    std::snprintf(line, sizeof(line), "%-40.40s %9.4f %9.4f\n", label.c_str(), s.precision,
                  s.recall);
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "classes %zu  macro precision %.4f  macro recall %.4f  macro F1 %.4f\n",
                n_classes, macro_precision, macro_recall, macro_f1);
  out << line;
  return out.str();
}

std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ProbabilityTable fuse_probabilities(std::span<const ProbabilityTable> tables,
                                    std::span<const double> weights) {
  if (tables.empty()) throw ParameterError("ensemble: no probability tables");
  if (tables.size() != weights.size()) {
    throw ParameterError("ensemble: one weight per table required");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ParameterError("ensemble: weights must be >= 0");
    wsum += w;
  }
  if (wsum <= 0.0) throw ParameterError("ensemble: weights are all zero");

  const ProbabilityTable& first = tables[0];
  for (std::size_t k = 1; k < tables.size(); ++k) {
    if (tables[k].size() != first.size()) {
      throw ValidationError("ensemble: tables cover different example ids");
    }
  }
  ProbabilityTable fused;
  for (const auto& [id, probs] : first) {
    CandidateProbs out;
    for (const auto& [cand, p] : probs) out.emplace_back(cand, 0.0);
    for (std::size_t k = 0; k < tables.size(); ++k) {
      auto it = tables[k].find(id);
      if (it == tables[k].end()) throw ValidationError("ensemble: id '" + id + "' missing");
      const CandidateProbs& other = it->second;
      if (other.size() != out.size()) {
        throw ValidationError("ensemble: candidate sets differ for id '" + id + "'");
      }
      for (std::size_t c = 0; c < out.size(); ++c) {
        if (other[c].first != out[c].first) {
          throw ValidationError("ensemble: candidate sets differ for id '" + id + "'");
        }
        out[c].second += weights[k] * other[c].second;
      }
    }
    for (auto& [cand, p] : out) p /= wsum;
    fused.emplace(id, std::move(out));
  }
  return fused;
}

LabelMap ensemble_fuse(std::span<const ProbabilityTable> tables, std::span<const double> weights) {
  LabelMap labels;
  for (const auto& [id, probs] : fuse_probabilities(tables, weights)) {
    std::vector<double> p;
    for (const auto& [cand, v] : probs) p.push_back(v);
    if (p.empty()) throw ValidationError("ensemble: id '" + id + "' has no candidates");
    labels.emplace(id, probs[argmax_first(p)].first);
  }
  return labels;
}

std::string normalize_label(const std::string& label) {
  std::string out;
  for (const auto& t : tokenize(label)) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// ---- files -----------------------------------------------------------------

namespace {

nlohmann::ordered_json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

void write_predictions(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& predictions) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& [id, label] : predictions) arr.push_back({{"id", id}, {"label", label}});
  write_file(path, arr.dump(2) + "\n");
}

LabelMap read_predictions(const std::filesystem::path& path) {
  const auto j = parse_json_file(path);
  if (!j.is_array()) throw FormatError(path.string() + ": expected a JSON array");
  LabelMap out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("id") || !item.contains("label") ||
        !item["id"].is_string() || !item["label"].is_string()) {
      throw FormatError(path.string() + ": entries need string 'id' and 'label'");
    }
    if (!out.emplace(item["id"].get<std::string>(), item["label"].get<std::string>()).second) {
      throw ValidationError(path.string() + ": duplicate id " + item["id"].get<std::string>());
    }
  }
  return out;
}

LabelMap read_gold(const std::filesystem::path& path) {
  const auto j = parse_json_file(path);
  if (!j.is_array()) throw FormatError(path.string() + ": expected a JSON array");
  LabelMap out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("id") || !item["id"].is_string()) {
      throw FormatError(path.string() + ": entries need a string 'id'");
    }
    auto label = item.find("label");
    if (label == item.end() || !label->is_string()) {
      throw ValidationError(path.string() + ": example " + item["id"].get<std::string>() +
                            " has no gold label");
    }
    out.emplace(item["id"].get<std::string>(), label->get<std::string>());
  }
  return out;
}

void write_probabilities(const std::filesystem::path& path, const ProbabilityTable& table,
                         const std::vector<std::string>& id_order) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& id : id_order) {
    nlohmann::ordered_json probs = nlohmann::ordered_json::object();
    for (const auto& [cand, p] : table.at(id)) probs[cand] = p;
    j[id] = std::move(probs);
  }
  write_file(path, j.dump(2) + "\n");
}

ProbabilityTable read_probabilities(const std::filesystem::path& path) {
  const auto j = parse_json_file(path);
  if (!j.is_object()) throw FormatError(path.string() + ": expected a JSON object");
  ProbabilityTable table;
  for (const auto& [id, probs] : j.items()) {
    if (!probs.is_object()) throw FormatError(path.string() + ": '" + id + "' must map to an object");
    CandidateProbs row;
    for (const auto& [cand, p] : probs.items()) {
      if (!p.is_number()) throw FormatError(path.string() + ": non-numeric probability");
      row.emplace_back(cand, p.get<double>());
    }
    table.emplace(id, std::move(row));
  }
  return table;
}

}  // namespace phrasecl
