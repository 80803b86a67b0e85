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

#include "phrasecl/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phrasecl/baselines.hpp"
#include "phrasecl/checkpoint.hpp"
#include "phrasecl/corpus.hpp"
#include "phrasecl/errors.hpp"
#include "phrasecl/evaluation.hpp"
#include "phrasecl/finetune.hpp"
#include "phrasecl/pretrain.hpp"
#include "phrasecl/random.hpp"

namespace phrasecl {

namespace fs = std::filesystem;
using ordered = nlohmann::ordered_json;

std::string file_hash(const fs::path& path) {
  const std::string bytes = read_file(path);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

namespace {

int exit_code(const Error& e) {
  const std::string c = e.category();
  if (c == "FormatError") return 3;
  if (c == "ValidationError") return 4;
  if (c == "NumericalError") return 5;
  if (c == "ParameterError") return 6;
  if (c == "LookupError") return 7;
  if (c == "IndexError") return 8;
  return 9;
}

fs::path default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? fs::path(env) : fs::path("phrasecl_out");
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    throw ValidationError(std::string(what) + " not found: " + path.string());
  }
}

nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  require_file(path, "config file");
  try {
    auto j = nlohmann::json::parse(read_file(path));
    if (!j.is_object()) throw FormatError(path + ": config must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

nlohmann::json section(const nlohmann::json& config, const char* name) {
  auto it = config.find(name);
  return it != config.end() && it->is_object() ? *it : nlohmann::json::object();
}

template <class T>
void apply(T& target, const std::optional<T>& flag) {
  if (flag) target = *flag;
}

// Records what a run consumed and produced. Written last, so a manifest only
// exists for completed runs.
class Manifest {
 public:
  Manifest(std::string subcommand, std::uint64_t root_seed) {
    j_["subcommand"] = std::move(subcommand);
    j_["root_seed"] = root_seed;
    j_["config"] = ordered::object();
    j_["inputs"] = ordered::object();
    j_["outputs"] = ordered::object();
  }
  void config(const nlohmann::json& c) { j_["config"] = ordered::parse(c.dump()); }
  void input(const fs::path& p) {
    if (!p.empty()) j_["inputs"][p.string()] = file_hash(p);
  }
  void output(const fs::path& p) { j_["outputs"][p.string()] = file_hash(p); }
  void write(const fs::path& out_dir) const {
    write_file(out_dir / ("manifest_" + j_["subcommand"].get<std::string>() + ".json"),
               j_.dump(2) + "\n");
  }

 private:
  ordered j_;
};

struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "JSON config file (flags override it)");
  sub->add_option("--out-dir", c.out_dir,
                  std::string("Output directory (default $") + kOutDirEnv + " or ./phrasecl_out)");
  sub->add_option("--seed", c.seed, "Root seed");
}

fs::path out_dir_of(const Common& c) { return c.out_dir.empty() ? default_out_dir() : fs::path(c.out_dir); }

std::uint64_t root_seed(const Common& c, const nlohmann::json& config) {
  if (c.seed) return *c.seed;
  return config.value("seed", std::uint64_t{0});
}

// Module seed: explicit in the config section, else derived from the root.
std::uint64_t module_seed(const nlohmann::json& sec, std::uint64_t root, const char* name) {
  if (sec.contains("seed")) return sec["seed"].get<std::uint64_t>();
  return derive_seed(root, name);
}

// ---- subcommands ----------------------------------------------------------

struct SynthArgs {
  Common common;
  std::optional<std::size_t> num_acronyms, senses, per_sense;
  std::optional<double> cue_strength, long_form_rate;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto config = load_config(a.common.config_path);
  const auto sec = section(config, "synthetic");
  const std::uint64_t root = root_seed(a.common, config);
  SyntheticConfig sc;
  sc.num_acronyms = sec.value("num_acronyms", sc.num_acronyms);
  sc.senses_per_acronym = sec.value("senses_per_acronym", sc.senses_per_acronym);
  sc.examples_per_sense = sec.value("examples_per_sense", sc.examples_per_sense);
  sc.cue_strength = sec.value("cue_strength", sc.cue_strength);
  sc.long_form_rate = sec.value("long_form_rate", sc.long_form_rate);
  sc.dev_fraction = sec.value("dev_fraction", sc.dev_fraction);
  sc.test_fraction = sec.value("test_fraction", sc.test_fraction);
  sc.cue_slots = sec.value("cue_slots", sc.cue_slots);
  sc.seed = a.common.seed ? derive_seed(root, "synthetic") : module_seed(sec, root, "synthetic");
  apply(sc.num_acronyms, a.num_acronyms);
  apply(sc.senses_per_acronym, a.senses);
  apply(sc.examples_per_sense, a.per_sense);
  apply(sc.cue_strength, a.cue_strength);
  apply(sc.long_form_rate, a.long_form_rate);

  const SyntheticCorpus corpus = generate_synthetic(sc);
  const fs::path dir = out_dir_of(a.common);
  write_synthetic(corpus, dir);

  Manifest m("synth", root);
  m.config({{"num_acronyms", sc.num_acronyms},
            {"senses_per_acronym", sc.senses_per_acronym},
            {"examples_per_sense", sc.examples_per_sense},
            {"cue_strength", sc.cue_strength},
            {"long_form_rate", sc.long_form_rate},
            {"dev_fraction", sc.dev_fraction},
            {"test_fraction", sc.test_fraction},
            {"cue_slots", sc.cue_slots},
            {"seed", sc.seed}});
  for (const char* f : {"dictionary.json", "train.json", "dev.json", "test.json", "test_gold.json"}) {
    m.output(dir / f);
  }
  m.write(dir);
  const SplitStats s = split_stats(corpus.examples);
  out << "synthetic corpus: " << corpus.dictionary.size() << " acronyms, " << s.total
      << " examples (train " << s.train << ", dev " << s.dev << ", test " << s.test << ") -> "
      << dir.string() << "\n";
  return 0;
}

struct PrepareArgs {
  Common common;
  std::string dictionary, train, dev, test;
  std::size_t max_length = 300;
  std::size_t min_freq = 1;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  require_file(a.dictionary, "dictionary");
  require_file(a.train, "training data");
  if (!a.dev.empty()) require_file(a.dev, "dev data");
  if (!a.test.empty()) require_file(a.test, "test data");
  const auto config = load_config(a.common.config_path);
  const Dictionary dict = load_dictionary(a.dictionary);
  const fs::path dir = out_dir_of(a.common);
  Manifest m("prepare", root_seed(a.common, config));
  m.config({{"max_length", a.max_length}, {"min_freq", a.min_freq}});
  m.input(a.dictionary);

  std::vector<AcronymExample> all;
  auto load = [&](const std::string& path, Split split) {
    if (path.empty()) return;
    m.input(path);
    auto part = load_dataset(path, dict, split);
    for (auto& ex : part) ex = truncate_example(ex, a.max_length);
    const fs::path dest = dir / (std::string(split_name(split)) + ".json");
    write_file(dest, serialize_dataset(part));
    m.output(dest);
    all.insert(all.end(), part.begin(), part.end());
  };
  load(a.train, Split::train);
  load(a.dev, Split::dev);
  load(a.test, Split::test);

  std::vector<AcronymExample> train_only;
  for (const auto& ex : all) {
    if (ex.split == Split::train) train_only.push_back(ex);
  }
  const Vocabulary vocab = build_vocabulary(train_only, dict, a.min_freq);
  write_file(dir / "vocab.json", nlohmann::json(vocab.tokens()).dump(1) + "\n");
  m.output(dir / "vocab.json");
  write_file(dir / "dictionary.json", dict.serialize());
  m.output(dir / "dictionary.json");
  m.write(dir);

  const SplitStats s = split_stats(all);
  char line[256];
  std::snprintf(line, sizeof(line),
                "train %zu (%.2f%%)  dev %zu (%.2f%%)  test %zu (%.2f%%)  total %zu\n", s.train,
                s.train_percent, s.dev, s.dev_percent, s.test, s.test_percent, s.total);
  out << line << "dictionary " << dict.size() << " short forms, vocabulary " << vocab.size()
      << " tokens -> " << dir.string() << "\n";
  return 0;
}

struct PretrainArgs {
  Common common;
  std::string dictionary, train, vocab, init;
  std::optional<std::int64_t> steps1, steps2;
  std::optional<std::size_t> batch, negatives;
  std::optional<double> lr, tau, dropout;
  std::optional<int> hidden, layers, heads, ffn, max_length;
  bool no_contrastive = false;
  std::size_t min_freq = 1;
};

int cmd_pretrain(const PretrainArgs& a, std::ostream& out) {
  require_file(a.dictionary, "dictionary");
  require_file(a.train, "training data");
  if (!a.vocab.empty()) require_file(a.vocab, "vocabulary");
  if (!a.init.empty()) require_file(a.init, "initial checkpoint");
  const auto config = load_config(a.common.config_path);
  const std::uint64_t root = root_seed(a.common, config);
  nlohmann::json sec = section(config, "pretrain");
  if (!sec.contains("encoder") && config.contains("encoder")) sec["encoder"] = config["encoder"];
  PretrainConfig pc = PretrainConfig::from_json(sec);
  pc.seed = a.common.seed ? derive_seed(root, "pretrain") : module_seed(sec, root, "pretrain");
  apply(pc.steps_phase1, a.steps1);
  apply(pc.steps_phase2, a.steps2);
  apply(pc.batch_size, a.batch);
  apply(pc.negatives, a.negatives);
  apply(pc.lr, a.lr);
  apply(pc.tau, a.tau);
  apply(pc.encoder.dropout_rate, a.dropout);
  apply(pc.encoder.hidden_dim, a.hidden);
  apply(pc.encoder.num_layers, a.layers);
  apply(pc.encoder.num_heads, a.heads);
  apply(pc.encoder.ffn_dim, a.ffn);
  apply(pc.encoder.max_sequence_length, a.max_length);
  if (a.no_contrastive) pc.contrastive = false;

  const Dictionary dict = load_dictionary(a.dictionary);
  const auto train = load_dataset(a.train, dict, Split::train);
  std::optional<EncoderCheckpoint> init;
  Vocabulary vocab;
  if (!a.init.empty()) {
    init = load_encoder_checkpoint(a.init);
    vocab = init->vocab;
    pc.encoder = init->params.config;
  } else if (!a.vocab.empty()) {
    vocab = Vocabulary::from_tokens(
        nlohmann::json::parse(read_file(a.vocab)).get<std::vector<std::string>>());
  } else {
    vocab = build_vocabulary(train, dict, a.min_freq);
  }
  pc.encoder.vocab_size = vocab.size();
  pc.validate();

  const PretrainResult r =
      run_pretraining(pc, train, dict, vocab, init ? &init->params : nullptr);
  if (r.teacher_hash_before != r.teacher_hash_after) {
    throw NumericalError("pretrain: teacher parameters changed during training");
  }
  const fs::path dir = out_dir_of(a.common);
  save_encoder_checkpoint(dir / "encoder.ckpt", r.student, vocab,
                          {{"pretrain", r.hyperparameters}});
  std::string log;
  for (const auto& rec : r.log) log += rec.to_json().dump() + "\n";
  write_file(dir / "pretrain_log.jsonl", log);

  Manifest m("pretrain", root);
  m.config(r.hyperparameters);
  m.input(a.dictionary);
  m.input(a.train);
  if (!a.vocab.empty()) m.input(a.vocab);
  if (!a.init.empty()) m.input(a.init);
  m.output(dir / "encoder.ckpt");
  m.output(dir / "pretrain_log.jsonl");
  m.write(dir);
  if (!r.log.empty()) {
    const auto& last = r.log.back().loss;
    char line[256];
    std::snprintf(line, sizeof(line),
                  "pretrained %zu steps; last loss %.4f (cl %.4f, mlm %.4f, nsp %.4f)\n",
                  r.log.size(), last.total, last.l_cl, last.l_mlm, last.l_nsp);
    out << line;
  }
  out << "checkpoint -> " << (dir / "encoder.ckpt").string() << "\n";
  return 0;
}

struct FinetuneArgs {
  Common common;
  std::string checkpoint, dictionary, train, dev;
  std::optional<int> epochs, warmup_epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr_start, lr_end, lambda, tau;
};

int cmd_finetune(const FinetuneArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.dictionary, "dictionary");
  require_file(a.train, "training data");
  if (!a.dev.empty()) require_file(a.dev, "dev data");
  const auto config = load_config(a.common.config_path);
  const std::uint64_t root = root_seed(a.common, config);
  const auto sec = section(config, "finetune");
  FinetuneConfig fc;
  try {
    fc = FinetuneConfig::from_json(sec);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("finetune config: ") + e.what());
  }
  fc.seed = a.common.seed ? derive_seed(root, "finetune") : module_seed(sec, root, "finetune");
  apply(fc.epochs, a.epochs);
  apply(fc.warmup_epochs, a.warmup_epochs);
  apply(fc.batch_size, a.batch);
  apply(fc.lr_start, a.lr_start);
  apply(fc.lr_end, a.lr_end);
  apply(fc.lambda, a.lambda);
  apply(fc.tau, a.tau);
  fc.validate();

  const Archive archive = load_archive(a.checkpoint);
  DisambiguationModel model;
  if (archive.meta.contains("head")) {
    model = load_model(a.checkpoint);
  } else {
    EncoderCheckpoint ckpt = encoder_from_archive(archive);
    model = make_model(std::move(ckpt.params), std::move(ckpt.vocab),
                       derive_seed(fc.seed, "head"), fc.projection_dim);
  }
  const Dictionary dict = load_dictionary(a.dictionary);
  const auto train = load_dataset(a.train, dict, Split::train);
  const auto dev = a.dev.empty() ? std::vector<AcronymExample>{}
                                 : load_dataset(a.dev, dict, Split::dev);
  const FinetuneResult r = run_finetuning(model, train, dev, dict, fc);

  const fs::path dir = out_dir_of(a.common);
  save_model(dir / "model.ckpt", r.model, {{"finetune", fc.to_json()}, {"best_epoch", r.best_epoch}});
  ordered log = ordered::object();
  log["initial_dev_macro_f1"] = r.initial_dev_f1;
  log["best_epoch"] = r.best_epoch;
  log["epochs"] = ordered::array();
  for (const auto& e : r.epochs) log["epochs"].push_back(ordered::parse(e.to_json().dump()));
  log["step_losses"] = r.step_losses;
  write_file(dir / "finetune_log.json", log.dump(2) + "\n");

  Manifest m("finetune", root);
  m.config(fc.to_json());
  for (const auto& p : {a.checkpoint, a.dictionary, a.train, a.dev}) m.input(p);
  m.output(dir / "model.ckpt");
  m.output(dir / "finetune_log.json");
  m.write(dir);
  char line[160];
  for (const auto& e : r.epochs) {
    std::snprintf(line, sizeof(line), "epoch %3d  loss %.4f  dev macro F1 %.4f\n", e.epoch,
                  e.mean_loss, e.dev_macro_f1);
    out << line;
  }
  std::snprintf(line, sizeof(line), "best epoch %d (untrained dev macro F1 %.4f)\n", r.best_epoch,
                r.initial_dev_f1);
  out << line << "model -> " << (dir / "model.ckpt").string() << "\n";
  return 0;
}

struct PredictArgs {
  Common common;
  std::string model, dictionary, data, out, probs;
};

void write_outputs(Manifest& m, const fs::path& pred_path, const fs::path& probs_path,
                   const std::vector<std::pair<std::string, std::string>>& labels,
                   const ProbabilityTable& table, const std::vector<std::string>& order) {
  write_predictions(pred_path, labels);
  m.output(pred_path);
  if (!probs_path.empty()) {
    write_probabilities(probs_path, table, order);
    m.output(probs_path);
  }
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  require_file(a.model, "model checkpoint");
  require_file(a.dictionary, "dictionary");
  require_file(a.data, "input data");
  const auto config = load_config(a.common.config_path);
  const DisambiguationModel model = load_model(a.model);
  const Dictionary dict = load_dictionary(a.dictionary);
  const auto data = load_dataset(a.data, dict, Split::test);

  std::vector<std::pair<std::string, std::string>> labels;
  ProbabilityTable table;
  std::vector<std::string> order;
  for (const auto& ex : data) {
    ScoredCandidates sc = predict(ex, dict, model);
    labels.emplace_back(ex.id, sc.label());
    order.push_back(ex.id);
    table.emplace(ex.id, std::move(sc.scores));
  }
  const fs::path dir = out_dir_of(a.common);
  const fs::path pred = a.out.empty() ? dir / "predictions.json" : fs::path(a.out);
  Manifest m("predict", root_seed(a.common, config));
  for (const auto& p : {a.model, a.dictionary, a.data}) m.input(p);
  write_outputs(m, pred, a.probs, labels, table, order);
  m.write(dir);
  out << "predicted " << labels.size() << " examples -> " << pred.string() << "\n";
  return 0;
}

struct EvaluateArgs {
  Common common;
  std::string pred, gold, report;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  require_file(a.pred, "prediction file");
  require_file(a.gold, "gold file");
  const auto config = load_config(a.common.config_path);
  LabelMap pred, gold;
  for (const auto& [id, label] : read_predictions(a.pred)) pred[id] = normalize_label(label);
  for (const auto& [id, label] : read_gold(a.gold)) gold[id] = normalize_label(label);
  const MetricReport report = macro_metrics(pred, gold);
  out << report.table();
  const fs::path dir = out_dir_of(a.common);
  const fs::path report_path = a.report.empty() ? dir / "report.json" : fs::path(a.report);
  write_file(report_path, report.to_json().dump(2) + "\n");
  Manifest m("evaluate", root_seed(a.common, config));
  m.input(a.pred);
  m.input(a.gold);
  m.output(report_path);
  m.write(dir);
  return 0;
}

struct EnsembleArgs {
  Common common;
  std::vector<std::string> probs;
  std::vector<double> weights;
  std::string out, fused;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  for (const auto& p : a.probs) require_file(p, "probability file");
  const auto config = load_config(a.common.config_path);
  std::vector<ProbabilityTable> tables;
  for (const auto& p : a.probs) tables.push_back(read_probabilities(p));
  std::vector<double> weights = a.weights;
  if (weights.empty()) {
    weights = section(config, "ensemble").value("weights", std::vector<double>{});
  }
  if (weights.empty()) weights.assign(tables.size(), 1.0);
  const ProbabilityTable fused = fuse_probabilities(tables, weights);

  // Output order follows the first input file.
  std::vector<std::string> order;
  const ordered first = ordered::parse(read_file(a.probs.front()));
  for (const auto& [id, row] : first.items()) order.push_back(id);
  std::vector<std::pair<std::string, std::string>> labels;
  for (const auto& id : order) {
    const CandidateProbs& row = fused.at(id);
    std::vector<double> p;
    for (const auto& [cand, v] : row) p.push_back(v);
    labels.emplace_back(id, row.at(argmax_first(p)).first);
  }
  const fs::path dir = out_dir_of(a.common);
  const fs::path pred = a.out.empty() ? dir / "ensemble_predictions.json" : fs::path(a.out);
  Manifest m("ensemble", root_seed(a.common, config));
  m.config({{"weights", weights}});
  for (const auto& p : a.probs) m.input(p);
  write_outputs(m, pred, a.fused, labels, fused, order);
  m.write(dir);
  out << "fused " << tables.size() << " tables over " << labels.size() << " examples -> "
      << pred.string() << "\n";
  return 0;
}

struct BaselineArgs {
  Common common;
  std::string dictionary, data, out, probs;
};

int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  require_file(a.dictionary, "dictionary");
  require_file(a.data, "input data");
  const auto config = load_config(a.common.config_path);
  const Dictionary dict = load_dictionary(a.dictionary);
  const auto data = load_dataset(a.data, dict, Split::test);
  std::vector<std::pair<std::string, std::string>> labels;
  ProbabilityTable table;
  std::vector<std::string> order;
  for (const auto& ex : data) {
    labels.emplace_back(ex.id, rule_based_predict(ex, dict).text);
    // Scores normalized to sum to one (uniform when nothing overlaps) so the
    // baseline can take part in ensembling.
    const auto scores = rule_based_scores(ex, dict);
    double sum = 0.0;
    for (const auto& s : scores) sum += s.normalized;
    CandidateProbs row;
    for (const auto& s : scores) {
      row.emplace_back(s.candidate, sum > 0.0 ? s.normalized / sum
                                              : 1.0 / static_cast<double>(scores.size()));
    }
    order.push_back(ex.id);
    table.emplace(ex.id, std::move(row));
  }
  const fs::path dir = out_dir_of(a.common);
  const fs::path pred = a.out.empty() ? dir / "baseline_predictions.json" : fs::path(a.out);
  Manifest m("baseline", root_seed(a.common, config));
  m.input(a.dictionary);
  m.input(a.data);
  write_outputs(m, pred, a.probs, labels, table, order);
  m.write(dir);
  out << "rule-based predictions for " << labels.size() << " examples -> " << pred.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Acronym disambiguation with contrastive pre-training", "phrasecl"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic acronym corpus");
  add_common(s_synth, synth.common);
  s_synth->add_option("--num-acronyms", synth.num_acronyms, "Number of short forms");
  s_synth->add_option("--senses", synth.senses, "Long forms per short form");
  s_synth->add_option("--examples-per-sense", synth.per_sense, "Sentences per long form");
  s_synth->add_option("--cue-strength", synth.cue_strength, "Probability of each cue slot");
  s_synth->add_option("--long-form-rate", synth.long_form_rate,
                      "Probability that the long form is spelled out");

  PrepareArgs prep;
  auto* s_prep = app.add_subcommand("prepare", "Validate and normalize a labeled dataset");
  add_common(s_prep, prep.common);
  s_prep->add_option("--dictionary", prep.dictionary, "Dictionary JSON")->required();
  s_prep->add_option("--train", prep.train, "Training split JSON")->required();
  s_prep->add_option("--dev", prep.dev, "Dev split JSON");
  s_prep->add_option("--test", prep.test, "Test split JSON");
  s_prep->add_option("--max-length", prep.max_length, "Token window per sentence");
  s_prep->add_option("--min-freq", prep.min_freq, "Vocabulary frequency cut-off");

  PretrainArgs pre;
  auto* s_pre = app.add_subcommand("pretrain", "Continual pre-training (contrastive + MLM + NSP)");
  add_common(s_pre, pre.common);
  s_pre->add_option("--dictionary", pre.dictionary, "Dictionary JSON")->required();
  s_pre->add_option("--train", pre.train, "Labeled training data")->required();
  s_pre->add_option("--vocab", pre.vocab, "Vocabulary JSON from `prepare`");
  s_pre->add_option("--init", pre.init, "Encoder checkpoint to continue from");
  s_pre->add_option("--steps-phase1", pre.steps1, "Steps with the contrastive term");
  s_pre->add_option("--steps-phase2", pre.steps2, "MLM + NSP steps");
  s_pre->add_option("--batch-size", pre.batch);
  s_pre->add_option("--negatives", pre.negatives, "Negatives per example");
  s_pre->add_option("--lr", pre.lr, "Peak learning rate");
  s_pre->add_option("--tau", pre.tau, "Contrastive temperature");
  s_pre->add_option("--dropout", pre.dropout);
  s_pre->add_option("--hidden-dim", pre.hidden);
  s_pre->add_option("--layers", pre.layers);
  s_pre->add_option("--heads", pre.heads);
  s_pre->add_option("--ffn-dim", pre.ffn);
  s_pre->add_option("--max-length", pre.max_length, "Maximum sequence length");
  s_pre->add_option("--min-freq", pre.min_freq, "Vocabulary frequency cut-off");
  s_pre->add_flag("--no-contrastive", pre.no_contrastive, "Phase 1 without the contrastive term");

  FinetuneArgs ft;
  auto* s_ft = app.add_subcommand("finetune", "Supervised contrastive fine-tuning");
  add_common(s_ft, ft.common);
  s_ft->add_option("--checkpoint", ft.checkpoint, "Encoder or model checkpoint")->required();
  s_ft->add_option("--dictionary", ft.dictionary, "Dictionary JSON")->required();
  s_ft->add_option("--train", ft.train, "Labeled training data")->required();
  s_ft->add_option("--dev", ft.dev, "Labeled dev data (best-epoch selection)");
  s_ft->add_option("--epochs", ft.epochs);
  s_ft->add_option("--warmup-epochs", ft.warmup_epochs);
  s_ft->add_option("--batch-size", ft.batch);
  s_ft->add_option("--lr-start", ft.lr_start);
  s_ft->add_option("--lr-end", ft.lr_end);
  s_ft->add_option("--lambda", ft.lambda, "Weight of the contrastive term");
  s_ft->add_option("--tau", ft.tau, "Contrastive temperature");

  PredictArgs pr;
  auto* s_pr = app.add_subcommand("predict", "Rank dictionary candidates with a fine-tuned model");
  add_common(s_pr, pr.common);
  s_pr->add_option("--model", pr.model, "Fine-tuned model checkpoint")->required();
  s_pr->add_option("--dictionary", pr.dictionary, "Dictionary JSON")->required();
  s_pr->add_option("--data", pr.data, "Dataset JSON (labels optional)")->required();
  s_pr->add_option("--out", pr.out, "Prediction file");
  s_pr->add_option("--probs", pr.probs, "Also write candidate probabilities here");

  EvaluateArgs ev;
  auto* s_ev = app.add_subcommand("evaluate", "Macro precision, recall and F1");
  add_common(s_ev, ev.common);
  s_ev->add_option("--pred", ev.pred, "Prediction file")->required();
  s_ev->add_option("--gold", ev.gold, "Gold labels (prediction or dataset format)")->required();
  s_ev->add_option("--report", ev.report, "Report JSON path");

  EnsembleArgs en;
  auto* s_en = app.add_subcommand("ensemble", "Weighted probability fusion");
  add_common(s_en, en.common);
  s_en->add_option("--probs", en.probs, "Probability files (repeatable)")->required();
  s_en->add_option("--weights", en.weights, "One weight per file (default 1 each)")
      ->delimiter(',');
  s_en->add_option("--out", en.out, "Prediction file");
  s_en->add_option("--fused-probs", en.fused, "Also write fused probabilities here");

  BaselineArgs bl;
  auto* s_bl = app.add_subcommand("baseline", "Rule-based word-overlap baseline");
  add_common(s_bl, bl.common);
  s_bl->add_option("--dictionary", bl.dictionary, "Dictionary JSON")->required();
  s_bl->add_option("--data", bl.data, "Dataset JSON")->required();
  s_bl->add_option("--out", bl.out, "Prediction file");
  s_bl->add_option("--probs", bl.probs, "Also write normalized scores here");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (s_synth->parsed()) return cmd_synth(synth, out);
    if (s_prep->parsed()) return cmd_prepare(prep, out);
    if (s_pre->parsed()) return cmd_pretrain(pre, out);
    if (s_ft->parsed()) return cmd_finetune(ft, out);
    if (s_pr->parsed()) return cmd_predict(pr, out);
    if (s_ev->parsed()) return cmd_evaluate(ev, out);
    if (s_en->parsed()) return cmd_ensemble(en, out);
    if (s_bl->parsed()) return cmd_baseline(bl, out);
  } catch (const Error& e) {
    err << e.category() << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const nlohmann::json::exception& e) {
    err << "FormatError: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "Error: " << e.what() << "\n";
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace phrasecl
