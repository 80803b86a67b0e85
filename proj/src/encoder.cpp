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

#include "phrasecl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "phrasecl/corpus.hpp"
#include "phrasecl/errors.hpp"

namespace phrasecl {

void EncoderConfig::validate() const {
  if (vocab_size < Vocabulary::kNumReserved) {
    throw ParameterError("encoder: vocab_size must cover the reserved tokens");
  }
  if (hidden_dim < 1 || num_layers < 0 || num_heads < 1 || ffn_dim < 1) {
    throw ParameterError("encoder: dimensions must be >= 1");
  }
  if (hidden_dim % num_heads != 0) {
    throw ParameterError("encoder: hidden_dim must be divisible by num_heads");
  }
  if (max_sequence_length < 4 || max_sequence_length > 300) {
    throw ParameterError("encoder: max_sequence_length must lie in [4, 300]");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ParameterError("encoder: dropout_rate must lie in [0, 1)");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size},   {"hidden_dim", hidden_dim},
          {"num_layers", num_layers},   {"num_heads", num_heads},
          {"ffn_dim", ffn_dim},         {"max_sequence_length", max_sequence_length},
          {"dropout_rate", dropout_rate}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  return c;
}

namespace {

constexpr double kInitStd = 0.02;

ad::Tensor gaussian(std::string name, int rows, int cols, Rng& rng) {
  ad::Tensor t{std::move(name), Matrix(rows, cols), true};
  for (Eigen::Index i = 0; i < t.value.size(); ++i) {
    t.value.data()[i] = kInitStd * standard_normal(rng);
  }
  return t;
}

ad::Tensor filled(std::string name, int rows, int cols, double v) {
  return ad::Tensor{std::move(name), Matrix::Constant(rows, cols, v), false};
}

}  // namespace

EncoderParams EncoderParams::initialize(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "encoder.init"));
  const int d = config.hidden_dim;
  const int v = config.vocab_size;
  EncoderParams p;
  p.config = config;
  p.token_embedding = gaussian("embeddings.token", v, d, rng);
  p.position_embedding = gaussian("embeddings.position", config.max_sequence_length, d, rng);
  p.segment_embedding = gaussian("embeddings.segment", 2, d, rng);
  for (int l = 0; l < config.num_layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerParams lp;
    lp.ln1_gamma = filled(pre + "ln1.gamma", 1, d, 1.0);
    lp.ln1_beta = filled(pre + "ln1.beta", 1, d, 0.0);
    lp.wq = gaussian(pre + "attn.wq", d, d, rng);
    lp.bq = filled(pre + "attn.bq", 1, d, 0.0);
    lp.wk = gaussian(pre + "attn.wk", d, d, rng);
    lp.bk = filled(pre + "attn.bk", 1, d, 0.0);
    lp.wv = gaussian(pre + "attn.wv", d, d, rng);
    lp.bv = filled(pre + "attn.bv", 1, d, 0.0);
    lp.wo = gaussian(pre + "attn.wo", d, d, rng);
    lp.bo = filled(pre + "attn.bo", 1, d, 0.0);
    lp.ln2_gamma = filled(pre + "ln2.gamma", 1, d, 1.0);
    lp.ln2_beta = filled(pre + "ln2.beta", 1, d, 0.0);
    lp.ffn_w1 = gaussian(pre + "ffn.w1", d, config.ffn_dim, rng);
    lp.ffn_b1 = filled(pre + "ffn.b1", 1, config.ffn_dim, 0.0);
    lp.ffn_w2 = gaussian(pre + "ffn.w2", config.ffn_dim, d, rng);
    lp.ffn_b2 = filled(pre + "ffn.b2", 1, d, 0.0);
    p.layers.push_back(std::move(lp));
  }
  p.mlm_weight = gaussian("mlm.weight", d, v, rng);
  p.mlm_bias = filled("mlm.bias", 1, v, 0.0);
  p.nsp_weight = gaussian("nsp.weight", d, 1, rng);
  p.nsp_bias = filled("nsp.bias", 1, 1, 0.0);
  return p;
}

std::vector<ad::Tensor*> EncoderParams::tensors() {
  std::vector<ad::Tensor*> out = {&token_embedding, &position_embedding, &segment_embedding};
  for (auto& l : layers) {
    for (ad::Tensor* t : {&l.ln1_gamma, &l.ln1_beta, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv,
                          &l.wo, &l.bo, &l.ln2_gamma, &l.ln2_beta, &l.ffn_w1, &l.ffn_b1,
                          &l.ffn_w2, &l.ffn_b2}) {
      out.push_back(t);
    }
  }
  for (ad::Tensor* t : {&mlm_weight, &mlm_bias, &nsp_weight, &nsp_bias}) out.push_back(t);
  return out;
}

std::vector<const ad::Tensor*> EncoderParams::tensors() const {
  auto mut = const_cast<EncoderParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::uint64_t params_hash(const EncoderParams& params) {
  std::uint64_t h = fnv1a64("phrasecl.params");
  for (const ad::Tensor* t : params.tensors()) {
    h = fnv1a64(t->name, h);
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(t->value.data()),
                                 static_cast<std::size_t>(t->value.size()) * sizeof(double)),
                h);
  }
  return h;
}

EmbeddedSequence embed_sequence(ad::Tape& tape, const EncoderParams& params,
                                const SequenceInput& input) {
  const auto n = static_cast<int>(input.token_ids.size());
  if (n == 0) throw ParameterError("embed_sequence: empty sequence");
  if (n > params.config.max_sequence_length) {
    throw ParameterError("embed_sequence: sequence longer than max_sequence_length");
  }
  if (!input.segment_ids.empty() && static_cast<int>(input.segment_ids.size()) != n) {
    throw ParameterError("embed_sequence: segment ids length mismatch");
  }
  const int vocab = params.config.vocab_size;
  auto check_id = [vocab](int id) {
    if (id < 0 || id >= vocab) throw IndexError("embed_sequence: token id out of range");
  };

  std::vector<std::vector<int>> bags(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    check_id(input.token_ids[static_cast<std::size_t>(p)]);
    bags[static_cast<std::size_t>(p)] = {input.token_ids[static_cast<std::size_t>(p)]};
  }
  EmbeddedSequence out;
  out.attention_mask.resize(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    out.attention_mask[static_cast<std::size_t>(p)] =
        input.token_ids[static_cast<std::size_t>(p)] != Vocabulary::kPad;
  }
  for (const PhraseSlot& slot : input.phrase_slots) {
    if (slot.position < 0 || slot.position >= n) {
      throw IndexError("embed_sequence: phrase slot position out of range");
    }
    if (slot.token_ids.empty()) throw IndexError("embed_sequence: empty phrase slot");
    for (int id : slot.token_ids) check_id(id);
    bags[static_cast<std::size_t>(slot.position)] = slot.token_ids;
    out.attention_mask[static_cast<std::size_t>(slot.position)] = 1;
    out.phrase_slots.push_back(slot.position);
  }

  out.segment_ids = input.segment_ids.empty() ? std::vector<int>(static_cast<std::size_t>(n), 0)
                                              : input.segment_ids;
  for (int s : out.segment_ids) {
    if (s < 0 || s > 1) throw IndexError("embed_sequence: segment id must be 0 or 1");
  }
  std::vector<int> positions(static_cast<std::size_t>(n));
  std::iota(positions.begin(), positions.end(), 0);

  ad::Var tokens = ad::embed_bags(tape.param(params.token_embedding), bags);
  ad::Var pos = ad::gather_rows(tape.param(params.position_embedding), positions);
  ad::Var seg = ad::gather_rows(tape.param(params.segment_embedding), out.segment_ids);
  out.embeddings = ad::add(ad::add(tokens, pos), seg);
  return out;
}

namespace {

ad::Var dropout(ad::Var x, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return x;
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
  }
  return ad::mul_const(x, mask);
}

ad::Var dense(ad::Var x, const ad::Tensor& w, const ad::Tensor& b) {
  ad::Tape& tape = *x.tape();
  return ad::add_row(ad::matmul(x, tape.param(w)), tape.param(b));
}

}  // namespace

ad::Var encode(const EmbeddedSequence& input, const EncoderParams& params, Rng* dropout_rng) {
  ad::Tape& tape = *input.embeddings.tape();
  const double rate = params.config.dropout_rate;
  ad::Var x = dropout(input.embeddings, rate, dropout_rng);
  for (const LayerParams& l : params.layers) {
    ad::Var a = ad::layer_norm(x, tape.param(l.ln1_gamma), tape.param(l.ln1_beta));
    ad::Var q = dense(a, l.wq, l.bq);
    ad::Var k = dense(a, l.wk, l.bk);
    ad::Var v = dense(a, l.wv, l.bv);
    ad::Var att = ad::attention(q, k, v, input.attention_mask, params.config.num_heads);
    x = ad::add(x, dropout(dense(att, l.wo, l.bo), rate, dropout_rng));
    ad::Var f = ad::layer_norm(x, tape.param(l.ln2_gamma), tape.param(l.ln2_beta));
    f = dense(ad::gelu(dense(f, l.ffn_w1, l.ffn_b1)), l.ffn_w2, l.ffn_b2);
    x = ad::add(x, dropout(f, rate, dropout_rng));
  }
  if (!x.value().allFinite()) throw NumericalError("encode: non-finite hidden state");
  return x;
}

ad::Var mlm_logits(ad::Var hidden, std::span<const int> positions, const EncoderParams& params) {
  ad::Tape& tape = *hidden.tape();
  for (int p : positions) {
    if (p < 0 || p >= hidden.rows()) throw IndexError("mlm_logits: position out of range");
  }
  ad::Var rows = ad::select_rows(hidden, positions);
  return ad::add_row(ad::matmul(rows, tape.param(params.mlm_weight)), tape.param(params.mlm_bias));
}

ad::Var nsp_logit(ad::Var hidden, const EncoderParams& params) {
  ad::Tape& tape = *hidden.tape();
  return ad::add(ad::matmul(ad::row(hidden, 0), tape.param(params.nsp_weight)),
                 tape.param(params.nsp_bias));
}

CosineResult cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ParameterError("cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return {0.0, true};
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return {std::clamp(c, -1.0, 1.0), false};
}

CosineResult cosine_similarity(const Vector& u, const Vector& v) {
  return cosine_similarity(std::span<const double>(u.data(), static_cast<std::size_t>(u.size())),
                           std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

Matrix encode_eval(const EncoderParams& params, const SequenceInput& input) {
  ad::Tape tape(false);
  return encode(embed_sequence(tape, params, input), params).value();
}

}  // namespace phrasecl
