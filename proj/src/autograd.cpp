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

#include "phrasecl/autograd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace phrasecl::ad {

double Var::scalar() const {
  const Matrix& m = value();
  assert(m.rows() == 1 && m.cols() == 1);
  return m(0, 0);
}

const Tape::Node& Tape::node(Var v) const {
  assert(v.tape_ == this && v.index_ >= 0 &&
         v.index_ < static_cast<int>(nodes_.size()));
  return nodes_[static_cast<std::size_t>(v.index_)];
}

Tape::Node& Tape::node(Var v) {
  assert(v.tape_ == this && v.index_ >= 0 &&
         v.index_ < static_cast<int>(nodes_.size()));
  return nodes_[static_cast<std::size_t>(v.index_)];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(const Tensor& tensor, bool trainable) {
  if (auto it = param_index_.find(&tensor); it != param_index_.end()) {
    return Var(this, it->second);
  }
  Node n;
  n.ref = &tensor.value;
  n.param = &tensor;
  n.requires_grad = recording_ && trainable;
  nodes_.push_back(std::move(n));
  const int index = static_cast<int>(nodes_.size()) - 1;
  param_index_.emplace(&tensor, index);
  return Var(this, index);
}

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value().rows(), n.value().cols());
  return n.grad;
}

Var Tape::push(Matrix value, std::initializer_list<Var> inputs,
               Backward backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
              std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> inputs, Backward backward) {
  Node n;
  n.owned = std::move(value);
  if (recording_) {
    for (const Var& in : inputs) {
      if (node(in).requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix* Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() == 0) {
    n.grad = Matrix::Zero(n.value().rows(), n.value().cols());
  }
  return &n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (Matrix* buf = grad_buffer(v)) *buf += g;
}

void Tape::backward(Var loss, double seed) {
  for (Node& n : nodes_) n.grad.resize(0, 0);
  Node& root = node(loss);
  if (!root.requires_grad) return;
  root.grad = Matrix::Constant(root.value().rows(), root.value().cols(), seed);
  for (int i = loss.index_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::for_each_param_grad(
    const std::function<void(const Tensor&, const Matrix&)>& fn) const {
  for (const Node& n : nodes_) {
    if (n.param != nullptr && n.requires_grad && n.grad.size() != 0) {
      fn(*n.param, n.grad);
    }
  }
}

// ---- ops -------------------------------------------------------------------

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluC = 0.044715;

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: shape mismatch");
  Tape& t = *a.tape();
  return t.push(a.value() * b.value(), {a, b},
                [a, b](Tape& t, const Matrix& g) {
                  if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
                  if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
                });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  return a.tape()->push(a.value() + b.value(), {a, b},
                        [a, b](Tape& t, const Matrix& g) {
                          t.accumulate(a, g);
                          t.accumulate(b, g);
                        });
}

Var sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  return a.tape()->push(a.value() - b.value(), {a, b},
                        [a, b](Tape& t, const Matrix& g) {
                          t.accumulate(a, g);
                          t.accumulate(b, -g);
                        });
}

Var add_row(Var a, Var b) {
  require(b.rows() == 1 && b.cols() == a.cols(), "add_row: shape mismatch");
  Matrix out = a.value().rowwise() + b.value().row(0);
  return a.tape()->push(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
  });
}

Var scale(Var a, double s) {
  return a.tape()->push(a.value() * s, {a},
                        [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var mul_const(Var a, const Matrix& m) {
  require(a.rows() == m.rows() && a.cols() == m.cols(), "mul_const: shape mismatch");
  return a.tape()->push(a.value().cwiseProduct(m), {a},
                        [a, m](Tape& t, const Matrix& g) {
                          t.accumulate(a, g.cwiseProduct(m));
                        });
}

Var gelu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluK * (v + kGeluC * v * v * v)));
  });
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix d = a.value().unaryExpr([](double v) {
      const double th = std::tanh(kGeluK * (v + kGeluC * v * v * v));
      return 0.5 * (1.0 + th) +
             0.5 * v * (1.0 - th * th) * kGeluK * (1.0 + 3.0 * kGeluC * v * v);
    });
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix d = (a.value().array() > 0.0).cast<double>().matrix();
    t.accumulate(a, g.cwiseProduct(d));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows();
  const Eigen::Index c = xv.cols();
  require(gamma.rows() == 1 && gamma.cols() == c && beta.rows() == 1 &&
              beta.cols() == c,
          "layer_norm: shape mismatch");
  auto xhat = std::make_shared<Matrix>(n, c);
  auto inv_std = std::make_shared<Vector>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    (*inv_std)(r) = 1.0 / std::sqrt(var + eps);
    xhat->row(r) = (xv.row(r).array() - mean) * (*inv_std)(r);
  }
  Matrix out = (xhat->array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return x.tape()->push(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std](Tape& t, const Matrix& g) {
        if (t.requires_grad(gamma)) {
          t.accumulate(gamma, g.cwiseProduct(*xhat).colwise().sum());
        }
        if (t.requires_grad(beta)) t.accumulate(beta, g.colwise().sum());
        if (!t.requires_grad(x)) return;
        Matrix dxhat = (g.array().rowwise() * gamma.value().row(0).array()).matrix();
        Matrix dx(g.rows(), g.cols());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double m1 = dxhat.row(r).mean();
          const double m2 = dxhat.row(r).cwiseProduct(xhat->row(r)).mean();
          dx.row(r) = (*inv_std)(r) *
                      (dxhat.row(r).array() - m1 - xhat->row(r).array() * m2).matrix();
        }
        t.accumulate(x, dx);
      });
}

Var attention(Var q, Var k, Var v, std::span<const char> key_valid,
              int num_heads) {
  const Eigen::Index n = q.rows();
  const Eigen::Index d = q.cols();
  require(k.rows() == n && v.rows() == n && k.cols() == d && v.cols() == d,
          "attention: shape mismatch");
  require(static_cast<Eigen::Index>(key_valid.size()) == n, "attention: mask size");
  require(num_heads >= 1 && d % num_heads == 0, "attention: heads must divide width");
  const Eigen::Index dh = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(static_cast<std::size_t>(num_heads));
  Matrix out = Matrix::Zero(n, d);
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  for (int h = 0; h < num_heads; ++h) {
    const Eigen::Index c0 = h * dh;
    Matrix s = qv.middleCols(c0, dh) * kv.middleCols(c0, dh).transpose() * inv_sqrt;
    Matrix p = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (key_valid[static_cast<std::size_t>(j)]) mx = std::max(mx, s(i, j));
      }
      if (!std::isfinite(mx)) continue;
      double z = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!key_valid[static_cast<std::size_t>(j)]) continue;
        p(i, j) = std::exp(s(i, j) - mx);
        z += p(i, j);
      }
      p.row(i) /= z;
    }
    out.middleCols(c0, dh) = p * vv.middleCols(c0, dh);
    probs->push_back(std::move(p));
  }

  return q.tape()->push(
      std::move(out), {q, k, v},
      [q, k, v, probs, dh, inv_sqrt](Tape& t, const Matrix& g) {
        const Matrix& qv = q.value();
        const Matrix& kv = k.value();
        const Matrix& vv = v.value();
        Matrix* gq = t.grad_buffer(q);
        Matrix* gk = t.grad_buffer(k);
        Matrix* gv = t.grad_buffer(v);
        for (std::size_t h = 0; h < probs->size(); ++h) {
          const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
          const Matrix& p = (*probs)[h];
          const auto go = g.middleCols(c0, dh);
          if (gv) gv->middleCols(c0, dh) += p.transpose() * go;
          if (!gq && !gk) continue;
          Matrix dp = go * vv.middleCols(c0, dh).transpose();
          Vector rowdot = dp.cwiseProduct(p).rowwise().sum();
          Matrix ds = p.cwiseProduct(dp.colwise() - rowdot) * inv_sqrt;
          if (gq) gq->middleCols(c0, dh) += ds * kv.middleCols(c0, dh);
          if (gk) gk->middleCols(c0, dh) += ds.transpose() * qv.middleCols(c0, dh);
        }
      });
}

Var embed_bags(Var table, const std::vector<std::vector<int>>& bags) {
  const Matrix& tv = table.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(bags.size()), tv.cols());
  for (std::size_t p = 0; p < bags.size(); ++p) {
    require(!bags[p].empty(), "embed_bags: empty bag");
    for (int id : bags[p]) {
      require(id >= 0 && id < tv.rows(), "embed_bags: id out of range");
      out.row(static_cast<Eigen::Index>(p)) += tv.row(id);
    }
    out.row(static_cast<Eigen::Index>(p)) /= static_cast<double>(bags[p].size());
  }
  return table.tape()->push(std::move(out), {table},
                            [table, bags](Tape& t, const Matrix& g) {
                              Matrix* gt = t.grad_buffer(table);
                              for (std::size_t p = 0; p < bags.size(); ++p) {
                                const double w = 1.0 / static_cast<double>(bags[p].size());
                                for (int id : bags[p]) {
                                  gt->row(id) += w * g.row(static_cast<Eigen::Index>(p));
                                }
                              }
                            });
}

Var gather_rows(Var table, std::span<const int> ids) {
  return select_rows(table, ids);
}

Var select_rows(Var a, std::span<const int> rows) {
  const Matrix& av = a.value();
  std::vector<int> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] >= 0 && idx[r] < av.rows(), "select_rows: index out of range");
    out.row(static_cast<Eigen::Index>(r)) = av.row(idx[r]);
  }
  return a.tape()->push(std::move(out), {a}, [a, idx](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(a);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      ga->row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var row(Var a, int r) {
  const int idx[1] = {r};
  return select_rows(a, idx);
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no parts");
  const Eigen::Index n = parts[0].rows();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.rows() == n, "concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(n, total);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index c = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(c, p.cols()));
      c += p.cols();
    }
  });
}

Var concat_cols(Var a, Var b) {
  const Var parts[2] = {a, b};
  return concat_cols(parts);
}

Var stack_rows(std::span<const Var> parts) {
  require(!parts.empty(), "stack_rows: no parts");
  const Eigen::Index c = parts[0].cols();
  Eigen::Index total = 0;
  for (const Var& p : parts) {
    require(p.cols() == c, "stack_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, c);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(r, p.rows()));
      r += p.rows();
    }
  });
}

Var sum_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var cosine_rows(Var a, Var b) {
  require(a.rows() == 1 && a.cols() == b.cols(), "cosine_rows: shape mismatch");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Eigen::Index k = bv.rows();
  const double na = av.norm();
  Vector nb = bv.rowwise().norm();
  Matrix out = Matrix::Zero(1, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    if (na > 0.0 && nb(j) > 0.0) out(0, j) = av.row(0).dot(bv.row(j)) / (na * nb(j));
  }
  Matrix cos = out;
  return a.tape()->push(
      std::move(out), {a, b}, [a, b, na, nb, cos](Tape& t, const Matrix& g) {
        const Matrix& av = a.value();
        const Matrix& bv = b.value();
        Matrix* ga = t.grad_buffer(a);
        Matrix* gb = t.grad_buffer(b);
        for (Eigen::Index j = 0; j < bv.rows(); ++j) {
          if (na == 0.0 || nb(j) == 0.0) continue;
          const double c = cos(0, j);
          const double w = g(0, j);
          if (ga) {
            ga->row(0) += w * (bv.row(j) / (na * nb(j)) - c * av.row(0) / (na * na));
          }
          if (gb) {
            gb->row(j) += w * (av.row(0) / (na * nb(j)) - c * bv.row(j) / (nb(j) * nb(j)));
          }
        }
      });
}

Var nll_softmax(Var scores, int target, double scale) {
  require(scores.rows() == 1 && target >= 0 && target < scores.cols(),
          "nll_softmax: bad target");
  Eigen::RowVectorXd z = scores.value().row(0) * scale;
  const double mx = z.maxCoeff();
  Eigen::RowVectorXd e = (z.array() - mx).exp().matrix();
  const double sum = e.sum();
  Matrix out(1, 1);
  out(0, 0) = mx + std::log(sum) - z(target);
  Eigen::RowVectorXd p = e / sum;
  return scores.tape()->push(std::move(out), {scores},
                             [scores, target, scale, p](Tape& t, const Matrix& g) {
                               Matrix d = p;
                               d(0, target) -= 1.0;
                               t.accumulate(scores, d * (scale * g(0, 0)));
                             });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& lv = logits.value();
  require(lv.rows() == static_cast<Eigen::Index>(targets.size()),
          "cross_entropy: target count mismatch");
  const Eigen::Index m = lv.rows();
  Matrix out = Matrix::Zero(1, 1);
  if (m == 0) {
    return logits.tape()->push(std::move(out), {logits}, [](Tape&, const Matrix&) {});
  }
  auto probs = std::make_shared<Matrix>(m, lv.cols());
  std::vector<int> tgt(targets.begin(), targets.end());
  double total = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    require(tgt[static_cast<std::size_t>(r)] >= 0 &&
                tgt[static_cast<std::size_t>(r)] < lv.cols(),
            "cross_entropy: target out of range");
    const double mx = lv.row(r).maxCoeff();
    Eigen::RowVectorXd e = (lv.row(r).array() - mx).exp().matrix();
    const double sum = e.sum();
    total += mx + std::log(sum) - lv(r, tgt[static_cast<std::size_t>(r)]);
    probs->row(r) = e / sum;
  }
  out(0, 0) = total / static_cast<double>(m);
  return logits.tape()->push(std::move(out), {logits},
                             [logits, probs, tgt](Tape& t, const Matrix& g) {
                               Matrix d = *probs;
                               for (std::size_t r = 0; r < tgt.size(); ++r) {
                                 d(static_cast<Eigen::Index>(r), tgt[r]) -= 1.0;
                               }
                               t.accumulate(logits,
                                            d * (g(0, 0) / static_cast<double>(tgt.size())));
                             });
}

Var bce_with_logits(Var logits, std::span<const double> labels) {
  const Matrix& lv = logits.value();
  require(lv.size() == static_cast<Eigen::Index>(labels.size()),
          "bce_with_logits: label count mismatch");
  Matrix out = Matrix::Zero(1, 1);
  const Eigen::Index m = lv.size();
  if (m == 0) {
    return logits.tape()->push(std::move(out), {logits}, [](Tape&, const Matrix&) {});
  }
  std::vector<double> y(labels.begin(), labels.end());
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double x = lv.data()[i];
    total += std::max(x, 0.0) - x * y[static_cast<std::size_t>(i)] +
             std::log1p(std::exp(-std::abs(x)));
  }
  out(0, 0) = total / static_cast<double>(m);
  return logits.tape()->push(std::move(out), {logits}, [logits, y](Tape& t, const Matrix& g) {
    const Matrix& lv = logits.value();
    Matrix d(lv.rows(), lv.cols());
    const double w = g(0, 0) / static_cast<double>(y.size());
    for (Eigen::Index i = 0; i < lv.size(); ++i) {
      const double x = lv.data()[i];
      const double sig = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                  : std::exp(x) / (1.0 + std::exp(x));
      d.data()[i] = (sig - y[static_cast<std::size_t>(i)]) * w;
    }
    t.accumulate(logits, d);
  });
}

}  // namespace phrasecl::ad
