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

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace phrasecl::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// A named trainable array. Row-vector convention throughout: activations are
// (rows = positions, cols = features) and a dense layer is x * W + b.
struct Tensor {
  std::string name;
  Matrix value;
  // Decoupled weight decay applies only to tensors with decay = true.
  bool decay = true;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  int index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  int index_ = -1;
};

// Reverse-mode automatic differentiation over dense matrices.
//
// Every op appends one node. A node requires a gradient iff the tape is
// recording and at least one input requires one; nodes that do not carry no
// backward closure. Parameter leaves are cached per Tensor so a tensor used
// many times in one graph accumulates into a single gradient.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  // Leaf that receives a gradient (when recording).
  Var variable(Matrix value);
  // Leaf bound to a parameter tensor; the tensor must outlive the tape.
  Var param(const Tensor& tensor, bool trainable = true);

  const Matrix& value(Var v) const { return node(v).value(); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  // Gradient of the last backward() target w.r.t. v (zeros if none flowed).
  Matrix grad(Var v) const;

  // Seeds d(loss)/d(loss) = seed and propagates to every node.
  void backward(Var loss, double seed = 1.0);

  // Visits (tensor, gradient) for every trainable parameter leaf that
  // received a gradient.
  void for_each_param_grad(
      const std::function<void(const Tensor&, const Matrix&)>& fn) const;

  // Op construction. `inputs` decides whether the node requires a gradient.
  Var push(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var push(Matrix value, std::span<const Var> inputs, Backward backward);
  // Adds g into the gradient of v when v requires one.
  void accumulate(Var v, const Matrix& g);
  // Mutable gradient buffer of v (allocated on first use); nullptr when v
  // does not require a gradient. For scatter-style backward passes.
  Matrix* grad_buffer(Var v);

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    const Tensor* param = nullptr;
    Backward backward;

    const Matrix& value() const { return ref ? *ref : owned; }
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, int> param_index_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

// ---- ops -------------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
// a (r x c) + b (1 x c) broadcast over rows.
Var add_row(Var a, Var b);
Var scale(Var a, double s);
// Elementwise product with a constant mask (dropout, probes).
Var mul_const(Var a, const Matrix& m);
Var gelu(Var a);
Var relu(Var a);
// Row-wise layer normalization with gain/bias rows (1 x c).
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

// Multi-head scaled dot-product attention. q, k, v are (n x d) and already
// projected; heads split the column dimension. Keys with key_valid[j] == 0
// receive zero weight; a query row with no valid key yields zeros.
Var attention(Var q, Var k, Var v, std::span<const char> key_valid,
              int num_heads);

// Row p of the result is the mean of table rows listed in bags[p].
Var embed_bags(Var table, const std::vector<std::vector<int>>& bags);
Var gather_rows(Var table, std::span<const int> ids);
Var select_rows(Var a, std::span<const int> rows);
Var row(Var a, int r);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(Var a, Var b);
Var stack_rows(std::span<const Var> parts);
Var sum_all(Var a);

// Cosine similarity of the row a (1 x d) with each row of b (k x d), as a
// (1 x k) row. Pairs involving a zero vector are defined as 0 with zero
// gradient.
Var cosine_rows(Var a, Var b);

// -log softmax(scale * s)[target] for a (1 x k) score row.
Var nll_softmax(Var scores, int target, double scale = 1.0);
// Mean softmax cross-entropy of logits rows against target ids; an empty
// logits matrix yields 0.
Var cross_entropy(Var logits, std::span<const int> targets);
// Mean binary cross-entropy of logits (any shape, read column-major) against
// labels in {0, 1}; empty input yields 0.
Var bce_with_logits(Var logits, std::span<const double> labels);

}  // namespace phrasecl::ad
