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
#include <span>
#include <vector>

#include "phrasecl/autograd.hpp"

namespace phrasecl {

using ad::Matrix;

// Per-tensor gradient sums for one optimizer step, indexed like the tensor
// list it was built from. Accumulation order is the call order, so a fixed
// example order gives bit-identical sums.
class GradientBuffer {
 public:
  explicit GradientBuffer(std::vector<ad::Tensor*> tensors);

  // Adds every parameter gradient recorded on the tape for a tensor in this
  // buffer. Gradients of other tensors (e.g. a frozen teacher) are ignored.
  void add(const ad::Tape& tape);
  void zero();

  std::span<ad::Tensor* const> tensors() const { return tensors_; }
  std::span<const Matrix> grads() const { return grads_; }
  const Matrix& grad(const ad::Tensor& t) const;

  // Throws NumericalError naming the first tensor with a non-finite gradient.
  void check_finite() const;

 private:
  std::vector<ad::Tensor*> tensors_;
  std::vector<Matrix> grads_;
  std::vector<std::pair<const ad::Tensor*, std::size_t>> index_;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Decay applies to tensors with
// decay == true.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(const GradientBuffer& grads, double lr);
  std::int64_t steps() const { return steps_; }

 private:
  AdamWConfig config_;
  std::int64_t steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// Linear warmup from 0 to peak over round(warmup_fraction * total) steps,
// then linear decay to 0 at `total`.
double warmup_linear_decay(std::int64_t step, std::int64_t total, double warmup_fraction,
                           double peak);

// Linear warmup (step s < warmup_steps runs at lr_start * (s + 1) /
// warmup_steps), then linear anneal so the last step (total - 1) runs at
// lr_end.
double warmup_anneal(std::int64_t step, std::int64_t total, std::int64_t warmup_steps,
                     double lr_start, double lr_end);

}  // namespace phrasecl
