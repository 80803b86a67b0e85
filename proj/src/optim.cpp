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

#include "phrasecl/optim.hpp"

#include <algorithm>
#include <cmath>

#include "phrasecl/errors.hpp"

namespace phrasecl {

GradientBuffer::GradientBuffer(std::vector<ad::Tensor*> tensors) : tensors_(std::move(tensors)) {
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    grads_.push_back(Matrix::Zero(tensors_[i]->value.rows(), tensors_[i]->value.cols()));
    index_.emplace_back(tensors_[i], i);
  }
  std::sort(index_.begin(), index_.end());
}

void GradientBuffer::add(const ad::Tape& tape) {
  tape.for_each_param_grad([this](const ad::Tensor& t, const Matrix& g) {
    auto it = std::lower_bound(index_.begin(), index_.end(),
                               std::make_pair(&t, std::size_t{0}));
    if (it != index_.end() && it->first == &t) grads_[it->second] += g;
  });
}

void GradientBuffer::zero() {
  for (auto& g : grads_) g.setZero();
}

const Matrix& GradientBuffer::grad(const ad::Tensor& t) const {
  auto it = std::lower_bound(index_.begin(), index_.end(), std::make_pair(&t, std::size_t{0}));
  if (it == index_.end() || it->first != &t) {
    throw ParameterError("GradientBuffer: unknown tensor " + t.name);
  }
  return grads_[it->second];
}

void GradientBuffer::check_finite() const {
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    if (!grads_[i].allFinite()) {
      throw NumericalError("non-finite gradient in tensor " + tensors_[i]->name);
    }
  }
}

void AdamW::step(const GradientBuffer& grads, double lr) {
  const auto tensors = grads.tensors();
  const auto gs = grads.grads();
  if (m_.empty()) {
    for (const Matrix& g : gs) {
      m_.push_back(Matrix::Zero(g.rows(), g.cols()));
      v_.push_back(Matrix::Zero(g.rows(), g.cols()));
    }
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    Matrix& m = m_[i];
    Matrix& v = v_[i];
    const Matrix& g = gs[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v + (1.0 - config_.beta2) * g.cwiseProduct(g);
    Matrix& p = tensors[i]->value;
    if (lr == 0.0) continue;
    if (tensors[i]->decay && config_.weight_decay != 0.0) {
      p *= 1.0 - lr * config_.weight_decay;
    }
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config_.epsilon);
  }
}

double warmup_linear_decay(std::int64_t step, std::int64_t total, double warmup_fraction,
                           double peak) {
  if (total <= 0) return 0.0;
  const auto warmup = static_cast<std::int64_t>(
      std::llround(warmup_fraction * static_cast<double>(total)));
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (step >= total) return 0.0;
  return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

double warmup_anneal(std::int64_t step, std::int64_t total, std::int64_t warmup_steps,
                     double lr_start, double lr_end) {
  if (step < warmup_steps) {
    return lr_start * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const std::int64_t span = total - 1 - warmup_steps;
  if (span <= 0) return lr_start;
  const double frac =
      std::min(1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(span));
  return lr_start + (lr_end - lr_start) * frac;
}

}  // namespace phrasecl
