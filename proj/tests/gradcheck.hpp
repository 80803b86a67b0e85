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

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "phrasecl/autograd.hpp"

namespace phrasecl::testing {

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

// Relative error ||a - n|| / max(||a||, ||n||); tensors whose gradients are
// both below `floor` count as matching.
inline double relative_error(const ad::Matrix& a, const ad::Matrix& n, double floor = 1e-9) {
  const double scale = std::max(a.norm(), n.norm());
  if (scale < floor) return 0.0;
  return (a - n).norm() / scale;
}

// Analytic gradients from one backward pass against central differences of
// the scalar returned by `build`, for every tensor in `tensors`.
inline std::vector<TensorCheck> check_param_gradients(
    const std::function<ad::Var(ad::Tape&)>& build, const std::vector<ad::Tensor*>& tensors,
    double step = 1e-4) {
  std::map<const ad::Tensor*, ad::Matrix> analytic;
  {
    ad::Tape tape;
    ad::Var loss = build(tape);
    tape.backward(loss);
    tape.for_each_param_grad([&](const ad::Tensor& t, const ad::Matrix& g) { analytic[&t] = g; });
  }
  auto eval = [&]() {
    ad::Tape tape(false);
    return build(tape).scalar();
  };
  std::vector<TensorCheck> out;
  for (ad::Tensor* t : tensors) {
    ad::Matrix numeric = ad::Matrix::Zero(t->value.rows(), t->value.cols());
    for (Eigen::Index i = 0; i < t->value.size(); ++i) {
      const double orig = t->value.data()[i];
      t->value.data()[i] = orig + step;
      const double up = eval();
      t->value.data()[i] = orig - step;
      const double down = eval();
      t->value.data()[i] = orig;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    auto it = analytic.find(t);
    const ad::Matrix a = it != analytic.end() ? it->second : ad::Matrix::Zero(numeric.rows(), numeric.cols());
    out.push_back({t->name, relative_error(a, numeric), a.norm(), numeric.norm()});
  }
  return out;
}

// Same check for a free variable leaf of shape `x`.
inline double check_input_gradient(const std::function<ad::Var(ad::Tape&, ad::Var)>& build,
                                   ad::Matrix x, double step = 1e-5) {
  ad::Matrix analytic;
  {
    ad::Tape tape;
    ad::Var v = tape.variable(x);
    ad::Var loss = build(tape, v);
    tape.backward(loss);
    analytic = tape.grad(v);
  }
  ad::Matrix numeric(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    auto eval = [&](double val) {
      x.data()[i] = val;
      ad::Tape tape(false);
      return build(tape, tape.constant(x)).scalar();
    };
    const double up = eval(orig + step);
    const double down = eval(orig - step);
    x.data()[i] = orig;
    numeric.data()[i] = (up - down) / (2.0 * step);
  }
  return relative_error(analytic, numeric);
}

// Deterministic pseudo-random matrix in [-1, 1].
inline ad::Matrix fixed_matrix(int rows, int cols, unsigned seed) {
  ad::Matrix m(rows, cols);
  unsigned s = seed * 2654435761u + 12345u;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    s = s * 1664525u + 1013904223u;
    m.data()[i] = static_cast<double>(s >> 8) / static_cast<double>(1u << 24) * 2.0 - 1.0;
  }
  return m;
}

}  // namespace phrasecl::testing
