// Copyright 2026 The advgen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "advgen/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace advgen::nn {

Adam::Adam(const ParamSet& params, AdamOptions options) : options_(options) {
  for (const auto& e : params.entries()) {
    m_.push_back(Tensor::zeros_like(e.value));
    v_.push_back(Tensor::zeros_like(e.value));
  }
}

void Adam::step(ParamSet& params, std::span<const Tensor> grads) {
  auto& entries = params.entries();
  if (grads.size() != entries.size() || m_.size() != entries.size()) {
    throw std::invalid_argument("Adam::step: gradient count mismatch");
  }
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(options_.beta1, t);
  const double bias2 = 1.0 - std::pow(options_.beta2, t);
  for (size_t p = 0; p < entries.size(); ++p) {
    Tensor& w = entries[p].value;
    const Tensor& g = grads[p];
    if (!g.same_shape(w)) throw std::invalid_argument("Adam::step: shape mismatch");
    for (size_t i = 0; i < w.size(); ++i) {
      m_[p][i] = options_.beta1 * m_[p][i] + (1.0 - options_.beta1) * g[i];
      v_[p][i] = options_.beta2 * v_[p][i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double m_hat = m_[p][i] / bias1;
      const double v_hat = v_[p][i] / bias2;
      w[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

ParamSet Adam::state() const {
  ParamSet s;
  for (size_t p = 0; p < m_.size(); ++p) {
    s.add("m." + std::to_string(p), m_[p]);
    s.add("v." + std::to_string(p), v_[p]);
  }
  return s;
}

void Adam::restore(const ParamSet& state, std::int64_t steps_taken) {
  if (state.entries().size() != 2 * m_.size()) {
    throw std::invalid_argument("Adam::restore: state does not match parameters");
  }
  for (size_t p = 0; p < m_.size(); ++p) {
    const Tensor& m = state.get("m." + std::to_string(p));
    const Tensor& v = state.get("v." + std::to_string(p));
    if (!m.same_shape(m_[p]) || !v.same_shape(v_[p])) {
      throw std::invalid_argument("Adam::restore: moment shape mismatch");
    }
    m_[p] = m;
    v_[p] = v;
  }
  step_ = steps_taken;
}

}  // namespace advgen::nn
