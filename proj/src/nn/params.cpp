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

#include "advgen/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace advgen::nn {

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.push_back({std::move(name), std::move(value)});
}

const Tensor& ParamSet::get(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw std::out_of_range("unknown parameter " + std::string(name));
}

Tensor& ParamSet::get(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParamSet&>(*this).get(name));
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

size_t ParamSet::scalar_count() const {
  size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

BoundParams::BoundParams(const ParamSet& params, bool trainable) {
  names_.reserve(params.entries().size());
  vars_.reserve(params.entries().size());
  for (const auto& e : params.entries()) {
    names_.push_back(e.name);
    vars_.push_back(trainable ? leaf(e.value) : constant(e.value));
  }
}

const Var& BoundParams::operator[](std::string_view name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return vars_[i];
  }
  throw std::out_of_range("unbound parameter " + std::string(name));
}

std::vector<Tensor> BoundParams::gradients() const {
  std::vector<Tensor> grads;
  grads.reserve(vars_.size());
  for (const auto& v : vars_) {
    grads.push_back(v.grad().empty() ? Tensor::zeros_like(v.value()) : v.grad());
  }
  return grads;
}

Tensor he_normal(std::vector<int> shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  size_t fan_in = 1;
  for (int i = 1; i < t.rank(); ++i) fan_in *= static_cast<size_t>(t.dim(i));
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace advgen::nn
