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

#ifndef ADVGEN_NN_PARAMS_HPP_
#define ADVGEN_NN_PARAMS_HPP_

#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "advgen/nn/graph.hpp"
#include "advgen/nn/tensor.hpp"

namespace advgen::nn {

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

/// Ordered collection of named parameter tensors.
class ParamSet {
 public:
  void add(std::string name, Tensor value);
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  bool contains(std::string_view name) const;

  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::vector<NamedTensor>& entries() { return entries_; }
  size_t scalar_count() const;

  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<NamedTensor> entries_;
};

/// One forward pass' view of a ParamSet: every tensor wrapped as a graph
/// leaf (trainable) or constant (frozen).
class BoundParams {
 public:
  BoundParams(const ParamSet& params, bool trainable);
  const Var& operator[](std::string_view name) const;
  /// Gradients in ParamSet order; zero tensors where nothing flowed.
  std::vector<Tensor> gradients() const;

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
};

/// He-normal initialisation for a conv {O, C, k, k} or linear {O, D} weight.
Tensor he_normal(std::vector<int> shape, std::mt19937_64& rng);

}  // namespace advgen::nn

#endif  // ADVGEN_NN_PARAMS_HPP_
