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

#ifndef ADVGEN_GENERATOR_HPP_
#define ADVGEN_GENERATOR_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "advgen/image.hpp"
#include "advgen/nn/graph.hpp"
#include "advgen/nn/params.hpp"

namespace advgen::generator {

struct GeneratorConfig {
  /// Bound on |delta| per element before the clamp: delta = eps * tanh(.)
  double epsilon_max = 0.15;
  int base_channels = 8;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

/// Two-level encoder-decoder with skip connections. The output layer starts at zero,
/// so an untrained generator emits delta = 0.
struct GeneratorWeights {
  static constexpr const char* kVersion = "advgen-generator/1";
  /// Input sides must be a multiple of this.
  static constexpr int kStrideMultiple = 4;

  GeneratorConfig config;
  nn::ParamSet params;
  int height = 0;  // training resolution
  int width = 0;
  std::uint64_t seed = 0;
  int epochs = 0;
  /// Free-form record of how the weights were trained (lambda, T, ...).
  nlohmann::json training = nlohmann::json::object();
};

/// Additive perturbation, same {3, H, W} layout as the image it conditions on.
struct Perturbation {
  nn::Tensor values;

  double l2_norm() const;
  bool operator==(const Perturbation&) const = default;
};

GeneratorWeights init_generator(const GeneratorConfig& config, int height, int width,
                                std::uint64_t seed);

/// Differentiable forward pass, resolution-agnostic (sides a multiple of 4).
nn::Var forward(const nn::BoundParams& params, const GeneratorConfig& config,
                const nn::Var& image);

/// delta = G(x): one feed-forward pass, no graph recorded. Throws
/// std::invalid_argument when x does not match the trained resolution.
Perturbation generate(const ImageTensor& x, const GeneratorWeights& weights);

/// clamp(x + delta, -1, 1).
ImageTensor apply(const ImageTensor& x, const Perturbation& delta);
nn::Var apply(const nn::Var& x, const nn::Var& delta);

std::string serialize(const GeneratorWeights& weights);
GeneratorWeights parse_generator(std::string_view bytes);
void save(const GeneratorWeights& weights, const std::filesystem::path& path);
GeneratorWeights load_generator(const std::filesystem::path& path);
std::string weights_hash(const GeneratorWeights& weights);

}  // namespace advgen::generator

#endif  // ADVGEN_GENERATOR_HPP_
