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

#ifndef ADVGEN_TOOLS_RUN_CONFIG_HPP_
#define ADVGEN_TOOLS_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgen/attacks.hpp"
#include "advgen/generator.hpp"

namespace advgen::cli {

/// Bad flags, bad config: exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSection {
  int train_count = 400;
  int test_count = 100;
  int canvas = 128;
  /// Side of the square detector input.
  int resolution = 64;
};

struct DetectorSection {
  int epochs = 20;
  double learning_rate = 1e-3;
};

struct GeneratorSection {
  generator::GeneratorConfig config{.epsilon_max = 0.5, .base_channels = 8};
  int epochs = 6;
};

struct CwSection {
  double c = 10.0;
  int steps = 20;
  double step_size = 0.01;
};

struct EvaluationSection {
  std::vector<double> alphas{0.5, 0.6, 0.7, 0.8, 0.9, 0.99};
  std::vector<int> jpeg_qualities{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  double alpha = 0.7;
  double fgsm_epsilon = 0.1;
  CwSection cw;
  int bench_images = 100;
  double magnify = 10.0;
  int figures = 4;
};

/// Everything one invocation needs. Built from the defaults, then the
/// config file, then command-line flags.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string output_dir;  // empty: ADVGEN_OUTPUT_ROOT or the working directory
  int workers = 1;
  DataSection data;
  DetectorSection detector;
  GeneratorSection generator;
  attacks::TrainConfig attack{.lambda = 10.0, .train_alpha = 0.5, .seed = 7};
  EvaluationSection evaluation;

  nlohmann::json to_json() const;
  /// Overlays `j` onto this config. Unknown keys and wrong types raise
  /// UsageError naming the offending path.
  void merge(const nlohmann::json& j);
  /// Range checks across every section.
  void validate() const;

  /// Resolves a path against the output directory.
  std::filesystem::path output_path(const std::filesystem::path& p) const;
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace advgen::cli

#endif  // ADVGEN_TOOLS_RUN_CONFIG_HPP_
