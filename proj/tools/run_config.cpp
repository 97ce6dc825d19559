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

#include "run_config.hpp"

#include <cstdlib>
#include <fstream>

namespace advgen::cli {
namespace {

using nlohmann::json;

// Defaults double as the schema: every accepted key exists here, with a
// value of the accepted JSON type.
void check_shape(const json& want, const json& got, const std::string& path) {
  if (want.is_object()) {
    if (!got.is_object()) throw UsageError(path + " must be an object");
    for (const auto& [key, value] : got.items()) {
      const std::string child = path.empty() ? key : path + "." + key;
      if (!want.contains(key)) throw UsageError("unknown config key '" + child + "'");
      check_shape(want.at(key), value, child);
    }
    return;
  }
  const bool ok = (want.is_number() && got.is_number()) || (want.is_string() && got.is_string()) ||
                  (want.is_boolean() && got.is_boolean()) || (want.is_array() && got.is_array());
  if (!ok) throw UsageError("config key '" + path + "' has the wrong type");
  if (want.is_number_integer() && !got.is_number_integer()) {
    throw UsageError("config key '" + path + "' must be an integer");
  }
  if (want.is_number_unsigned() && got.is_number_integer() && got.get<std::int64_t>() < 0) {
    throw UsageError("config key '" + path + "' must be non-negative");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

}  // namespace

json RunConfig::to_json() const {
  return {
      {"seed", seed},
      {"output_dir", output_dir},
      {"workers", workers},
      {"data",
       {{"train_count", data.train_count},
        {"test_count", data.test_count},
        {"canvas", data.canvas},
        {"resolution", data.resolution}}},
      {"detector", {{"epochs", detector.epochs}, {"learning_rate", detector.learning_rate}}},
      {"generator",
       {{"epsilon_max", generator.config.epsilon_max},
        {"base_channels", generator.config.base_channels},
        {"epochs", generator.epochs}}},
      {"attack", attack.to_json()},
      {"evaluation",
       {{"alphas", evaluation.alphas},
        {"jpeg_qualities", evaluation.jpeg_qualities},
        {"alpha", evaluation.alpha},
        {"fgsm_epsilon", evaluation.fgsm_epsilon},
        {"cw",
         {{"c", evaluation.cw.c}, {"steps", evaluation.cw.steps},
          {"step_size", evaluation.cw.step_size}}},
        {"bench_images", evaluation.bench_images},
        {"magnify", evaluation.magnify},
        {"figures", evaluation.figures}}},
  };
}

void RunConfig::merge(const json& j) {
  json current = to_json();
  check_shape(current, j, "");
  current.merge_patch(j);
  try {
    seed = current.at("seed").get<std::uint64_t>();
    output_dir = current.at("output_dir").get<std::string>();
    workers = current.at("workers").get<int>();
    const auto& d = current.at("data");
    data.train_count = d.at("train_count").get<int>();
    data.test_count = d.at("test_count").get<int>();
    data.canvas = d.at("canvas").get<int>();
    data.resolution = d.at("resolution").get<int>();
    const auto& det = current.at("detector");
    detector.epochs = det.at("epochs").get<int>();
    detector.learning_rate = det.at("learning_rate").get<double>();
    const auto& g = current.at("generator");
    generator.config.epsilon_max = g.at("epsilon_max").get<double>();
    generator.config.base_channels = g.at("base_channels").get<int>();
    generator.epochs = g.at("epochs").get<int>();
    attack = attacks::TrainConfig::from_json(current.at("attack"));
    const auto& e = current.at("evaluation");
    evaluation.alphas = e.at("alphas").get<std::vector<double>>();
    evaluation.jpeg_qualities = e.at("jpeg_qualities").get<std::vector<int>>();
    evaluation.alpha = e.at("alpha").get<double>();
    evaluation.fgsm_epsilon = e.at("fgsm_epsilon").get<double>();
    evaluation.cw.c = e.at("cw").at("c").get<double>();
    evaluation.cw.steps = e.at("cw").at("steps").get<int>();
    evaluation.cw.step_size = e.at("cw").at("step_size").get<double>();
    evaluation.bench_images = e.at("bench_images").get<int>();
    evaluation.magnify = e.at("magnify").get<double>();
    evaluation.figures = e.at("figures").get<int>();
  } catch (const json::exception& ex) {
    throw UsageError(std::string("bad config value: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }
}

void RunConfig::validate() const {
  require(workers >= 1, "workers must be at least 1");
  require(data.train_count >= 1 && data.test_count >= 1, "data counts must be at least 1");
  require(data.canvas >= 64, "data.canvas must be at least 64");
  require(data.resolution >= 16 && data.resolution % 4 == 0,
          "data.resolution must be a multiple of 4 and at least 16");
  require(detector.epochs >= 0, "detector.epochs must be non-negative");
  require(detector.learning_rate > 0.0, "detector.learning_rate must be positive");
  require(generator.config.epsilon_max > 0.0, "generator.epsilon_max must be positive");
  require(generator.config.base_channels >= 1, "generator.base_channels must be positive");
  require(generator.epochs >= 0, "generator.epochs must be non-negative");
  try {
    attack.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("attack.") + e.what());
  }
  for (size_t i = 0; i < evaluation.alphas.size(); ++i) {
    const double a = evaluation.alphas[i];
    require(a > 0.0 && a < 1.0, "evaluation.alphas must lie in (0, 1)");
    require(i == 0 || a >= evaluation.alphas[i - 1], "evaluation.alphas must be ascending");
  }
  for (int q : evaluation.jpeg_qualities) {
    require(q >= 1 && q <= 100, "evaluation.jpeg_qualities must lie in [1, 100]");
  }
  require(evaluation.alpha > 0.0 && evaluation.alpha < 1.0, "evaluation.alpha must lie in (0, 1)");
  require(evaluation.fgsm_epsilon >= 0.0, "evaluation.fgsm_epsilon must be non-negative");
  require(evaluation.cw.c > 0.0 && evaluation.cw.steps >= 1 && evaluation.cw.step_size > 0.0,
          "evaluation.cw needs c > 0, steps >= 1 and step_size > 0");
  require(evaluation.bench_images >= 10, "evaluation.bench_images must be at least 10");
  require(evaluation.magnify > 0.0, "evaluation.magnify must be positive");
  require(evaluation.figures >= 0, "evaluation.figures must be non-negative");
}

std::filesystem::path RunConfig::output_path(const std::filesystem::path& p) const {
  if (p.is_absolute()) return p;
  std::filesystem::path root = output_dir;
  if (root.empty()) {
    if (const char* env = std::getenv("ADVGEN_OUTPUT_ROOT"); env && *env) root = env;
  }
  return root.empty() ? p : root / p;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  cfg.merge(j);
  return cfg;
}

}  // namespace advgen::cli
