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

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "run_config.hpp"

namespace advgen::cli {
namespace {

TEST(RunConfig, ShippedDefaultsMatchBuiltIns) {
  const RunConfig shipped = load_run_config(ADVGEN_SOURCE_DIR "/configs/default.json");
  EXPECT_EQ(shipped.to_json(), RunConfig{}.to_json());
}

TEST(RunConfig, MergeOverridesNestedKeys) {
  RunConfig c;
  c.merge({{"attack", {{"lambda", 3.5}, {"loop_mode", "until_fooled"}}}, {"workers", 2}});
  EXPECT_EQ(c.attack.lambda, 3.5);
  EXPECT_EQ(c.attack.loop_mode, attacks::LoopMode::kUntilFooled);
  EXPECT_EQ(c.workers, 2);
  EXPECT_EQ(c.attack.max_iter_M, 10);
}

TEST(RunConfig, RejectsUnknownKeysAndWrongTypes) {
  RunConfig c;
  EXPECT_THROW(c.merge({{"atack", {{"lambda", 1.0}}}}), UsageError);
  EXPECT_THROW(c.merge({{"attack", {{"lamda", 1.0}}}}), UsageError);
  EXPECT_THROW(c.merge({{"attack", {{"lambda", "big"}}}}), UsageError);
  EXPECT_THROW(c.merge({{"data", {{"train_count", 2.5}}}}), UsageError);
  EXPECT_THROW(c.merge({{"seed", -1}}), UsageError);
}

TEST(RunConfig, ValidateCatchesBadRanges) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  c.evaluation.alphas = {0.9, 0.5};
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.attack.lambda = -1.0;
  EXPECT_ANY_THROW(c.validate());
  c = {};
  c.data.resolution = 30;
  EXPECT_ANY_THROW(c.validate());
}

TEST(RunConfig, RelativePathsLandInTheOutputDir) {
  RunConfig c;
  c.output_dir = "/tmp/advgen_out";
  EXPECT_EQ(c.output_path("a/b.csv"), std::filesystem::path("/tmp/advgen_out/a/b.csv"));
  EXPECT_EQ(c.output_path("/abs/x"), std::filesystem::path("/abs/x"));
}

TEST(RunConfig, BadFileIsAUsageError) {
  const auto p = std::filesystem::temp_directory_path() / "advgen_bad_config.json";
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_run_config(p), UsageError);
  EXPECT_THROW(load_run_config("/nonexistent/config.json"), UsageError);
}

}  // namespace
}  // namespace advgen::cli
