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

#ifndef ADVGEN_TESTS_SUPPORT_HPP_
#define ADVGEN_TESTS_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "advgen/data.hpp"
#include "advgen/detector.hpp"
#include "advgen/generator.hpp"
#include "advgen/image.hpp"

namespace advgen::testing {

/// Folder written by the make_fixtures program before the suites run.
std::filesystem::path fixture_dir();

/// Small detector and generator trained once per ctest run.
const detector::DetectorWeights& fixture_detector();
const generator::GeneratorWeights& fixture_generator();

/// Held-out synthetic images at the fixture resolution.
const std::vector<data::Sample>& fixture_test_samples();

inline constexpr int kFixtureResolution = 64;
inline constexpr std::uint64_t kFixtureTrainSeed = 11;
inline constexpr std::uint64_t kFixtureTestSeed = 4242;

ImageTensor random_image(int height, int width, std::mt19937_64& rng);

/// One coordinate of a gradient check: reverse-mode against central
/// differences.
struct GradientProbe {
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;

  double relative_error() const;
};

/// Checks d/dx' of ||x - x'||^2 + lambda * margin(D(x')) at `coords` random
/// pixels. Proposal boxes are those of x' at the test cap, held fixed while
/// x' moves.
std::vector<GradientProbe> loss_gradient_probes(const detector::DetectorWeights& detector,
                                                const ImageTensor& x, const ImageTensor& x_prime,
                                                double lambda, int coords, double h,
                                                std::uint64_t seed);

}  // namespace advgen::testing

#endif  // ADVGEN_TESTS_SUPPORT_HPP_
