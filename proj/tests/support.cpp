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

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "advgen/losses.hpp"
#include "advgen/nn/graph.hpp"

namespace advgen::testing {

std::filesystem::path fixture_dir() {
  if (const char* env = std::getenv("ADVGEN_FIXTURE_DIR"); env && *env) return env;
  return ADVGEN_DEFAULT_FIXTURE_DIR;
}

const detector::DetectorWeights& fixture_detector() {
  static const detector::DetectorWeights w = detector::load_detector(fixture_dir() / "detector.ckpt");
  return w;
}

const generator::GeneratorWeights& fixture_generator() {
  static const generator::GeneratorWeights w =
      generator::load_generator(fixture_dir() / "generator.ckpt");
  return w;
}

const std::vector<data::Sample>& fixture_test_samples() {
  static const std::vector<data::Sample> s = data::prepare(
      data::synth_faces(24, {128, 128}, kFixtureTestSeed), {kFixtureResolution, kFixtureResolution});
  return s;
}

ImageTensor random_image(int height, int width, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Tensor t({3, height, width});
  for (double& v : t.values()) v = u(rng);
  return ImageTensor::from_tensor(std::move(t));
}

double GradientProbe::relative_error() const {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

std::vector<GradientProbe> loss_gradient_probes(const detector::DetectorWeights& detector,
                                                const ImageTensor& x, const ImageTensor& x_prime,
                                                double lambda, int coords, double h,
                                                std::uint64_t seed) {
  const detector::FrozenDetector det(detector);
  const std::vector<Box> boxes =
      det.proposals_from(det.run_backbone(nn::constant(x_prime.tensor())),
                         detector::kTestProposalCap)
          .boxes;
  const nn::Var clean = nn::constant(x.tensor());
  auto loss_at = [&](const nn::Var& xp) {
    const nn::Var logits = det.classify(det.run_backbone(xp).features, boxes);
    return losses::total_loss(clean, xp, logits, lambda).total;
  };

  nn::Var leaf = nn::leaf(x_prime.tensor());
  nn::backward(loss_at(leaf));
  const nn::Tensor grad = leaf.grad();

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, x_prime.size() - 1);
  std::vector<GradientProbe> out;
  for (int k = 0; k < coords; ++k) {
    const size_t i = pick(rng);
    nn::Tensor plus = x_prime.tensor(), minus = x_prime.tensor();
    plus[i] += h;
    minus[i] -= h;
    const double numeric =
        (loss_at(nn::constant(plus)).value()[0] - loss_at(nn::constant(minus)).value()[0]) /
        (2 * h);
    out.push_back({i, grad[i], numeric});
  }
  return out;
}

}  // namespace advgen::testing
