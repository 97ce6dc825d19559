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

#ifndef ADVGEN_ATTACKS_HPP_
#define ADVGEN_ATTACKS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgen/data.hpp"
#include "advgen/detector.hpp"
#include "advgen/generator.hpp"
#include "advgen/image.hpp"
#include "advgen/losses.hpp"
#include "advgen/nn/adam.hpp"

namespace advgen::attacks {

/// How the per-image generator loop decides to stop early.
enum class LoopMode {
  /// Keep stepping while the squared L2 exceeds T and some proposal is still
  /// a face.
  kThresholdAndFaces,
  /// Keep stepping while some proposal is still a face, whatever the L2.
  kUntilFooled,
};

struct TrainConfig {
  double lambda = 1.0;
  /// Squared-L2 level below which the loop stops (kThresholdAndFaces).
  double threshold_T = 1.0;
  int max_iter_M = 10;
  /// Generator learning rate.
  double step_size = 1e-3;
  /// Face probability a clean proposal needs to enter the loss.
  double train_alpha = 0.7;
  /// Detection threshold deciding whether an attacked image is fooled.
  double eval_alpha = 0.7;
  int proposal_cap_train = detector::kTrainProposalCap;
  int proposal_cap_test = detector::kTestProposalCap;
  std::uint64_t seed = 0;
  LoopMode loop_mode = LoopMode::kThresholdAndFaces;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

std::string to_string(LoopMode mode);
LoopMode loop_mode_from_string(const std::string& s);

struct AttackResult {
  ImageTensor x_prime;
  generator::Perturbation delta;
  int iterations_used = 0;
  /// One entry per loss evaluation, the last one possibly without an update.
  std::vector<losses::LossBreakdown> loss_trace;
  /// Loss of the returned x' on the same proposal rows, when defined.
  std::optional<losses::LossBreakdown> final_loss;
  bool fooled = false;
  /// Detections left on x' at the evaluation threshold.
  int detections = 0;
  double wall_time = 0.0;
};

/// Rows of the scored proposal set whose face logit still beats background.
struct FooledSet {
  std::vector<int> indices;

  bool empty() const { return indices.empty(); }
  size_t size() const { return indices.size(); }
  static FooledSet from_logits(const nn::Tensor& logits);
};

struct IterationLog {
  std::string image_id;
  int m = 0;
  losses::LossBreakdown loss;
  int phi_size = 0;
  double wall_time = 0.0;  // seconds since the image's loop started

  nlohmann::json to_json() const;
};
using IterationSink = std::function<void(const IterationLog&)>;

/// Stateful per-image generator optimisation. The optimiser state carries
/// over from one image to the next, so a sequence of attack() calls is one
/// continuous training run.
class GeneratorTrainer {
 public:
  GeneratorTrainer(const detector::DetectorWeights& detector, generator::GeneratorWeights gen,
                   TrainConfig config);

  AttackResult attack(const ImageTensor& x, const std::string& image_id = {},
                      const IterationSink& sink = {});

  const generator::GeneratorWeights& weights() const { return gen_; }
  generator::GeneratorWeights release() { return std::move(gen_); }
  std::int64_t optimizer_steps() const { return adam_.steps_taken(); }

 private:
  detector::FrozenDetector detector_;
  generator::GeneratorWeights gen_;
  TrainConfig config_;
  nn::Adam adam_;
};

/// One image's inner loop with a fresh optimiser. Returns the updated
/// generator and the attack on `x` it produces.
std::pair<generator::GeneratorWeights, AttackResult> algorithm1_inner(
    const ImageTensor& x, const detector::DetectorWeights& detector,
    const generator::GeneratorWeights& gen, const TrainConfig& config);

struct TrainGeneratorOptions {
  /// Architecture of a freshly initialised generator.
  generator::GeneratorConfig generator;
  /// Continue from these weights instead of a fresh generator.
  const generator::GeneratorWeights* initial = nullptr;
  IterationSink on_iteration;
  std::function<void(int epoch, size_t index, const AttackResult&)> on_image;
};

/// Runs the inner loop over every image, in a freshly shuffled order each
/// epoch. Throws std::logic_error if the detector's hash changes.
generator::GeneratorWeights train_generator(const std::vector<data::Sample>& data,
                                            const detector::DetectorWeights& detector,
                                            const TrainConfig& config, int epochs,
                                            const TrainGeneratorOptions& options = {});
generator::GeneratorWeights train_generator(const data::ImageSet& data,
                                            const detector::DetectorWeights& detector,
                                            const TrainConfig& config, int epochs);

/// Feed-forward attack with a trained generator: one generator pass and one
/// apply to craft x', then a detection pass to fill in `fooled`.
AttackResult generator_attack(const ImageTensor& x, const detector::DetectorWeights& detector,
                              const generator::GeneratorWeights& gen, double eval_alpha = 0.7);

/// x' = clamp(x - epsilon * sign(grad_x J)), J the summed face margin over
/// the test-mode proposals of x.
ImageTensor fgsm_craft(const ImageTensor& x, const detector::FrozenDetector& detector,
                       double epsilon);
AttackResult fgsm_attack(const ImageTensor& x, const detector::DetectorWeights& detector,
                         double epsilon, double eval_alpha = 0.7);

struct CwOptions {
  double c = 1.0;
  int steps = 20;
  double step_size = 0.01;
  double eval_alpha = 0.7;
};

/// Gradient descent on ||delta||^2 + c * margin(x + delta), proposals
/// recomputed at every iterate and x + delta kept inside [-1, 1]. Returns the
/// smallest fooling iterate, or the last one if none fooled the detector.
AttackResult cw_attack(const ImageTensor& x, const detector::DetectorWeights& detector,
                       const CwOptions& options);
AttackResult cw_attack(const ImageTensor& x, const detector::DetectorWeights& detector, double c,
                       int steps, double step_size);
/// Same search as cw_attack, sharing an already bound detector.
AttackResult cw_attack(const ImageTensor& x, const detector::FrozenDetector& detector,
                       const CwOptions& options);

}  // namespace advgen::attacks

#endif  // ADVGEN_ATTACKS_HPP_
