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

#ifndef ADVGEN_DETECTOR_HPP_
#define ADVGEN_DETECTOR_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgen/data.hpp"
#include "advgen/image.hpp"
#include "advgen/nn/adam.hpp"
#include "advgen/nn/graph.hpp"
#include "advgen/nn/params.hpp"

// A small two-stage detector: a convolutional backbone, a region proposal
// head over a dense anchor grid, and a per-proposal face/background
// classifier fed by fixed-size bilinear crops of the backbone features.

namespace advgen::detector {

/// Training-mode proposal cap.
inline constexpr int kTrainProposalCap = 2000;
/// Test-mode proposal cap.
inline constexpr int kTestProposalCap = 300;
inline constexpr double kDefaultNmsIou = 0.5;

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Anchor {
  double center_x = 0, center_y = 0;
  double scale = 0;         // sqrt(area), pixels
  double aspect_ratio = 1;  // height / width
  Box box() const;
};

struct DetectorConfig {
  int input_height = 64;
  int input_width = 64;
  int feature_stride = 4;
  std::array<double, 3> anchor_scales{12.0, 19.2, 28.8};
  std::array<double, 3> aspect_ratios{1.0, 1.25, 1.5};
  int roi_size = 4;
  int backbone_channels = 32;
  int classifier_hidden = 64;
  /// Minimum objectness probability for an anchor to become a proposal.
  double objectness_floor = 0.0;
  double nms_iou = kDefaultNmsIou;

  /// Anchor scales proportional to the input size.
  static DetectorConfig for_resolution(int height, int width);
  int feature_height() const { return input_height / feature_stride; }
  int feature_width() const { return input_width / feature_stride; }
  int anchors_per_cell() const { return 9; }

  nlohmann::json to_json() const;
  static DetectorConfig from_json(const nlohmann::json& j);
};

/// Proposals sorted by descending objectness, clipped to the image.
struct ProposalSet {
  std::vector<Box> boxes;
  std::vector<double> objectness;  // probabilities
  std::vector<int> anchor_index;
  int capped_n = 0;

  size_t size() const { return boxes.size(); }
};

/// Unnormalised per-proposal class scores, columns (background, face).
struct ScoreMatrix {
  static constexpr int kBackground = 0;
  static constexpr int kFace = 1;

  std::vector<std::array<double, 2>> logits;

  size_t rows() const { return logits.size(); }
  double face_probability(size_t row) const;
  static ScoreMatrix from_tensor(const nn::Tensor& t);
};

struct DetectionList {
  std::vector<Box> boxes;
  std::vector<double> confidences;
  double threshold_used = 0.0;

  size_t size() const { return boxes.size(); }
};

struct DetectorWeights {
  static constexpr const char* kVersion = "advgen-detector/1";

  DetectorConfig config;
  nn::ParamSet params;
  int epochs = 0;
  std::uint64_t seed = 0;
  std::vector<double> epoch_losses;
  /// Optimiser moments, kept so training can resume exactly.
  std::optional<nn::ParamSet> optimizer_state;
  std::int64_t optimizer_steps = 0;
};

DetectorWeights init_detector(const DetectorConfig& config, std::uint64_t seed);

std::string serialize(const DetectorWeights& weights);
DetectorWeights parse_detector(std::string_view bytes);
void save(const DetectorWeights& weights, const std::filesystem::path& path);
DetectorWeights load_detector(const std::filesystem::path& path);
/// SHA-256 of the serialised checkpoint.
std::string weights_hash(const DetectorWeights& weights);

std::vector<Anchor> make_anchors(const DetectorConfig& config);

/// Number of backbone evaluations performed by this process.
std::uint64_t evaluation_count();

/// Read-only view of trained weights for repeated (possibly differentiable)
/// evaluation. Weights enter the graph as constants: gradients reach the
/// input image, never the parameters.
class FrozenDetector {
 public:
  explicit FrozenDetector(const DetectorWeights& weights);

  const DetectorConfig& config() const { return config_; }

  struct Heads {
    nn::Var features;
    nn::Var objectness;  // {A, Hf, Wf} logits
    nn::Var deltas;      // {4A, Hf, Wf}
  };
  Heads run_backbone(const nn::Var& image) const;
  ProposalSet proposals_from(const Heads& heads, int cap) const;
  /// {N, 2} logits for the given boxes.
  nn::Var classify(const nn::Var& features, std::span<const Box> boxes) const;

  /// Full D(x): proposals on `image` and their logits, sharing one backbone
  /// pass.
  struct Output {
    ProposalSet proposals;
    nn::Var logits;
  };
  Output evaluate(const nn::Var& image, int cap) const;

 private:
  DetectorConfig config_;
  nn::BoundParams params_;
  std::vector<Anchor> anchors_;
};

ProposalSet propose(const ImageTensor& x, const DetectorWeights& weights, int cap);
ScoreMatrix score(const ImageTensor& x, const ProposalSet& proposals,
                  const DetectorWeights& weights);
DetectionList detect(const ImageTensor& x, const DetectorWeights& weights, double alpha,
                     int cap = kTestProposalCap, double nms_iou = kDefaultNmsIou);

/// Threshold, softmax and NMS on already computed scores.
DetectionList detections_from_scores(const ProposalSet& proposals, const ScoreMatrix& scores,
                                     double alpha, double nms_iou);

/// Greedy NMS: repeatedly keep the highest-scoring remaining box and drop
/// every box whose IoU with it exceeds `iou_threshold`. Equal scores keep the
/// lower index first. Returns kept indices in keep order.
std::vector<int> nms(std::span<const Box> boxes, std::span<const double> scores,
                     double iou_threshold);

struct TrainDetectorOptions {
  int epochs = 20;
  std::uint64_t seed = 0;
  nn::AdamOptions adam{};
  int rpn_batch = 64;
  double rpn_positive_fraction = 0.5;
  int roi_batch = 32;
  double roi_positive_fraction = 0.5;
  int proposal_cap = kTrainProposalCap;

  struct EpochLog {
    int epoch;  // zero-based
    double mean_loss;
    double rpn_objectness_loss;
    double rpn_box_loss;
    double classifier_loss;
    double seconds;
  };
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains on clean images only. With `resume_from`, continues that run
/// (weights, optimiser state and epoch counter) up to `options.epochs`.
/// Throws DivergenceError if the loss becomes non-finite.
DetectorWeights train_detector(const std::vector<data::Sample>& data,
                               const DetectorConfig& config,
                               const TrainDetectorOptions& options,
                               const DetectorWeights* resume_from = nullptr);
DetectorWeights train_detector(const data::ImageSet& data, int epochs, std::uint64_t seed);

}  // namespace advgen::detector

#endif  // ADVGEN_DETECTOR_HPP_
