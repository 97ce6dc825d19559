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

#include "advgen/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "advgen/nn/ops.hpp"

namespace advgen::attacks {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

bool keep_going(const TrainConfig& cfg, double l2, const FooledSet& phi) {
  if (phi.empty()) return false;
  return cfg.loop_mode == LoopMode::kUntilFooled || l2 > cfg.threshold_T;
}

// Training-mode proposals of one (possibly perturbed) image: the boxes
// whose face probability reaches the row threshold, and Phi over all of them.
struct RowSelection {
  size_t proposal_count = 0;
  std::vector<Box> rows;
  FooledSet phi;
};

RowSelection select_rows(const detector::FrozenDetector& det,
                         const detector::FrozenDetector::Heads& heads, int cap, double alpha) {
  const auto proposals = det.proposals_from(heads, cap);
  const nn::Tensor logits = det.classify(heads.features.detach(), proposals.boxes).value();
  const auto scores = detector::ScoreMatrix::from_tensor(logits);
  RowSelection out;
  out.proposal_count = proposals.size();
  out.phi = FooledSet::from_logits(logits);
  for (size_t i = 0; i < scores.rows(); ++i) {
    if (scores.face_probability(i) >= alpha) out.rows.push_back(proposals.boxes[i]);
  }
  return out;
}

struct Verdict {
  bool fooled;
  int detections;
};

Verdict judge(const detector::ProposalSet& proposals, const nn::Tensor& logits, double alpha) {
  const auto dets = detector::detections_from_scores(
      proposals, detector::ScoreMatrix::from_tensor(logits), alpha, detector::kDefaultNmsIou);
  return {dets.size() == 0, static_cast<int>(dets.size())};
}

Verdict judge(const detector::FrozenDetector& det, const ImageTensor& x, int cap, double alpha) {
  auto out = det.evaluate(nn::constant(x.tensor()), cap);
  return judge(out.proposals, out.logits.value(), alpha);
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1));
}

}  // namespace

void TrainConfig::validate() const {
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be positive");
  require(threshold_T > 0.0 && std::isfinite(threshold_T), "threshold_T must be positive");
  require(max_iter_M >= 0, "max_iter_M must be non-negative");
  require(step_size > 0.0 && std::isfinite(step_size), "step_size must be positive");
  require(train_alpha > 0.0 && train_alpha < 1.0, "train_alpha must lie in (0, 1)");
  require(eval_alpha > 0.0 && eval_alpha < 1.0, "eval_alpha must lie in (0, 1)");
  require(proposal_cap_train >= 1, "proposal_cap_train must be at least 1");
  require(proposal_cap_test >= 1, "proposal_cap_test must be at least 1");
}

std::string to_string(LoopMode mode) {
  return mode == LoopMode::kUntilFooled ? "until_fooled" : "threshold_and_faces";
}

LoopMode loop_mode_from_string(const std::string& s) {
  if (s == "threshold_and_faces") return LoopMode::kThresholdAndFaces;
  if (s == "until_fooled") return LoopMode::kUntilFooled;
  throw std::invalid_argument("unknown loop_mode '" + s +
                              "' (expected threshold_and_faces or until_fooled)");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda", lambda},
          {"threshold_T", threshold_T},
          {"max_iter_M", max_iter_M},
          {"step_size", step_size},
          {"train_alpha", train_alpha},
          {"eval_alpha", eval_alpha},
          {"proposal_cap_train", proposal_cap_train},
          {"proposal_cap_test", proposal_cap_test},
          {"seed", seed},
          {"loop_mode", to_string(loop_mode)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.threshold_T = j.at("threshold_T").get<double>();
  c.max_iter_M = j.at("max_iter_M").get<int>();
  c.step_size = j.at("step_size").get<double>();
  c.train_alpha = j.at("train_alpha").get<double>();
  c.eval_alpha = j.at("eval_alpha").get<double>();
  c.proposal_cap_train = j.at("proposal_cap_train").get<int>();
  c.proposal_cap_test = j.at("proposal_cap_test").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.loop_mode = loop_mode_from_string(j.at("loop_mode").get<std::string>());
  return c;
}

FooledSet FooledSet::from_logits(const nn::Tensor& logits) {
  FooledSet s;
  const int rows = logits.empty() ? 0 : logits.dim(0);
  for (int i = 0; i < rows; ++i) {
    if (logits[2 * i + detector::ScoreMatrix::kFace] >
        logits[2 * i + detector::ScoreMatrix::kBackground]) {
      s.indices.push_back(i);
    }
  }
  return s;
}

nlohmann::json IterationLog::to_json() const {
  return {{"image_id", image_id},       {"m", m},
          {"l2", loss.l2_term},         {"misclassify", loss.misclassify_term},
          {"total", loss.total},        {"phi_size", phi_size},
          {"wall_time", wall_time}};
}

GeneratorTrainer::GeneratorTrainer(const detector::DetectorWeights& detector,
                                   generator::GeneratorWeights gen, TrainConfig config)
    : detector_(detector),
      gen_(std::move(gen)),
      config_(config),
      adam_(gen_.params, nn::AdamOptions{.learning_rate = config.step_size}) {
  config_.validate();
  if (gen_.height != detector.config.input_height || gen_.width != detector.config.input_width) {
    throw std::invalid_argument("generator resolution does not match the detector input");
  }
}

AttackResult GeneratorTrainer::attack(const ImageTensor& x, const std::string& image_id,
                                      const IterationSink& sink) {
  const auto start = Clock::now();
  const nn::Var x_const = nn::constant(x.tensor());
  AttackResult result;

  const RowSelection clean = select_rows(detector_, detector_.run_backbone(x_const),
                                         config_.proposal_cap_train, config_.train_alpha);
  // Each pass scores the current x' and stops before updating once the
  // guard fails, so at most M updates follow M + 1 evaluations. The L2 test
  // starts with the second pass: a generator that begins at delta = 0 would
  // otherwise never take a step.
  int m = 0;
  if (clean.proposal_count > 0 && !clean.phi.empty()) {
    while (true) {
      const nn::BoundParams params(gen_.params, /*trainable=*/true);
      nn::Var delta = generator::forward(params, gen_.config, x_const);
      nn::Var x_prime = generator::apply(x_const, delta);
      const auto heads = detector_.run_backbone(x_prime);
      RowSelection current =
          select_rows(detector_, heads, config_.proposal_cap_train, config_.train_alpha);
      nn::Var logits = detector_.classify(heads.features, current.rows);
      losses::LossGraph loss;
      try {
        loss = losses::total_loss(x_const, x_prime, logits, config_.lambda);
      } catch (const losses::NonFiniteLoss& e) {
        throw losses::NonFiniteLoss(std::string(e.what()) + " at iteration " +
                                    std::to_string(m) +
                                    (image_id.empty() ? "" : " of image " + image_id));
      }
      result.loss_trace.push_back(loss.breakdown);
      if (sink) {
        sink(IterationLog{image_id, m, loss.breakdown, static_cast<int>(current.phi.size()),
                          seconds_since(start)});
      }
      const double l2 = m == 0 ? std::numeric_limits<double>::infinity() : loss.breakdown.l2_term;
      if (m >= config_.max_iter_M || !keep_going(config_, l2, current.phi)) break;
      nn::backward(loss.total);
      const auto grads = params.gradients();
      adam_.step(gen_.params, grads);
      ++m;
    }
  }
  result.iterations_used = m;

  // Final attack with the updated weights; one backbone pass serves both the
  // test-mode verdict and the training-mode loss.
  result.delta = generator::generate(x, gen_);
  result.x_prime = generator::apply(x, result.delta);
  const auto heads = detector_.run_backbone(nn::constant(result.x_prime.tensor()));
  const auto test_props = detector_.proposals_from(heads, config_.proposal_cap_test);
  const auto verdict = judge(test_props, detector_.classify(heads.features, test_props.boxes).value(),
                             config_.eval_alpha);
  result.fooled = verdict.fooled;
  result.detections = verdict.detections;
  if (clean.proposal_count > 0) {
    const RowSelection last =
        select_rows(detector_, heads, config_.proposal_cap_train, config_.train_alpha);
    result.final_loss = losses::total_loss(
        x, result.x_prime,
        detector::ScoreMatrix::from_tensor(detector_.classify(heads.features, last.rows).value()),
        config_.lambda);
  }
  result.wall_time = seconds_since(start);
  return result;
}

std::pair<generator::GeneratorWeights, AttackResult> algorithm1_inner(
    const ImageTensor& x, const detector::DetectorWeights& detector,
    const generator::GeneratorWeights& gen, const TrainConfig& config) {
  const std::string before = detector::weights_hash(detector);
  GeneratorTrainer trainer(detector, gen, config);
  AttackResult result = trainer.attack(x);
  if (detector::weights_hash(detector) != before) {
    throw std::logic_error("detector weights changed during the attack");
  }
  return {trainer.release(), std::move(result)};
}

generator::GeneratorWeights train_generator(const std::vector<data::Sample>& data,
                                            const detector::DetectorWeights& detector,
                                            const TrainConfig& config, int epochs,
                                            const TrainGeneratorOptions& options) {
  config.validate();
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  const std::string before = detector::weights_hash(detector);
  generator::GeneratorWeights initial =
      options.initial ? *options.initial
                      : generator::init_generator(options.generator, detector.config.input_height,
                                                  detector.config.input_width, config.seed);
  const int start_epoch = initial.epochs;
  GeneratorTrainer trainer(detector, std::move(initial), config);

  std::vector<size_t> order(data.size());
  for (int epoch = start_epoch; epoch < start_epoch + epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 rng(epoch_seed(config.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t k = 0; k < order.size(); ++k) {
      const auto& sample = data[order[k]];
      AttackResult r = trainer.attack(sample.image, sample.name, options.on_iteration);
      if (options.on_image) options.on_image(epoch, order[k], r);
    }
  }
  generator::GeneratorWeights out = trainer.release();
  out.epochs = start_epoch + epochs;
  out.training = {{"attack", config.to_json()}, {"images", data.size()}};
  if (detector::weights_hash(detector) != before) {
    throw std::logic_error("detector weights changed during generator training");
  }
  return out;
}

generator::GeneratorWeights train_generator(const data::ImageSet& data,
                                            const detector::DetectorWeights& detector,
                                            const TrainConfig& config, int epochs) {
  const data::Size size{detector.config.input_height, detector.config.input_width};
  return train_generator(data::prepare(data, size), detector, config, epochs);
}

AttackResult generator_attack(const ImageTensor& x, const detector::DetectorWeights& detector,
                              const generator::GeneratorWeights& gen, double eval_alpha) {
  const auto start = Clock::now();
  AttackResult r;
  r.delta = generator::generate(x, gen);
  r.x_prime = generator::apply(x, r.delta);
  const auto verdict = judge(detector::FrozenDetector(detector), r.x_prime,
                             detector::kTestProposalCap, eval_alpha);
  r.fooled = verdict.fooled;
  r.detections = verdict.detections;
  r.wall_time = seconds_since(start);
  return r;
}

ImageTensor fgsm_craft(const ImageTensor& x, const detector::FrozenDetector& detector,
                       double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("epsilon must be non-negative");
  }
  nn::Var input = nn::leaf(x.tensor());
  auto out = detector.evaluate(input, detector::kTestProposalCap);
  nn::Var j = nn::face_margin_hinge(out.logits);
  nn::Tensor values = x.tensor();
  if (j.requires_grad()) {
    nn::backward(j);
    const nn::Tensor& g = input.grad();
    for (size_t i = 0; i < values.size(); ++i) {
      const double s = g.empty() ? 0.0 : (g[i] > 0.0) - (g[i] < 0.0);
      values[i] = std::clamp(values[i] - epsilon * s, -1.0, 1.0);
    }
  }
  return ImageTensor::from_tensor(std::move(values));
}

AttackResult fgsm_attack(const ImageTensor& x, const detector::DetectorWeights& detector,
                         double epsilon, double eval_alpha) {
  const auto start = Clock::now();
  const detector::FrozenDetector det(detector);
  AttackResult r;
  r.x_prime = fgsm_craft(x, det, epsilon);
  nn::Tensor d = r.x_prime.tensor();
  for (size_t i = 0; i < d.size(); ++i) d[i] -= x.tensor()[i];
  r.delta.values = std::move(d);
  r.iterations_used = 1;
  const auto verdict = judge(det, r.x_prime, detector::kTestProposalCap, eval_alpha);
  r.fooled = verdict.fooled;
  r.detections = verdict.detections;
  r.wall_time = seconds_since(start);
  return r;
}

AttackResult cw_attack(const ImageTensor& x, const detector::FrozenDetector& det,
                       const CwOptions& options) {
  if (!(options.c > 0.0) || !std::isfinite(options.c)) throw std::invalid_argument("c must be positive");
  if (options.steps < 1) throw std::invalid_argument("steps must be at least 1");
  if (!(options.step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  const auto start = Clock::now();
  const nn::Var x_const = nn::constant(x.tensor());
  const nn::Tensor& xv = x.tensor();
  nn::Tensor delta(xv.shape());

  AttackResult best;
  double best_norm = std::numeric_limits<double>::infinity();
  std::vector<losses::LossBreakdown> trace;

  // Iterate k is scored when it is evaluated, so steps updates need
  // steps + 1 evaluations.
  for (int k = 0; k <= options.steps; ++k) {
    nn::Var d = nn::leaf(delta);
    nn::Var x_prime = nn::add(x_const, d);
    auto out = det.evaluate(x_prime, detector::kTestProposalCap);
    losses::LossGraph loss;
    try {
      loss = losses::total_loss(x_const, x_prime, out.logits, options.c);
    } catch (const losses::NonFiniteLoss& e) {
      throw losses::NonFiniteLoss(std::string(e.what()) + " at iteration " + std::to_string(k));
    }
    const auto verdict = judge(out.proposals, out.logits.value(), options.eval_alpha);
    const double norm = std::sqrt(loss.breakdown.l2_term);
    // Fooling iterates beat the rest, then the smaller one wins; without any
    // fooling iterate the latest one stands.
    const bool take = verdict.fooled ? (!best.fooled || norm < best_norm) : !best.fooled;
    if (k > 0 && take) {
      best.x_prime = ImageTensor::from_tensor(x_prime.value());
      best.delta.values = delta;
      best.fooled = verdict.fooled;
      best.detections = verdict.detections;
      best.iterations_used = k;
      best_norm = norm;
    }
    if (k == options.steps) break;
    trace.push_back(loss.breakdown);
    nn::backward(loss.total);
    const nn::Tensor& g = d.grad();
    for (size_t i = 0; i < delta.size(); ++i) {
      const double step = g.empty() ? 0.0 : g[i];
      // Projection keeps x + delta inside the pixel range.
      delta[i] = std::clamp(delta[i] - options.step_size * step, -1.0 - xv[i], 1.0 - xv[i]);
    }
  }
  best.loss_trace = std::move(trace);
  best.wall_time = seconds_since(start);
  return best;
}

AttackResult cw_attack(const ImageTensor& x, const detector::DetectorWeights& detector,
                       const CwOptions& options) {
  return cw_attack(x, detector::FrozenDetector(detector), options);
}

AttackResult cw_attack(const ImageTensor& x, const detector::DetectorWeights& detector, double c,
                       int steps, double step_size) {
  return cw_attack(x, detector, CwOptions{.c = c, .steps = steps, .step_size = step_size});
}

}  // namespace advgen::attacks
