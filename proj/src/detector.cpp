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

#include "advgen/detector.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "advgen/checkpoint.hpp"
#include "advgen/image_io.hpp"
#include "advgen/nn/ops.hpp"

namespace advgen::detector {
namespace {

std::atomic<std::uint64_t> g_evaluations{0};

// Clamp on predicted log-scale deltas, as in the usual two-stage recipe.
const double kMaxLogScale = std::log(1000.0 / 16.0);

struct ConvSpec {
  const char* name;
  int stride;
  int pad;
};
constexpr ConvSpec kBackbone[] = {
    {"backbone.conv1", 1, 1},
    {"backbone.conv2", 2, 1},
    {"backbone.conv3", 2, 1},
    {"backbone.conv4", 1, 1},
};

nn::Var conv(const nn::BoundParams& p, const std::string& name, const nn::Var& x, int stride,
             int pad) {
  return nn::conv2d(x, p[name + ".w"], p[name + ".b"], stride, pad);
}

FrozenDetector::Heads run_heads(const nn::BoundParams& p, const DetectorConfig& cfg,
                                const nn::Var& image) {
  const auto& shape = image.value().shape();
  if (shape.size() != 3 || shape[0] != 3 || shape[1] != cfg.input_height ||
      shape[2] != cfg.input_width) {
    throw std::invalid_argument("detector expects a {3, " + std::to_string(cfg.input_height) +
                                ", " + std::to_string(cfg.input_width) + "} image, got " +
                                image.value().shape_string());
  }
  g_evaluations.fetch_add(1, std::memory_order_relaxed);
  nn::Var h = image;
  for (const auto& spec : kBackbone) h = nn::relu(conv(p, spec.name, h, spec.stride, spec.pad));
  nn::Var r = nn::relu(conv(p, "rpn.conv", h, 1, 1));
  return {h, conv(p, "rpn.objectness", r, 1, 0), conv(p, "rpn.deltas", r, 1, 0)};
}

nn::Var run_classifier(const nn::BoundParams& p, const DetectorConfig& cfg,
                       const nn::Var& features, std::span<const Box> boxes) {
  std::vector<nn::BoxCoords> coords;
  coords.reserve(boxes.size());
  for (const auto& b : boxes) coords.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
  nn::Var crops = nn::roi_crop(features, coords, 1.0 / cfg.feature_stride, cfg.roi_size);
  nn::Var hidden = nn::relu(nn::linear(crops, p["classifier.fc1.w"], p["classifier.fc1.b"]));
  return nn::linear(hidden, p["classifier.fc2.w"], p["classifier.fc2.b"]);
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Box decode(const Anchor& a, const double d[4], int height, int width) {
  const Box ab = a.box();
  const double aw = ab.width(), ah = ab.height();
  const double cx = a.center_x + d[0] * aw;
  const double cy = a.center_y + d[1] * ah;
  const double w = aw * std::exp(std::min(d[2], kMaxLogScale));
  const double h = ah * std::exp(std::min(d[3], kMaxLogScale));
  Box b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  b.x_min = std::clamp(b.x_min, 0.0, static_cast<double>(width));
  b.x_max = std::clamp(b.x_max, 0.0, static_cast<double>(width));
  b.y_min = std::clamp(b.y_min, 0.0, static_cast<double>(height));
  b.y_max = std::clamp(b.y_max, 0.0, static_cast<double>(height));
  return b;
}

ProposalSet decode_proposals(const DetectorConfig& cfg, const std::vector<Anchor>& anchors,
                             const FrozenDetector::Heads& heads, int cap) {
  if (cap < 1) throw std::invalid_argument("proposal cap must be >= 1");
  const int fh = cfg.feature_height(), fw = cfg.feature_width();
  const int per_cell = cfg.anchors_per_cell();
  const size_t plane = static_cast<size_t>(fh) * fw;
  const nn::Tensor& obj = heads.objectness.value();
  const nn::Tensor& del = heads.deltas.value();

  std::vector<int> candidates;
  std::vector<double> prob(anchors.size());
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      for (int k = 0; k < per_cell; ++k) {
        const int a = (y * fw + x) * per_cell + k;
        prob[static_cast<size_t>(a)] = sigmoid(obj[k * plane + y * fw + x]);
        if (prob[static_cast<size_t>(a)] >= cfg.objectness_floor) candidates.push_back(a);
      }
    }
  }
  const size_t keep = std::min(candidates.size(), static_cast<size_t>(cap));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep),
                    candidates.end(), [&](int a, int b) {
                      const double pa = prob[static_cast<size_t>(a)];
                      const double pb = prob[static_cast<size_t>(b)];
                      return pa > pb || (pa == pb && a < b);
                    });

  ProposalSet out;
  out.capped_n = cap;
  out.boxes.reserve(keep);
  for (size_t i = 0; i < keep; ++i) {
    const int a = candidates[i];
    const int k = a % per_cell;
    const int cell = a / per_cell;
    const int y = cell / fw, x = cell % fw;
    double d[4];
    for (int c = 0; c < 4; ++c) d[c] = del[(k * 4 + c) * plane + y * fw + x];
    out.boxes.push_back(decode(anchors[static_cast<size_t>(a)], d, cfg.input_height,
                               cfg.input_width));
    out.objectness.push_back(prob[static_cast<size_t>(a)]);
    out.anchor_index.push_back(a);
  }
  return out;
}

nn::Var image_var(const ImageTensor& x) { return nn::constant(x.tensor()); }

std::vector<double> iou_row(const Box& b, const std::vector<Box>& gts) {
  std::vector<double> out;
  out.reserve(gts.size());
  for (const auto& g : gts) out.push_back(iou(b, g));
  return out;
}

nlohmann::json weights_metadata(const DetectorWeights& w) {
  return {{"version", DetectorWeights::kVersion},
          {"seed", w.seed},
          {"epochs", w.epochs},
          {"input_resolution", {w.config.input_height, w.config.input_width}},
          {"config", w.config.to_json()},
          {"epoch_losses", w.epoch_losses},
          {"optimizer_steps", w.optimizer_steps}};
}

}  // namespace

Box Anchor::box() const {
  const double w = scale / std::sqrt(aspect_ratio);
  const double h = scale * std::sqrt(aspect_ratio);
  return {center_x - w / 2, center_y - h / 2, center_x + w / 2, center_y + h / 2};
}

DetectorConfig DetectorConfig::for_resolution(int height, int width) {
  DetectorConfig cfg;
  cfg.input_height = height;
  cfg.input_width = width;
  const double side = std::min(height, width);
  cfg.anchor_scales = {side * 0.1875, side * 0.3, side * 0.45};
  return cfg;
}

nlohmann::json DetectorConfig::to_json() const {
  return {{"input_height", input_height},
          {"input_width", input_width},
          {"feature_stride", feature_stride},
          {"anchor_scales", anchor_scales},
          {"aspect_ratios", aspect_ratios},
          {"roi_size", roi_size},
          {"backbone_channels", backbone_channels},
          {"classifier_hidden", classifier_hidden},
          {"objectness_floor", objectness_floor},
          {"nms_iou", nms_iou}};
}

DetectorConfig DetectorConfig::from_json(const nlohmann::json& j) {
  DetectorConfig c;
  c.input_height = j.at("input_height").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.feature_stride = j.at("feature_stride").get<int>();
  c.anchor_scales = j.at("anchor_scales").get<std::array<double, 3>>();
  c.aspect_ratios = j.at("aspect_ratios").get<std::array<double, 3>>();
  c.roi_size = j.at("roi_size").get<int>();
  c.backbone_channels = j.at("backbone_channels").get<int>();
  c.classifier_hidden = j.at("classifier_hidden").get<int>();
  c.objectness_floor = j.at("objectness_floor").get<double>();
  c.nms_iou = j.at("nms_iou").get<double>();
  return c;
}

double ScoreMatrix::face_probability(size_t row) const {
  const auto& z = logits.at(row);
  return 1.0 / (1.0 + std::exp(z[kBackground] - z[kFace]));
}

ScoreMatrix ScoreMatrix::from_tensor(const nn::Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 2) {
    throw std::invalid_argument("score tensor must be {N, 2}, got " + t.shape_string());
  }
  ScoreMatrix s;
  s.logits.resize(static_cast<size_t>(t.dim(0)));
  for (size_t i = 0; i < s.logits.size(); ++i) s.logits[i] = {t[2 * i], t[2 * i + 1]};
  return s;
}

DetectorWeights init_detector(const DetectorConfig& config, std::uint64_t seed) {
  if (config.input_height % config.feature_stride || config.input_width % config.feature_stride) {
    throw std::invalid_argument("detector input size must be a multiple of the feature stride");
  }
  if (config.feature_stride != 4) throw std::invalid_argument("backbone has a fixed stride of 4");
  std::mt19937_64 rng(seed);
  DetectorWeights w;
  w.config = config;
  w.seed = seed;
  const int c = config.backbone_channels;
  const std::array<std::array<int, 2>, 4> io = {{{3, 16}, {16, c}, {c, c}, {c, c}}};
  for (size_t i = 0; i < 4; ++i) {
    const std::string name = kBackbone[i].name;
    w.params.add(name + ".w", nn::he_normal({io[i][1], io[i][0], 3, 3}, rng));
    w.params.add(name + ".b", nn::Tensor({io[i][1]}));
  }
  w.params.add("rpn.conv.w", nn::he_normal({c, c, 3, 3}, rng));
  w.params.add("rpn.conv.b", nn::Tensor({c}));

  auto small = [&rng](std::vector<int> shape) {
    nn::Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, 0.01);
    for (double& v : t.values()) v = dist(rng);
    return t;
  };
  const int a = config.anchors_per_cell();
  w.params.add("rpn.objectness.w", small({a, c, 1, 1}));
  w.params.add("rpn.objectness.b", nn::Tensor({a}));
  w.params.add("rpn.deltas.w", small({4 * a, c, 1, 1}));
  w.params.add("rpn.deltas.b", nn::Tensor({4 * a}));

  const int roi_dim = c * config.roi_size * config.roi_size;
  w.params.add("classifier.fc1.w", nn::he_normal({config.classifier_hidden, roi_dim}, rng));
  w.params.add("classifier.fc1.b", nn::Tensor({config.classifier_hidden}));
  w.params.add("classifier.fc2.w", small({2, config.classifier_hidden}));
  w.params.add("classifier.fc2.b", nn::Tensor({2}));
  return w;
}

std::string serialize(const DetectorWeights& weights) {
  Checkpoint ckpt;
  ckpt.kind = "detector";
  ckpt.metadata = weights_metadata(weights);
  ckpt.sections.emplace_back("params", weights.params);
  if (weights.optimizer_state) ckpt.sections.emplace_back("optimizer", *weights.optimizer_state);
  return serialize_checkpoint(ckpt);
}

DetectorWeights parse_detector(std::string_view bytes) {
  Checkpoint ckpt = parse_checkpoint(bytes);
  if (ckpt.kind != "detector") {
    throw CheckpointError("expected a detector checkpoint, found '" + ckpt.kind + "'");
  }
  DetectorWeights w;
  try {
    const auto& m = ckpt.metadata;
    w.config = DetectorConfig::from_json(m.at("config"));
    w.seed = m.at("seed").get<std::uint64_t>();
    w.epochs = m.at("epochs").get<int>();
    w.epoch_losses = m.at("epoch_losses").get<std::vector<double>>();
    w.optimizer_steps = m.at("optimizer_steps").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad detector metadata: ") + e.what());
  }
  w.params = ckpt.section("params");
  if (ckpt.has_section("optimizer")) w.optimizer_state = ckpt.section("optimizer");
  const DetectorWeights reference = init_detector(w.config, 0);
  if (reference.params.entries().size() != w.params.entries().size()) {
    throw CheckpointError("detector checkpoint does not match the architecture");
  }
  for (size_t i = 0; i < w.params.entries().size(); ++i) {
    const auto& want = reference.params.entries()[i];
    const auto& got = w.params.entries()[i];
    if (want.name != got.name || !want.value.same_shape(got.value)) {
      throw CheckpointError("detector parameter mismatch at " + got.name);
    }
  }
  return w;
}

void save(const DetectorWeights& weights, const std::filesystem::path& path) {
  io::write_file(path, serialize(weights));
}

DetectorWeights load_detector(const std::filesystem::path& path) {
  return parse_detector(io::read_file(path));
}

std::string weights_hash(const DetectorWeights& weights) { return sha256_hex(serialize(weights)); }

std::vector<Anchor> make_anchors(const DetectorConfig& config) {
  std::vector<Anchor> anchors;
  const int fh = config.feature_height(), fw = config.feature_width();
  anchors.reserve(static_cast<size_t>(fh) * fw * config.anchors_per_cell());
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      for (double s : config.anchor_scales) {
        for (double r : config.aspect_ratios) {
          anchors.push_back({(x + 0.5) * config.feature_stride, (y + 0.5) * config.feature_stride,
                             s, r});
        }
      }
    }
  }
  return anchors;
}

std::uint64_t evaluation_count() { return g_evaluations.load(); }

FrozenDetector::FrozenDetector(const DetectorWeights& weights)
    : config_(weights.config),
      params_(weights.params, /*trainable=*/false),
      anchors_(make_anchors(weights.config)) {}

FrozenDetector::Heads FrozenDetector::run_backbone(const nn::Var& image) const {
  return run_heads(params_, config_, image);
}

ProposalSet FrozenDetector::proposals_from(const Heads& heads, int cap) const {
  return decode_proposals(config_, anchors_, heads, cap);
}

nn::Var FrozenDetector::classify(const nn::Var& features, std::span<const Box> boxes) const {
  return run_classifier(params_, config_, features, boxes);
}

FrozenDetector::Output FrozenDetector::evaluate(const nn::Var& image, int cap) const {
  Heads heads = run_backbone(image);
  ProposalSet proposals = proposals_from(heads, cap);
  nn::Var logits = classify(heads.features, proposals.boxes);
  return {std::move(proposals), std::move(logits)};
}

ProposalSet propose(const ImageTensor& x, const DetectorWeights& weights, int cap) {
  FrozenDetector det(weights);
  return det.proposals_from(det.run_backbone(image_var(x)), cap);
}

ScoreMatrix score(const ImageTensor& x, const ProposalSet& proposals,
                  const DetectorWeights& weights) {
  FrozenDetector det(weights);
  auto heads = det.run_backbone(image_var(x));
  return ScoreMatrix::from_tensor(det.classify(heads.features, proposals.boxes).value());
}

DetectionList detections_from_scores(const ProposalSet& proposals, const ScoreMatrix& scores,
                                     double alpha, double nms_iou) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("nms_iou must lie in (0, 1]");
  if (scores.rows() != proposals.size()) {
    throw std::invalid_argument("score rows do not match proposal count");
  }
  std::vector<Box> boxes;
  std::vector<double> conf;
  for (size_t i = 0; i < proposals.size(); ++i) {
    const double p = scores.face_probability(i);
    if (p >= alpha) {
      boxes.push_back(proposals.boxes[i]);
      conf.push_back(p);
    }
  }
  DetectionList out;
  out.threshold_used = alpha;
  for (int k : nms(boxes, conf, nms_iou)) {
    out.boxes.push_back(boxes[static_cast<size_t>(k)]);
    out.confidences.push_back(conf[static_cast<size_t>(k)]);
  }
  return out;
}

DetectionList detect(const ImageTensor& x, const DetectorWeights& weights, double alpha, int cap,
                     double nms_iou) {
  FrozenDetector det(weights);
  auto out = det.evaluate(image_var(x), cap);
  return detections_from_scores(out.proposals, ScoreMatrix::from_tensor(out.logits.value()), alpha,
                                nms_iou);
}

std::vector<int> nms(std::span<const Box> boxes, std::span<const double> scores,
                     double iou_threshold) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms: boxes/scores size mismatch");
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<size_t>(a)] > scores[static_cast<size_t>(b)];
  });
  std::vector<int> keep;
  std::vector<bool> suppressed(boxes.size(), false);
  for (size_t i = 0; i < order.size(); ++i) {
    const int a = order[i];
    if (suppressed[static_cast<size_t>(a)]) continue;
    keep.push_back(a);
    for (size_t j = i + 1; j < order.size(); ++j) {
      const int b = order[j];
      if (!suppressed[static_cast<size_t>(b)] &&
          iou(boxes[static_cast<size_t>(a)], boxes[static_cast<size_t>(b)]) > iou_threshold) {
        suppressed[static_cast<size_t>(b)] = true;
      }
    }
  }
  return keep;
}

DetectorWeights train_detector(const std::vector<data::Sample>& data, const DetectorConfig& config,
                               const TrainDetectorOptions& options,
                               const DetectorWeights* resume_from) {
  size_t positives = 0;
  for (const auto& s : data) {
    if (s.image.height() != config.input_height || s.image.width() != config.input_width) {
      throw std::invalid_argument("training sample " + s.name +
                                  " does not match the detector input resolution");
    }
    positives += s.boxes.size();
  }
  if (positives == 0) throw std::invalid_argument("training data has no positive boxes");

  DetectorWeights weights = resume_from ? *resume_from : init_detector(config, options.seed);
  nn::Adam adam(weights.params, options.adam);
  if (resume_from && resume_from->optimizer_state) {
    adam.restore(*resume_from->optimizer_state, resume_from->optimizer_steps);
  }
  const std::vector<Anchor> anchors = make_anchors(weights.config);
  std::vector<Box> anchor_boxes;
  for (const auto& a : anchors) anchor_boxes.push_back(a.box());

  for (int epoch = weights.epochs; epoch < options.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(options.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch + 1)));
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    double sum_total = 0, sum_obj = 0, sum_box = 0, sum_cls = 0;
    for (size_t idx : order) {
      const data::Sample& sample = data[idx];
      const auto& gts = sample.boxes;
      nn::BoundParams p(weights.params, /*trainable=*/true);
      const auto heads = run_heads(p, weights.config, nn::constant(sample.image.tensor()));

      // Anchor labels: positive at IoU >= 0.5 or best match per face,
      // negative below 0.3, the rest ignored.
      std::vector<int> pos, neg, match(anchors.size(), -1);
      std::vector<double> best_iou_for_gt(gts.size(), -1.0);
      std::vector<int> best_anchor_for_gt(gts.size(), -1);
      for (size_t a = 0; a < anchors.size(); ++a) {
        const auto ious = iou_row(anchor_boxes[a], gts);
        double best = 0.0;
        for (size_t g = 0; g < gts.size(); ++g) {
          if (ious[g] > best) {
            best = ious[g];
            match[a] = static_cast<int>(g);
          }
          if (ious[g] > best_iou_for_gt[g]) {
            best_iou_for_gt[g] = ious[g];
            best_anchor_for_gt[g] = static_cast<int>(a);
          }
        }
        if (best >= 0.5) {
          pos.push_back(static_cast<int>(a));
        } else if (best < 0.3) {
          neg.push_back(static_cast<int>(a));
        }
      }
      for (size_t g = 0; g < gts.size(); ++g) {
        const int a = best_anchor_for_gt[g];
        if (a >= 0 && std::find(pos.begin(), pos.end(), a) == pos.end()) {
          pos.push_back(a);
          match[static_cast<size_t>(a)] = static_cast<int>(g);
          neg.erase(std::remove(neg.begin(), neg.end(), a), neg.end());
        }
      }
      std::sort(pos.begin(), pos.end());
      std::shuffle(pos.begin(), pos.end(), rng);
      std::shuffle(neg.begin(), neg.end(), rng);
      const size_t n_pos = std::min(pos.size(), static_cast<size_t>(options.rpn_batch *
                                                                    options.rpn_positive_fraction));
      const size_t n_neg = std::min(neg.size(), static_cast<size_t>(options.rpn_batch) - n_pos);

      const int fw = weights.config.feature_width();
      const int fh = weights.config.feature_height();
      const int per_cell = weights.config.anchors_per_cell();
      const size_t plane = static_cast<size_t>(fh) * fw;
      auto tensor_index = [&](int a, int channel) {
        const int cell = a / per_cell;
        return static_cast<int>(channel * plane + static_cast<size_t>(cell));
      };

      std::vector<int> obj_idx;
      std::vector<double> obj_tgt;
      std::vector<int> reg_idx;
      std::vector<double> reg_tgt;
      for (size_t i = 0; i < n_pos; ++i) {
        const int a = pos[i];
        const int k = a % per_cell;
        obj_idx.push_back(tensor_index(a, k));
        obj_tgt.push_back(1.0);
        const Box ab = anchor_boxes[static_cast<size_t>(a)];
        const Box& g = gts[static_cast<size_t>(match[static_cast<size_t>(a)])];
        const double t[4] = {
            ((g.x_min + g.x_max) / 2 - anchors[static_cast<size_t>(a)].center_x) / ab.width(),
            ((g.y_min + g.y_max) / 2 - anchors[static_cast<size_t>(a)].center_y) / ab.height(),
            std::log(g.width() / ab.width()), std::log(g.height() / ab.height())};
        for (int c = 0; c < 4; ++c) {
          reg_idx.push_back(tensor_index(a, k * 4 + c));
          reg_tgt.push_back(t[c]);
        }
      }
      for (size_t i = 0; i < n_neg; ++i) {
        obj_idx.push_back(tensor_index(neg[i], neg[i] % per_cell));
        obj_tgt.push_back(0.0);
      }
      nn::Var obj_loss = nn::sigmoid_bce(heads.objectness, obj_idx, obj_tgt);
      nn::Var box_loss = nn::smooth_l1(heads.deltas, reg_idx, reg_tgt,
                                       std::max<double>(1.0, static_cast<double>(obj_idx.size())));

      // Classifier: current proposals plus the ground truth, labelled by IoU.
      ProposalSet props = decode_proposals(weights.config, anchors, heads, options.proposal_cap);
      std::vector<Box> candidates = gts;
      candidates.insert(candidates.end(), props.boxes.begin(), props.boxes.end());
      std::vector<int> roi_pos, roi_neg;
      for (size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].area() <= 0.0) continue;
        double best = 0.0;
        for (const auto& g : gts) best = std::max(best, iou(candidates[i], g));
        (best >= 0.5 ? roi_pos : roi_neg).push_back(static_cast<int>(i));
      }
      std::shuffle(roi_pos.begin(), roi_pos.end(), rng);
      std::shuffle(roi_neg.begin(), roi_neg.end(), rng);
      const size_t r_pos = std::min(roi_pos.size(), static_cast<size_t>(options.roi_batch *
                                                                        options.roi_positive_fraction));
      const size_t r_neg = std::min(roi_neg.size(), static_cast<size_t>(options.roi_batch) - r_pos);
      std::vector<Box> roi_boxes;
      std::vector<int> roi_labels;
      for (size_t i = 0; i < r_pos; ++i) {
        roi_boxes.push_back(candidates[static_cast<size_t>(roi_pos[i])]);
        roi_labels.push_back(ScoreMatrix::kFace);
      }
      for (size_t i = 0; i < r_neg; ++i) {
        roi_boxes.push_back(candidates[static_cast<size_t>(roi_neg[i])]);
        roi_labels.push_back(ScoreMatrix::kBackground);
      }
      nn::Var logits = run_classifier(p, weights.config, heads.features, roi_boxes);
      nn::Var cls_loss = nn::softmax_cross_entropy(logits, roi_labels);

      const nn::Var terms[] = {obj_loss, box_loss, cls_loss};
      const double ones[] = {1.0, 1.0, 1.0};
      nn::Var total = nn::weighted_sum(terms, ones);
      const double value = total.value()[0];
      if (!std::isfinite(value)) {
        throw DivergenceError("detector training diverged (non-finite loss) in epoch " +
                              std::to_string(epoch));
      }
      nn::backward(total);
      adam.step(weights.params, p.gradients());
      sum_total += value;
      sum_obj += obj_loss.value()[0];
      sum_box += box_loss.value()[0];
      sum_cls += cls_loss.value()[0];
    }

    const double n = static_cast<double>(std::max<size_t>(1, data.size()));
    weights.epochs = epoch + 1;
    weights.epoch_losses.push_back(sum_total / n);
    if (options.on_epoch) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      options.on_epoch({epoch, sum_total / n, sum_obj / n, sum_box / n, sum_cls / n, secs});
    }
  }
  weights.optimizer_state = adam.state();
  weights.optimizer_steps = adam.steps_taken();
  return weights;
}

DetectorWeights train_detector(const data::ImageSet& data, int epochs, std::uint64_t seed) {
  const DetectorConfig config = DetectorConfig::for_resolution(64, 64);
  TrainDetectorOptions options;
  options.epochs = epochs;
  options.seed = seed;
  return train_detector(data::prepare(data, {config.input_height, config.input_width}), config,
                        options);
}

}  // namespace advgen::detector
