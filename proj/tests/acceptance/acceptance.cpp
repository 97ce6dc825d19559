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

// Desk-scale acceptance run: trains the detector and generators from the
// shipped default config, then checks every acceptance criterion and prints
// one PASS/FAIL line per criterion. Details go to acceptance_log.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgen/attacks.hpp"
#include "advgen/evaluation.hpp"
#include "advgen/losses.hpp"
#include "advgen/nn/allocator.hpp"
#include "advgen/nn/graph.hpp"
#include "oracles.hpp"
#include "run_config.hpp"
#include "support.hpp"

namespace advgen {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Detector recipe: 20 epochs on 800 synthetic images. The generator trains
// on the first data.train_count of them.
constexpr int kDetectorImages = 800;
constexpr std::uint64_t kHeldOutSeed = 1234;
constexpr int kNormImages = 20;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void progress(const char* fmt, auto... args) {
  std::fprintf(stderr, fmt, args...);
  std::fprintf(stderr, "\n");
}

struct Criterion {
  int id;
  std::string name;
  bool pass;
  json details;
};

struct Outcome {
  int fooled = 0;
  int images = 0;
  double mean_norm = 0.0;
  double fooled_rate() const { return images ? static_cast<double>(fooled) / images : 0.0; }
};

Outcome attack_outcome(const std::vector<data::Sample>& set, const detector::DetectorWeights& det,
                       const generator::GeneratorWeights& gen, double alpha, size_t limit) {
  Outcome o;
  const size_t n = std::min(limit, set.size());
  for (size_t i = 0; i < n; ++i) {
    const auto r = attacks::generator_attack(set[i].image, det, gen, alpha);
    o.fooled += r.fooled;
    o.mean_norm += r.delta.l2_norm();
  }
  o.images = static_cast<int>(n);
  o.mean_norm /= std::max<size_t>(1, n);
  return o;
}

bool in_range(const ImageTensor& x) {
  return std::all_of(x.values().begin(), x.values().end(),
                     [](double v) { return v >= -1.0 && v <= 1.0; });
}

int run() {
  nn::tune_allocator();
  const auto pipeline_start = Clock::now();
  const cli::RunConfig cfg = cli::load_run_config(ADVGEN_SOURCE_DIR "/configs/default.json");
  cfg.validate();
  const int res = cfg.data.resolution;
  const double alpha = cfg.evaluation.alpha;
  json log;
  log["config"] = cfg.to_json();
  log["detector_images"] = kDetectorImages;
  log["held_out_seed"] = kHeldOutSeed;

  const auto det_train = data::prepare(
      data::synth_faces(kDetectorImages, {cfg.data.canvas, cfg.data.canvas}, cfg.seed), {res, res});
  const std::vector<data::Sample> gen_train(det_train.begin(),
                                            det_train.begin() + cfg.data.train_count);
  const auto held_out = data::prepare(
      data::synth_faces(cfg.data.test_count, {cfg.data.canvas, cfg.data.canvas}, kHeldOutSeed),
      {res, res});

  // --- detector ---
  auto t = Clock::now();
  detector::TrainDetectorOptions dopt;
  dopt.epochs = cfg.detector.epochs;
  dopt.seed = cfg.seed;
  dopt.adam.learning_rate = cfg.detector.learning_rate;
  dopt.on_epoch = [](const detector::TrainDetectorOptions::EpochLog& e) {
    progress("detector epoch %d loss %.4f (%.1fs)", e.epoch + 1, e.mean_loss, e.seconds);
  };
  const detector::DetectorWeights det =
      detector::train_detector(det_train, detector::DetectorConfig::for_resolution(res, res), dopt);
  const std::string det_hash = detector::weights_hash(det);
  log["detector"] = {{"seconds", since(t)}, {"sha256", det_hash}, {"epoch_losses", det.epoch_losses}};

  // --- generators: tuned default, lambda x100, lambda x0.01 ---
  auto train_gen = [&](double lambda, const char* tag, json& record,
                       const attacks::TrainGeneratorOptions& base = {}) {
    attacks::TrainConfig tc = cfg.attack;
    tc.lambda = lambda;
    tc.seed = cfg.seed;
    attacks::TrainGeneratorOptions opt = base;
    opt.generator = cfg.generator.config;
    int fooled = 0, seen = 0;
    auto inner = opt.on_image;
    opt.on_image = [&](int epoch, size_t index, const attacks::AttackResult& r) {
      if (inner) inner(epoch, index, r);
      fooled += r.fooled;
      if (++seen == static_cast<int>(gen_train.size())) {
        progress("generator %s epoch %d: fooled %d/%d", tag, epoch + 1, fooled, seen);
        fooled = seen = 0;
      }
    };
    const auto start = Clock::now();
    auto g = attacks::train_generator(gen_train, det, tc, cfg.generator.epochs, opt);
    record = {{"lambda", lambda}, {"seconds", since(start)}, {"sha256", generator::weights_hash(g)}};
    return g;
  };

  // Loss decrease over the first epoch, among images that took an update.
  int decreased = 0, updated = 0;
  attacks::TrainGeneratorOptions tracked;
  tracked.on_image = [&](int epoch, size_t, const attacks::AttackResult& r) {
    if (epoch != 0 || r.iterations_used == 0 || !r.final_loss || r.loss_trace.empty()) return;
    ++updated;
    decreased += r.final_loss->total < r.loss_trace.front().total;
  };
  const double lambda = cfg.attack.lambda;
  const auto gen = train_gen(lambda, "default", log["generator"], tracked);
  const double pipeline_train_seconds = since(pipeline_start);

  std::vector<Criterion> results;

  // 1. efficacy, 2. sweep monotonicity
  t = Clock::now();
  const auto sweep = evaluation::threshold_sweep(held_out, det, gen, cfg.evaluation.alphas,
                                                 cfg.workers);
  const evaluation::SweepRow* at_alpha = nullptr;
  for (const auto& r : sweep) {
    if (std::abs(r.alpha - alpha) < 1e-12) at_alpha = &r;
  }
  const double pipeline_seconds = pipeline_train_seconds + since(t);
  {
    json rows = json::array();
    for (const auto& r : sweep) rows.push_back(evaluation::to_json(r));
    const bool have = at_alpha != nullptr;
    const double clean = have ? double(at_alpha->clean_detected) / at_alpha->total_faces : 0.0;
    const double attacked = have ? double(at_alpha->attacked_detected) / at_alpha->total_faces : 1.0;
    results.push_back({1, "toy pipeline efficacy",
                       have && clean >= 0.95 && attacked <= 0.10 && pipeline_seconds <= 3 * 3600.0,
                       {{"clean_detected_fraction", clean},
                        {"attacked_detected_fraction", attacked},
                        {"total_faces", have ? at_alpha->total_faces : 0},
                        {"pipeline_seconds", pipeline_seconds}}});
    bool mono = sweep.size() == cfg.evaluation.alphas.size();
    for (size_t i = 1; i < sweep.size(); ++i) {
      mono = mono && sweep[i].attacked_detected <= sweep[i - 1].attacked_detected &&
             sweep[i].clean_detected <= sweep[i - 1].clean_detected;
    }
    results.push_back({2, "threshold sweep monotone", mono, {{"rows", rows}}});
  }

  // 3. runtime ordering, twice
  {
    const detector::FrozenDetector frozen(det);
    const attacks::CwOptions cw{.c = cfg.evaluation.cw.c,
                                .steps = cfg.evaluation.cw.steps,
                                .step_size = cfg.evaluation.cw.step_size,
                                .eval_alpha = alpha};
    const double eps = cfg.evaluation.fgsm_epsilon;
    const std::vector<evaluation::NamedAttack> attacks{
        {"generator",
         [&](const ImageTensor& x) { return generator::apply(x, generator::generate(x, gen)); }},
        {"fgsm", [&](const ImageTensor& x) { return attacks::fgsm_craft(x, frozen, eps); }},
        {"cw", [&](const ImageTensor& x) { return attacks::cw_attack(x, frozen, cw).x_prime; }}};
    bool pass = true;
    json runs = json::array();
    std::vector<std::vector<std::string>> orders;
    for (int rep = 0; rep < 2; ++rep) {
      const auto rows = evaluation::runtime_benchmark(attacks, held_out, cfg.evaluation.bench_images);
      const double g = rows[0].seconds_per_1000, f = rows[1].seconds_per_1000,
                   c = rows[2].seconds_per_1000;
      pass = pass && f >= 1.2 * g && c >= 1.2 * f;
      std::vector<evaluation::RuntimeRow> sorted = rows;
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.seconds_per_1000 < b.seconds_per_1000; });
      std::vector<std::string> order;
      for (const auto& r : sorted) order.push_back(r.attack_name);
      orders.push_back(order);
      json j = json::array();
      for (const auto& r : rows) j.push_back(evaluation::to_json(r));
      runs.push_back(j);
      progress("bench run %d: gen %.2f fgsm %.2f cw %.2f s/1000", rep + 1, g, f, c);
    }
    pass = pass && orders[0] == orders[1];
    results.push_back({3, "runtime ordering generator < FGSM < C-W", pass, {{"runs", runs}}});
  }

  // 4. JPEG defence curve
  {
    const auto curve = evaluation::jpeg_defense_curve(held_out, det, gen,
                                                      evaluation::default_jpeg_grid(), alpha,
                                                      cfg.workers);
    auto at = [&](int q) {
      for (const auto& p : curve.points) {
        if (p.jpeg_quality == q) return p.detected_fraction;
      }
      return std::nan("");
    };
    const bool pass = std::abs(at(100) - curve.uncompressed_fraction) <= 0.02 && at(10) > at(90) &&
                      at(20) > at(90) && curve.points.size() == 10;
    results.push_back({4, "JPEG defence shape", pass, evaluation::to_json(curve)});
  }

  // 5. lambda sensitivity
  {
    const Outcome base = attack_outcome(held_out, det, gen, alpha, held_out.size());
    const Outcome base20 = attack_outcome(held_out, det, gen, alpha, kNormImages);
    json hi_rec, lo_rec;
    const auto gen_hi = train_gen(lambda * 100.0, "lambda x100", hi_rec);
    const auto gen_lo = train_gen(lambda * 0.01, "lambda x0.01", lo_rec);
    const Outcome hi20 = attack_outcome(held_out, det, gen_hi, alpha, kNormImages);
    const Outcome lo = attack_outcome(held_out, det, gen_lo, alpha, held_out.size());
    const double norm_ratio = hi20.mean_norm / base20.mean_norm;
    const double drop_pp = 100.0 * (base.fooled_rate() - lo.fooled_rate());
    hi_rec["mean_delta_l2_20"] = hi20.mean_norm;
    lo_rec["fooled_rate"] = lo.fooled_rate();
    results.push_back({5, "lambda sensitivity", norm_ratio >= 2.0 && drop_pp >= 30.0,
                       {{"default_mean_delta_l2_20", base20.mean_norm},
                        {"default_fooled_rate", base.fooled_rate()},
                        {"x100", hi_rec},
                        {"x0.01", lo_rec},
                        {"norm_ratio", norm_ratio},
                        {"fooled_drop_pp", drop_pp}}});
  }

  // 6. hinge oracle
  {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> rows(0, 8);
    std::normal_distribution<double> logit(0.0, 3.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
      detector::ScoreMatrix z;
      z.logits.resize(static_cast<size_t>(rows(rng)));
      for (auto& r : z.logits) r = {logit(rng), logit(rng)};
      const double want = oracle::hinge_reference(z.logits);
      const double got = losses::misclassify_loss(z);
      worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
      if (want == 0.0 && got != 0.0) worst = std::max(worst, 1.0);
    }
    results.push_back({6, "hinge oracle", worst <= 1e-6, {{"matrices", 1000}, {"worst_rel", worst}}});
  }

  // 7. gradient checks at partially attacked images
  {
    double worst = 0.0;
    json probes = json::array();
    for (size_t i = 0; i < 5; ++i) {
      const ImageTensor& x = held_out[i].image;
      generator::Perturbation half = generator::generate(x, gen);
      for (double& v : half.values.values()) v *= 0.5;
      const ImageTensor xp = generator::apply(x, half);
      for (const auto& p : testing::loss_gradient_probes(det, x, xp, lambda, 10, 1e-3, 100 + i)) {
        worst = std::max(worst, p.relative_error());
        probes.push_back({{"image", i}, {"index", p.index}, {"analytic", p.analytic},
                          {"numeric", p.numeric}});
      }
    }
    results.push_back({7, "gradient check", worst <= 1e-3, {{"worst_rel", worst}, {"probes", probes}}});
  }

  // 8. NMS oracle
  {
    std::mt19937_64 rng(cfg.seed + 8);
    int mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
      const auto inst = oracle::random_nms_instance(rng, 6);
      mismatches += detector::nms(inst.boxes, inst.scores, detector::kDefaultNmsIou) !=
                    oracle::nms_exhaustive(inst.boxes, inst.scores, detector::kDefaultNmsIou);
    }
    results.push_back({8, "NMS oracle", mismatches == 0, {{"instances", 1000}, {"mismatches", mismatches}}});
  }

  // 9. invariants
  {
    json d;
    bool range_ok = true;
    const auto before_calls = detector::evaluation_count();
    const auto before_graph = nn::graph_stats();
    std::vector<ImageTensor> generated;
    for (const auto& s : held_out) generated.push_back(generator::apply(s.image, generator::generate(s.image, gen)));
    const bool forward_only = detector::evaluation_count() == before_calls &&
                              nn::graph_stats().backward_passes == before_graph.backward_passes &&
                              nn::graph_stats().recorded_nodes == before_graph.recorded_nodes;
    for (const auto& x : generated) range_ok = range_ok && in_range(x);
    const detector::FrozenDetector frozen(det);
    for (size_t i = 0; i < 10; ++i) {
      range_ok = range_ok && in_range(attacks::fgsm_craft(held_out[i].image, frozen,
                                                          cfg.evaluation.fgsm_epsilon));
      range_ok = range_ok &&
                 in_range(attacks::cw_attack(held_out[i].image, det, cfg.evaluation.cw.c,
                                             cfg.evaluation.cw.steps, cfg.evaluation.cw.step_size)
                              .x_prime);
    }
    const bool frozen_ok = detector::weights_hash(det) == det_hash;

    // Same seed, same data: identical generator and iteration logs.
    const std::vector<data::Sample> subset(gen_train.begin(), gen_train.begin() + 20);
    attacks::TrainConfig tc = cfg.attack;
    tc.seed = cfg.seed;
    attacks::TrainGeneratorOptions opt;
    opt.generator = cfg.generator.config;
    std::vector<json> logs[2];
    std::string hashes[2];
    for (int rep = 0; rep < 2; ++rep) {
      opt.on_iteration = [&](const attacks::IterationLog& l) {
        json j = l.to_json();
        j.erase("wall_time");
        logs[rep].push_back(j);
      };
      hashes[rep] = generator::weights_hash(attacks::train_generator(subset, det, tc, 1, opt));
    }
    detector::TrainDetectorOptions small = dopt;
    small.epochs = 1;
    small.on_epoch = nullptr;
    const std::vector<data::Sample> det_subset(det_train.begin(), det_train.begin() + 40);
    const auto cfg_det = detector::DetectorConfig::for_resolution(res, res);
    const bool det_repeat = detector::weights_hash(detector::train_detector(det_subset, cfg_det, small)) ==
                            detector::weights_hash(detector::train_detector(det_subset, cfg_det, small));
    const bool deterministic = hashes[0] == hashes[1] && logs[0] == logs[1] && det_repeat;
    d = {{"clamp_range", range_ok},
         {"detector_frozen", frozen_ok},
         {"generate_forward_only", forward_only},
         {"deterministic", deterministic},
         {"iteration_log_entries", logs[0].size()}};
    results.push_back({9, "invariant suite", range_ok && frozen_ok && forward_only && deterministic, d});
  }

  // 10. generalization
  {
    const Outcome train_o = attack_outcome(gen_train, det, gen, alpha, gen_train.size());
    const Outcome test_o = attack_outcome(held_out, det, gen, alpha, held_out.size());
    const double gap = 100.0 * std::abs(train_o.fooled_rate() - test_o.fooled_rate());
    results.push_back({10, "generalization gap", gap <= 10.0,
                       {{"train_fooled_rate", train_o.fooled_rate()},
                        {"held_out_fooled_rate", test_o.fooled_rate()},
                        {"gap_pp", gap}}});
    // Recorded alongside: squared norms against the stop threshold.
    double below = 0, mean_sq = 0;
    for (const auto& s : held_out) {
      const double sq = std::pow(generator::generate(s.image, gen).l2_norm(), 2);
      mean_sq += sq;
      below += sq <= cfg.attack.threshold_T;
    }
    log["threshold_T"] = {{"T", cfg.attack.threshold_T},
                          {"held_out_mean_squared_l2", mean_sq / held_out.size()},
                          {"held_out_fraction_below_T", below / held_out.size()}};
  }
  log["first_epoch_loss_decrease"] = {
      {"images_updated", updated},
      {"images_decreased", decreased},
      {"rate", updated ? static_cast<double>(decreased) / updated : 0.0}};
  log["detector_hash_unchanged"] = detector::weights_hash(det) == det_hash;
  log["total_seconds"] = since(pipeline_start);
  log["hardware"] = evaluation::hardware_note();

  int failed = 0;
  json crit = json::array();
  for (const auto& r : results) {
    std::printf("CRITERION %2d %s  %s\n", r.id, r.pass ? "PASS" : "FAIL", r.name.c_str());
    failed += !r.pass;
    crit.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"details", r.details}});
  }
  log["criteria"] = crit;
  std::ofstream("acceptance_log.json") << log.dump(2) << "\n";
  std::printf("%d of %zu criteria passed; details in acceptance_log.json\n",
              static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace advgen

int main() {
  try {
    return advgen::run();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance run aborted: %s\n", e.what());
    return 2;
  }
}
