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

#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "advgen/attacks.hpp"
#include "advgen/checkpoint.hpp"
#include "advgen/data.hpp"
#include "advgen/detector.hpp"
#include "advgen/evaluation.hpp"
#include "advgen/generator.hpp"
#include "advgen/image_io.hpp"
#include "run_config.hpp"

namespace advgen::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kTinyLambda = 1e-3;
constexpr const char* kReportVersion = "advgen-report/1";

// Options shared by every subcommand.
struct Globals {
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct Common {
  std::string data_dir;
  std::string detector_path = "detector.ckpt";
  std::string generator_path = "generator.ckpt";
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

data::ImageSet load_dataset(const RunConfig& cfg, const std::string& dir) {
  const fs::path root = cfg.output_path(dir);
  data::ImageSet set = data::load_folder(root, root / "annotations.csv");
  for (const auto& w : set.warnings) std::cerr << "warning: " << w << "\n";
  return set;
}

std::vector<data::Sample> prepared(const RunConfig& cfg, const std::string& dir) {
  return data::prepare(load_dataset(cfg, dir), {cfg.data.resolution, cfg.data.resolution});
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad threshold '" + item + "' in --sweep");
    }
  }
  return out;
}

// "10..100" (step 10), "10..100:5" or a comma list.
std::vector<int> parse_qualities(const std::string& text) {
  std::vector<int> out;
  try {
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
      const auto colon = text.find(':', dots);
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2, colon == std::string::npos ? std::string::npos
                                                                                : colon - dots - 2));
      const int step = colon == std::string::npos ? 10 : std::stoi(text.substr(colon + 1));
      if (step < 1 || hi < lo) throw std::invalid_argument(text);
      for (int q = lo; q <= hi; q += step) out.push_back(q);
    } else {
      std::stringstream ss(text);
      for (std::string item; std::getline(ss, item, ',');) out.push_back(std::stoi(item));
    }
  } catch (const std::exception&) {
    throw UsageError("bad JPEG quality list '" + text + "'");
  }
  return out;
}

void print_json_line(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

// --- synth -----------------------------------------------------------------

void add_synth(CLI::App& app, RunConfig& cfg) {
  auto* cmd = app.add_subcommand("synth", "Generate a synthetic face dataset on disk");
  auto n = std::make_shared<int>(0);
  auto out = std::make_shared<std::string>("data/train");
  auto canvas = std::make_shared<int>(0);
  cmd->add_option("--n", *n, "Number of images")->required();
  cmd->add_option("--out", *out, "Output folder (relative to the output root)");
  cmd->add_option("--canvas", *canvas, "Square canvas side in pixels (default from config)");
  cmd->callback([&cfg, n, out, canvas] {
    if (*n < 1) throw UsageError("--n must be at least 1");
    const int side = *canvas > 0 ? *canvas : cfg.data.canvas;
    if (side < 64) throw UsageError("--canvas must be at least 64");
    const auto set = data::synth_faces(*n, {side, side}, cfg.seed);
    const fs::path dir = cfg.output_path(*out);
    data::export_folder(set, dir);
    print_json_line({{"event", "synth"}, {"images", set.size()}, {"faces", set.box_count()},
                     {"seed", cfg.seed}, {"dir", dir.string()}});
  });
}

// --- train-detector --------------------------------------------------------

void add_train_detector(CLI::App& app, RunConfig& cfg, Common& common) {
  auto* cmd = app.add_subcommand("train-detector", "Train the face detector on clean images");
  auto epochs = std::make_shared<int>(-1);
  auto resume = std::make_shared<std::string>();
  auto log = std::make_shared<std::string>("train_detector.jsonl");
  cmd->add_option("--data", common.data_dir, "Dataset folder with annotations.csv")->required();
  cmd->add_option("--out", common.detector_path, "Checkpoint to write");
  cmd->add_option("--epochs", *epochs, "Total epochs (default from config)");
  cmd->add_option("--resume", *resume, "Continue from this checkpoint");
  cmd->add_option("--log", *log, "Per-epoch JSON-lines log");
  cmd->callback([&cfg, &common, epochs, resume, log] {
    if (*epochs >= 0) cfg.detector.epochs = *epochs;
    cfg.validate();
    const auto samples = prepared(cfg, common.data_dir);
    detector::TrainDetectorOptions opt;
    opt.epochs = cfg.detector.epochs;
    opt.seed = cfg.seed;
    opt.adam.learning_rate = cfg.detector.learning_rate;
    auto log_out = open_output(cfg.output_path(*log));
    opt.on_epoch = [&log_out](const detector::TrainDetectorOptions::EpochLog& e) {
      const json j = {{"epoch", e.epoch + 1},
                      {"loss", e.mean_loss},
                      {"rpn_objectness", e.rpn_objectness_loss},
                      {"rpn_box", e.rpn_box_loss},
                      {"classifier", e.classifier_loss},
                      {"seconds", e.seconds}};
      log_out << j.dump() << "\n" << std::flush;
      print_json_line(j);
    };
    std::optional<detector::DetectorWeights> start;
    if (!resume->empty()) start = detector::load_detector(cfg.output_path(*resume));
    const auto config =
        start ? start->config
              : detector::DetectorConfig::for_resolution(cfg.data.resolution, cfg.data.resolution);
    const auto weights =
        detector::train_detector(samples, config, opt, start ? &*start : nullptr);
    const fs::path out = cfg.output_path(common.detector_path);
    detector::save(weights, out);
    print_json_line({{"event", "detector_saved"}, {"path", out.string()},
                     {"sha256", detector::weights_hash(weights)}, {"epochs", weights.epochs}});
  });
}

// --- train-attack ----------------------------------------------------------

void add_train_attack(CLI::App& app, RunConfig& cfg, Common& common) {
  auto* cmd = app.add_subcommand("train-attack", "Train the perturbation generator");
  struct Flags {
    double lambda = 0, threshold = 0, step_size = 0, epsilon = 0;
    int max_iter = -1, epochs = -1;
    std::string loop_mode, log = "train_attack.jsonl";
  };
  auto f = std::make_shared<Flags>();
  cmd->add_option("--data", common.data_dir, "Dataset folder with annotations.csv")->required();
  cmd->add_option("--detector", common.detector_path, "Trained detector checkpoint");
  cmd->add_option("--out", common.generator_path, "Generator checkpoint to write");
  cmd->add_option("--lambda", f->lambda, "Weight of the misclassification term");
  cmd->add_option("--threshold", f->threshold, "Squared-L2 stop threshold T");
  cmd->add_option("--max-iter", f->max_iter, "Update budget M per image");
  cmd->add_option("--step-size", f->step_size, "Generator learning rate");
  cmd->add_option("--epsilon-max", f->epsilon, "Per-element perturbation bound");
  cmd->add_option("--epochs", f->epochs, "Passes over the dataset");
  cmd->add_option("--loop-mode", f->loop_mode, "threshold_and_faces or until_fooled");
  cmd->add_option("--log", f->log, "Per-iteration JSON-lines log");
  cmd->callback([&cfg, &common, f, cmd] {
    if (cmd->get_option("--lambda")->count()) cfg.attack.lambda = f->lambda;
    if (cmd->get_option("--threshold")->count()) cfg.attack.threshold_T = f->threshold;
    if (cmd->get_option("--max-iter")->count()) cfg.attack.max_iter_M = f->max_iter;
    if (cmd->get_option("--step-size")->count()) cfg.attack.step_size = f->step_size;
    if (cmd->get_option("--epsilon-max")->count()) cfg.generator.config.epsilon_max = f->epsilon;
    if (cmd->get_option("--epochs")->count()) cfg.generator.epochs = f->epochs;
    if (!f->loop_mode.empty()) {
      try {
        cfg.attack.loop_mode = attacks::loop_mode_from_string(f->loop_mode);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    cfg.attack.seed = cfg.seed;
    cfg.validate();
    if (cfg.attack.lambda <= kTinyLambda) {
      std::cerr << "warning: lambda " << cfg.attack.lambda
                << " barely weights the misclassification term; expect perturbations almost "
                   "identical to the input and few hidden faces\n";
    }
    const auto det = detector::load_detector(cfg.output_path(common.detector_path));
    const auto samples = prepared(cfg, common.data_dir);
    auto log_out = open_output(cfg.output_path(f->log));
    attacks::TrainGeneratorOptions opt;
    opt.generator = cfg.generator.config;
    opt.on_iteration = [&log_out](const attacks::IterationLog& it) {
      log_out << it.to_json().dump() << "\n";
    };
    int fooled = 0, seen = 0;
    opt.on_image = [&](int epoch, size_t, const attacks::AttackResult& r) {
      fooled += r.fooled;
      if (++seen == static_cast<int>(samples.size())) {
        print_json_line({{"epoch", epoch}, {"fooled_fraction", double(fooled) / seen}});
        fooled = seen = 0;
      }
    };
    const auto gen =
        attacks::train_generator(samples, det, cfg.attack, cfg.generator.epochs, opt);
    const fs::path out = cfg.output_path(common.generator_path);
    generator::save(gen, out);
    print_json_line({{"event", "generator_saved"}, {"path", out.string()},
                     {"sha256", generator::weights_hash(gen)}, {"epochs", gen.epochs}});
  });
}

// --- eval ------------------------------------------------------------------

void add_eval(CLI::App& app, RunConfig& cfg, Common& common) {
  auto* cmd = app.add_subcommand("eval", "Threshold sweep, JPEG curve and figures");
  auto sweep = std::make_shared<std::string>();
  auto jpeg = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>("eval");
  auto figures = std::make_shared<int>(-1);
  cmd->add_option("--data", common.data_dir, "Held-out dataset folder")->required();
  cmd->add_option("--detector", common.detector_path, "Detector checkpoint");
  cmd->add_option("--generator", common.generator_path, "Generator checkpoint");
  cmd->add_option("--sweep", *sweep, "Comma-separated thresholds, e.g. 0.5,0.7,0.99");
  cmd->add_option("--jpeg", *jpeg, "JPEG qualities: 10..100[:step] or a comma list");
  cmd->add_option("--out-dir", *out_dir, "Report folder");
  cmd->add_option("--figures", *figures, "Number of figure panels to export");
  cmd->callback([&cfg, &common, sweep, jpeg, out_dir, figures] {
    if (!sweep->empty()) cfg.evaluation.alphas = parse_alphas(*sweep);
    if (!jpeg->empty()) cfg.evaluation.jpeg_qualities = parse_qualities(*jpeg);
    if (*figures >= 0) cfg.evaluation.figures = *figures;
    cfg.validate();
    const auto det = detector::load_detector(cfg.output_path(common.detector_path));
    const auto gen = generator::load_generator(cfg.output_path(common.generator_path));
    const auto samples = prepared(cfg, common.data_dir);
    const fs::path dir = cfg.output_path(*out_dir);
    fs::create_directories(dir);

    const auto rows = evaluation::threshold_sweep(samples, det, gen, cfg.evaluation.alphas,
                                                  cfg.workers);
    evaluation::write_sweep_csv(rows, dir / "sweep.csv");
    const auto curve = evaluation::jpeg_defense_curve(samples, det, gen,
                                                      cfg.evaluation.jpeg_qualities,
                                                      cfg.evaluation.alpha, cfg.workers);
    evaluation::write_defense_csv(curve, dir / "jpeg.csv");

    const auto results = evaluation::parallel_map<attacks::AttackResult>(
        samples.size(), cfg.workers, [&](size_t i) {
          return attacks::generator_attack(samples[i].image, det, gen, cfg.evaluation.alpha);
        });
    int fooled = 0;
    double norm = 0.0;
    for (const auto& r : results) {
      fooled += r.fooled;
      norm += r.delta.l2_norm();
    }
    const int n_fig = std::min<int>(cfg.evaluation.figures, static_cast<int>(samples.size()));
    for (int i = 0; i < n_fig; ++i) {
      const auto& s = samples[static_cast<size_t>(i)];
      const auto& r = results[static_cast<size_t>(i)];
      char name[32];
      std::snprintf(name, sizeof name, "figure_%03d.png", i);
      evaluation::export_figure(s.image, r.x_prime, r.delta,
                                detector::detect(s.image, det, cfg.evaluation.alpha),
                                detector::detect(r.x_prime, det, cfg.evaluation.alpha),
                                cfg.evaluation.magnify, dir / name);
    }

    json report;
    report["version"] = kReportVersion;
    report["config"] = cfg.to_json();
    report["detector_sha256"] = detector::weights_hash(det);
    report["generator_sha256"] = generator::weights_hash(gen);
    report["images"] = samples.size();
    report["fooled_rate"] = samples.empty() ? 0.0 : double(fooled) / samples.size();
    report["mean_delta_l2"] = samples.empty() ? 0.0 : norm / samples.size();
    report["sweep"] = json::array();
    for (const auto& r : rows) report["sweep"].push_back(evaluation::to_json(r));
    report["jpeg"] = evaluation::to_json(curve);
    report["figures"] = n_fig;
    auto out = open_output(dir / "report.json");
    out << report.dump(2) << "\n";
    print_json_line({{"event", "report_written"}, {"path", (dir / "report.json").string()},
                     {"fooled_rate", report["fooled_rate"]}});
  });
}

// --- bench -----------------------------------------------------------------

std::string canonical_attack(const std::string& name) {
  static const std::map<std::string, std::string> kAliases{
      {"gen", "generator"}, {"generator", "generator"}, {"fgsm", "fgsm"}, {"cw", "cw"}};
  const auto it = kAliases.find(name);
  if (it == kAliases.end()) {
    throw UsageError("unknown attack '" + name + "' (expected generator, fgsm or cw)");
  }
  return it->second;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);) out.push_back(item);
  return out;
}

int bench_status = 0;

void add_bench(CLI::App& app, RunConfig& cfg, Common& common) {
  auto* cmd = app.add_subcommand("bench", "Time each attack per image");
  auto names = std::make_shared<std::string>("generator,fgsm,cw");
  auto n = std::make_shared<int>(-1);
  auto order = std::make_shared<std::string>();
  auto ratio = std::make_shared<double>(1.2);
  auto out = std::make_shared<std::string>("runtime.csv");
  cmd->add_option("--data", common.data_dir, "Dataset folder")->required();
  cmd->add_option("--detector", common.detector_path, "Detector checkpoint");
  cmd->add_option("--generator", common.generator_path, "Generator checkpoint");
  cmd->add_option("--attacks", *names, "Comma-separated attack names");
  cmd->add_option("--n", *n, "Images to time (default from config)");
  cmd->add_option("--assert-order", *order, "Fail unless timings follow e.g. gen<fgsm<cw");
  cmd->add_option("--min-ratio", *ratio, "Required slowdown between neighbours in --assert-order");
  cmd->add_option("--out", *out, "CSV to write");
  cmd->callback([&cfg, &common, names, n, order, ratio, out] {
    if (*n >= 0) cfg.evaluation.bench_images = *n;
    cfg.validate();
    std::vector<std::string> wanted;
    for (const auto& s : split(*names, ',')) wanted.push_back(canonical_attack(s));
    std::vector<std::string> chain;
    if (!order->empty()) {
      for (const auto& s : split(*order, '<')) chain.push_back(canonical_attack(s));
      for (const auto& c : chain) {
        if (std::find(wanted.begin(), wanted.end(), c) == wanted.end()) {
          throw UsageError("--assert-order names '" + c + "' which is not benchmarked");
        }
      }
    }
    const auto det = detector::load_detector(cfg.output_path(common.detector_path));
    const detector::FrozenDetector frozen(det);
    std::optional<generator::GeneratorWeights> gen;
    if (std::find(wanted.begin(), wanted.end(), "generator") != wanted.end()) {
      gen = generator::load_generator(cfg.output_path(common.generator_path));
    }
    const auto samples = prepared(cfg, common.data_dir);
    std::vector<evaluation::NamedAttack> attacks;
    const attacks::CwOptions cw{.c = cfg.evaluation.cw.c,
                                .steps = cfg.evaluation.cw.steps,
                                .step_size = cfg.evaluation.cw.step_size,
                                .eval_alpha = cfg.evaluation.alpha};
    const double eps = cfg.evaluation.fgsm_epsilon;
    for (const auto& name : wanted) {
      if (name == "generator") {
        attacks.push_back({name, [&gen](const ImageTensor& x) {
                             return generator::apply(x, generator::generate(x, *gen));
                           }});
      } else if (name == "fgsm") {
        attacks.push_back(
            {name, [&frozen, eps](const ImageTensor& x) { return attacks::fgsm_craft(x, frozen, eps); }});
      } else {
        attacks.push_back({name, [&frozen, cw](const ImageTensor& x) {
                             return attacks::cw_attack(x, frozen, cw).x_prime;
                           }});
      }
    }
    const auto rows = evaluation::runtime_benchmark(attacks, samples, cfg.evaluation.bench_images);
    evaluation::write_runtime_csv(rows, cfg.output_path(*out));
    std::map<std::string, double> seconds;
    for (const auto& r : rows) {
      seconds[r.attack_name] = r.seconds_per_1000;
      print_json_line(evaluation::to_json(r));
    }
    for (size_t i = 1; i < chain.size(); ++i) {
      const double faster = seconds[chain[i - 1]], slower = seconds[chain[i]];
      if (!(slower >= *ratio * faster)) {
        std::cerr << "order violated: " << chain[i - 1] << " " << faster << " s vs " << chain[i]
                  << " " << slower << " s per 1000 images (need >= " << *ratio << "x)\n";
        bench_status = kExitRuntime;
      }
    }
  });
}

// --- export-fig ------------------------------------------------------------

void add_export_fig(CLI::App& app, RunConfig& cfg, Common& common) {
  auto* cmd = app.add_subcommand("export-fig", "Write one clean | perturbation | attacked panel");
  auto index = std::make_shared<int>(0);
  auto magnify = std::make_shared<double>(0.0);
  auto out = std::make_shared<std::string>("figure.png");
  cmd->add_option("--data", common.data_dir, "Dataset folder")->required();
  cmd->add_option("--detector", common.detector_path, "Detector checkpoint");
  cmd->add_option("--generator", common.generator_path, "Generator checkpoint");
  cmd->add_option("--index", *index, "Image index within the dataset");
  cmd->add_option("--magnify", *magnify, "Perturbation magnification (default from config)");
  cmd->add_option("--out", *out, "PNG to write");
  cmd->callback([&cfg, &common, index, magnify, out] {
    if (*magnify != 0.0) cfg.evaluation.magnify = *magnify;
    cfg.validate();
    const auto samples = prepared(cfg, common.data_dir);
    if (*index < 0 || static_cast<size_t>(*index) >= samples.size()) {
      throw UsageError("--index out of range (dataset has " + std::to_string(samples.size()) +
                       " images)");
    }
    const auto det = detector::load_detector(cfg.output_path(common.detector_path));
    const auto gen = generator::load_generator(cfg.output_path(common.generator_path));
    const auto& x = samples[static_cast<size_t>(*index)].image;
    const auto r = attacks::generator_attack(x, det, gen, cfg.evaluation.alpha);
    const fs::path path = cfg.output_path(*out);
    evaluation::export_figure(x, r.x_prime, r.delta, detector::detect(x, det, cfg.evaluation.alpha),
                              detector::detect(r.x_prime, det, cfg.evaluation.alpha),
                              cfg.evaluation.magnify, path);
    print_json_line({{"event", "figure_written"}, {"path", path.string()}, {"fooled", r.fooled}});
  });
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Generator-based adversarial attacks on a two-stage face detector"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  Common common;
  RunConfig cfg;
  app.add_option("--config", g.config_path, "JSON run config; flags override it");
  app.add_option("--output-dir", g.output_dir,
                 "Root for relative paths (default: $ADVGEN_OUTPUT_ROOT or .)");
  app.add_option("--seed", g.seed, "Global seed");
  app.add_option("--workers", g.workers, "Worker threads for evaluation");
  // Config file and global flags are applied before any subcommand runs.
  app.parse_complete_callback([&] {
    if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
    if (app.get_option("--output-dir")->count()) cfg.output_dir = g.output_dir;
    if (app.get_option("--seed")->count()) cfg.seed = g.seed;
    if (app.get_option("--workers")->count()) cfg.workers = g.workers;
  });
  add_synth(app, cfg);
  add_train_detector(app, cfg, common);
  add_train_attack(app, cfg, common);
  add_eval(app, cfg, common);
  add_bench(app, cfg, common);
  add_export_fig(app, cfg, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kExitRuntime;
  }
  return bench_status;
}

}  // namespace advgen::cli
