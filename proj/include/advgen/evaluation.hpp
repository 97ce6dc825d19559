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

#ifndef ADVGEN_EVALUATION_HPP_
#define ADVGEN_EVALUATION_HPP_

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgen/data.hpp"
#include "advgen/detector.hpp"
#include "advgen/generator.hpp"
#include "advgen/image.hpp"

namespace advgen::evaluation {

/// A ground-truth face counts as detected when some detection (already
/// filtered at the threshold) overlaps it with IoU >= this.
inline constexpr double kMatchIou = 0.5;

struct SweepRow {
  double alpha = 0.0;
  int clean_detected = 0;
  int attacked_detected = 0;
  int total_faces = 0;
};

struct DefensePoint {
  int jpeg_quality = 100;
  double detected_fraction = 0.0;
};

struct DefenseCurve {
  /// Detected fraction on attacked images without any compression.
  double uncompressed_fraction = 0.0;
  std::vector<DefensePoint> points;
};

struct RuntimeRow {
  std::string attack_name;
  double seconds_per_1000 = 0.0;
  std::string hardware_note;
};

/// Crafts x' from x; anything timed by runtime_benchmark.
struct NamedAttack {
  std::string name;
  std::function<ImageTensor(const ImageTensor&)> craft;
};

/// Number of `truth` boxes matched by some detection.
int count_detected(const std::vector<Box>& truth, const detector::DetectionList& detections);

/// Runs `fn(i)` for i in [0, n) on `workers` threads; results come back in
/// index order whatever the scheduling.
template <typename T>
std::vector<T> parallel_map(size_t n, int workers, const std::function<T(size_t)>& fn);

std::vector<SweepRow> threshold_sweep(const std::vector<data::Sample>& data,
                                      const detector::DetectorWeights& detector,
                                      const generator::GeneratorWeights& gen,
                                      const std::vector<double>& alphas, int workers = 1);

DefenseCurve jpeg_defense_curve(const std::vector<data::Sample>& data,
                                const detector::DetectorWeights& detector,
                                const generator::GeneratorWeights& gen,
                                const std::vector<int>& qualities, double alpha = 0.7,
                                int workers = 1);

/// {10, 20, ..., 100}.
std::vector<int> default_jpeg_grid();

/// Times each attack's craft() serially over the first `n` images, skipping
/// the first three as warm-up, and scales to 1000 images.
std::vector<RuntimeRow> runtime_benchmark(const std::vector<NamedAttack>& attacks,
                                          const std::vector<data::Sample>& data, int n);

/// Short description of the machine the benchmark ran on.
std::string hardware_note();

/// Three panels side by side: clean image with its detections, the
/// perturbation (mid-gray at zero, scaled by `magnify`) and the attacked
/// image with its detections.
RawImage render_figure(const ImageTensor& x, const ImageTensor& x_prime,
                       const generator::Perturbation& delta,
                       const detector::DetectionList& detections_clean,
                       const detector::DetectionList& detections_attacked, double magnify);
void export_figure(const ImageTensor& x, const ImageTensor& x_prime,
                   const generator::Perturbation& delta,
                   const detector::DetectionList& detections_clean,
                   const detector::DetectionList& detections_attacked, double magnify,
                   const std::filesystem::path& path);
/// Outer margin and gap between panels, in pixels.
inline constexpr int kFigureMargin = 4;

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_defense_csv(const DefenseCurve& curve, const std::filesystem::path& path);
void write_runtime_csv(const std::vector<RuntimeRow>& rows, const std::filesystem::path& path);

nlohmann::json to_json(const SweepRow& row);
nlohmann::json to_json(const DefenseCurve& curve);
nlohmann::json to_json(const RuntimeRow& row);

}  // namespace advgen::evaluation

#include "advgen/evaluation_inl.hpp"

#endif  // ADVGEN_EVALUATION_HPP_
