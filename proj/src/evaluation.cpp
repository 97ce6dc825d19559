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

#include "advgen/evaluation.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "advgen/image_io.hpp"

namespace advgen::evaluation {
namespace {

using Clock = std::chrono::steady_clock;

// Per-image material shared by every threshold: proposals and scores for the
// clean and the attacked image.
struct Scored {
  detector::ProposalSet proposals;
  detector::ScoreMatrix scores;
};

Scored score_image(const detector::FrozenDetector& det, const ImageTensor& x) {
  auto out = det.evaluate(nn::constant(x.tensor()), detector::kTestProposalCap);
  return {std::move(out.proposals), detector::ScoreMatrix::from_tensor(out.logits.value())};
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Shortest text that reads back as the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// 3x5 glyphs for confidences: digits then '.'.
constexpr std::array<std::array<const char*, 5>, 11> kGlyphs{{
    {"###", "#.#", "#.#", "#.#", "###"}, {".#.", "##.", ".#.", ".#.", "###"},
    {"###", "..#", "###", "#..", "###"}, {"###", "..#", "###", "..#", "###"},
    {"#.#", "#.#", "###", "..#", "..#"}, {"###", "#..", "###", "..#", "###"},
    {"###", "#..", "###", "#.#", "###"}, {"###", "..#", "..#", "..#", "..#"},
    {"###", "#.#", "###", "#.#", "###"}, {"###", "#.#", "###", "..#", "###"},
    {"...", "...", "...", "...", ".#."},
}};

using Rgb = std::array<std::uint8_t, 3>;

class Canvas {
 public:
  Canvas(int height, int width) : img_(height, width) {
    for (auto& v : img_.pixels()) v = 255;
  }
  void put(int y, int x, Rgb c) {
    if (y < 0 || x < 0 || y >= img_.height() || x >= img_.width()) return;
    for (int k = 0; k < 3; ++k) img_.at(y, x, k) = c[static_cast<size_t>(k)];
  }
  void blit(const RawImage& src, int y0, int x0) {
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x)
        put(y0 + y, x0 + x, {src.at(y, x, 0), src.at(y, x, 1), src.at(y, x, 2)});
  }
  void rect(const Box& b, int y0, int x0, Rgb c) {
    const int l = x0 + static_cast<int>(std::lround(b.x_min));
    const int r = x0 + static_cast<int>(std::lround(b.x_max)) - 1;
    const int t = y0 + static_cast<int>(std::lround(b.y_min));
    const int d = y0 + static_cast<int>(std::lround(b.y_max)) - 1;
    for (int x = l; x <= r; ++x) {
      put(t, x, c);
      put(d, x, c);
    }
    for (int y = t; y <= d; ++y) {
      put(y, l, c);
      put(y, r, c);
    }
  }
  void text(const std::string& s, int y0, int x0, Rgb c) {
    for (char ch : s) {
      const size_t g = ch == '.' ? 10 : static_cast<size_t>(ch - '0');
      if (g > 10) continue;
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 3; ++x)
          if (kGlyphs[g][static_cast<size_t>(y)][x] == '#') put(y0 + y, x0 + x, c);
      x0 += 4;
    }
  }
  RawImage release() { return std::move(img_); }

 private:
  RawImage img_;
};

void annotate(Canvas& canvas, const detector::DetectionList& dets, int y0, int x0, Rgb colour) {
  for (size_t i = 0; i < dets.size(); ++i) {
    const Box& b = dets.boxes[i];
    canvas.rect(b, y0, x0, colour);
    char label[8];
    std::snprintf(label, sizeof label, "%.2f", dets.confidences[i]);
    const int ty = y0 + static_cast<int>(std::lround(b.y_min)) - 6;
    canvas.text(label, ty < y0 ? y0 + static_cast<int>(std::lround(b.y_min)) + 1 : ty,
                x0 + static_cast<int>(std::lround(b.x_min)), colour);
  }
}

}  // namespace

int count_detected(const std::vector<Box>& truth, const detector::DetectionList& detections) {
  int n = 0;
  for (const Box& g : truth) {
    for (const Box& d : detections.boxes) {
      if (iou(d, g) >= kMatchIou) {
        ++n;
        break;
      }
    }
  }
  return n;
}

std::vector<SweepRow> threshold_sweep(const std::vector<data::Sample>& data,
                                      const detector::DetectorWeights& detector,
                                      const generator::GeneratorWeights& gen,
                                      const std::vector<double>& alphas, int workers) {
  for (size_t i = 0; i < alphas.size(); ++i) {
    check_alpha(alphas[i]);
    if (i > 0 && alphas[i] < alphas[i - 1]) throw std::invalid_argument("alphas must be sorted");
  }
  const detector::FrozenDetector det(detector);
  struct PerImage {
    Scored clean, attacked;
  };
  const auto scored = parallel_map<PerImage>(data.size(), workers, [&](size_t i) {
    const ImageTensor& x = data[i].image;
    const ImageTensor xp = generator::apply(x, generator::generate(x, gen));
    return PerImage{score_image(det, x), score_image(det, xp)};
  });

  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    SweepRow row;
    row.alpha = alpha;
    for (size_t i = 0; i < data.size(); ++i) {
      const auto& s = scored[i];
      row.total_faces += static_cast<int>(data[i].boxes.size());
      row.clean_detected += count_detected(
          data[i].boxes, detector::detections_from_scores(s.clean.proposals, s.clean.scores, alpha,
                                                          detector::kDefaultNmsIou));
      row.attacked_detected += count_detected(
          data[i].boxes, detector::detections_from_scores(s.attacked.proposals, s.attacked.scores,
                                                          alpha, detector::kDefaultNmsIou));
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<int> default_jpeg_grid() {
  std::vector<int> q;
  for (int v = 10; v <= 100; v += 10) q.push_back(v);
  return q;
}

DefenseCurve jpeg_defense_curve(const std::vector<data::Sample>& data,
                                const detector::DetectorWeights& detector,
                                const generator::GeneratorWeights& gen,
                                const std::vector<int>& qualities, double alpha, int workers) {
  check_alpha(alpha);
  for (int q : qualities) {
    if (q < 1 || q > 100) throw std::invalid_argument("JPEG quality must lie in [1, 100]");
  }
  // Column 0 is the uncompressed attacked image, then one per quality.
  const auto counts = parallel_map<std::vector<int>>(data.size(), workers, [&](size_t i) {
    const ImageTensor& x = data[i].image;
    const ImageTensor xp = generator::apply(x, generator::generate(x, gen));
    std::vector<int> c;
    c.push_back(count_detected(data[i].boxes, detector::detect(xp, detector, alpha)));
    for (int q : qualities) {
      c.push_back(count_detected(data[i].boxes,
                                 detector::detect(data::jpeg_roundtrip(xp, q), detector, alpha)));
    }
    return c;
  });
  int total = 0;
  std::vector<int> sums(qualities.size() + 1, 0);
  for (size_t i = 0; i < data.size(); ++i) {
    total += static_cast<int>(data[i].boxes.size());
    for (size_t k = 0; k < sums.size(); ++k) sums[k] += counts[i][k];
  }
  auto fraction = [&](int n) { return total == 0 ? 0.0 : static_cast<double>(n) / total; };
  DefenseCurve curve;
  curve.uncompressed_fraction = fraction(sums[0]);
  for (size_t k = 0; k < qualities.size(); ++k) {
    curve.points.push_back({qualities[k], fraction(sums[k + 1])});
  }
  return curve;
}

std::vector<RuntimeRow> runtime_benchmark(const std::vector<NamedAttack>& attacks,
                                          const std::vector<data::Sample>& data, int n) {
  constexpr int kWarmup = 3;
  if (n < 10) throw std::invalid_argument("runtime benchmark needs at least 10 images");
  if (static_cast<size_t>(n) > data.size()) {
    throw std::invalid_argument("runtime benchmark asks for " + std::to_string(n) +
                                " images but only " + std::to_string(data.size()) + " exist");
  }
  const std::string note = hardware_note();
  std::vector<RuntimeRow> rows;
  for (const auto& attack : attacks) {
    double seconds = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto start = Clock::now();
      const ImageTensor out = attack.craft(data[static_cast<size_t>(i)].image);
      if (out.size() == 0) throw std::logic_error(attack.name + " returned an empty image");
      const double dt = std::chrono::duration<double>(Clock::now() - start).count();
      if (i >= kWarmup) seconds += dt;
    }
    rows.push_back({attack.name, seconds / (n - kWarmup) * 1000.0, note});
  }
  return rows;
}

std::string hardware_note() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  for (std::string line; std::getline(info, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + ", 1 thread of " + std::to_string(std::thread::hardware_concurrency()) +
         ", CPU only";
}

RawImage render_figure(const ImageTensor& x, const ImageTensor& x_prime,
                       const generator::Perturbation& delta,
                       const detector::DetectionList& detections_clean,
                       const detector::DetectionList& detections_attacked, double magnify) {
  if (!(magnify > 0.0) || !std::isfinite(magnify)) {
    throw std::invalid_argument("magnify must be positive");
  }
  if (!x.tensor().same_shape(x_prime.tensor()) || !x.tensor().same_shape(delta.values)) {
    throw std::invalid_argument("figure panels must share one shape");
  }
  const int h = x.height(), w = x.width();
  RawImage mid(h, w);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (int c = 0; c < 3; ++c) {
        const double v = 127.5 + 127.5 * magnify * delta.values.at(c, y, xx);
        mid.at(y, xx, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v), 0.0, 255.0));
      }
  const int m = kFigureMargin;
  Canvas canvas(h + 2 * m, 3 * w + 4 * m);
  canvas.blit(data::to_raw(x), m, m);
  canvas.blit(mid, m, 2 * m + w);
  canvas.blit(data::to_raw(x_prime), m, 3 * m + 2 * w);
  annotate(canvas, detections_clean, m, m, {0, 200, 0});
  annotate(canvas, detections_attacked, m, 3 * m + 2 * w, {220, 0, 0});
  return canvas.release();
}

void export_figure(const ImageTensor& x, const ImageTensor& x_prime,
                   const generator::Perturbation& delta,
                   const detector::DetectionList& detections_clean,
                   const detector::DetectionList& detections_attacked, double magnify,
                   const std::filesystem::path& path) {
  io::write_png(path,
                render_figure(x, x_prime, delta, detections_clean, detections_attacked, magnify));
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "alpha,clean_detected,attacked_detected,total_faces\n";
  for (const auto& r : rows) {
    out << fmt_double(r.alpha) << ',' << r.clean_detected << ',' << r.attacked_detected << ','
        << r.total_faces << '\n';
  }
}

void write_defense_csv(const DefenseCurve& curve, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "jpeg_quality,detected_fraction\n";
  out << "none," << fmt_double(curve.uncompressed_fraction) << '\n';
  for (const auto& p : curve.points) {
    out << p.jpeg_quality << ',' << fmt_double(p.detected_fraction) << '\n';
  }
}

void write_runtime_csv(const std::vector<RuntimeRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "attack_name,seconds_per_1000,hardware_note\n";
  for (const auto& r : rows) {
    out << r.attack_name << ',' << fmt_double(r.seconds_per_1000) << ",\"" << r.hardware_note
        << "\"\n";
  }
}

nlohmann::json to_json(const SweepRow& row) {
  return {{"alpha", row.alpha},
          {"clean_detected", row.clean_detected},
          {"attacked_detected", row.attacked_detected},
          {"total_faces", row.total_faces}};
}

nlohmann::json to_json(const DefenseCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"jpeg_quality", p.jpeg_quality}, {"detected_fraction", p.detected_fraction}});
  }
  return {{"uncompressed_fraction", curve.uncompressed_fraction}, {"points", points}};
}

nlohmann::json to_json(const RuntimeRow& row) {
  return {{"attack_name", row.attack_name},
          {"seconds_per_1000", row.seconds_per_1000},
          {"hardware_note", row.hardware_note}};
}

}  // namespace advgen::evaluation
