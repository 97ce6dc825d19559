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

#ifndef ADVGEN_TESTS_ORACLES_HPP_
#define ADVGEN_TESTS_ORACLES_HPP_

// Independent reference implementations used by the unit and acceptance
// suites. None of them call into the library code they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "advgen/image.hpp"

namespace advgen::oracle {

inline double box_iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = (a.x_max - a.x_min) * (a.y_max - a.y_min) +
                     (b.x_max - b.x_min) * (b.y_max - b.y_min) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

/// NMS by exhaustive search: the kept set is the unique subset S in which a
/// box belongs to S exactly when no higher-priority member of S overlaps it
/// above the threshold. Priority is score, then lower index. Returns S in
/// priority order.
inline std::vector<int> nms_exhaustive(const std::vector<Box>& boxes,
                                       const std::vector<double>& scores, double threshold) {
  const int n = static_cast<int>(boxes.size());
  auto outranks = [&](int j, int i) {
    return scores[j] > scores[i] || (scores[j] == scores[i] && j < i);
  };
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    bool valid = true;
    for (int i = 0; i < n && valid; ++i) {
      bool covered = false;
      for (int j = 0; j < n; ++j) {
        if ((mask >> j & 1u) && j != i && outranks(j, i) && box_iou(boxes[j], boxes[i]) > threshold) {
          covered = true;
        }
      }
      valid = static_cast<bool>(mask >> i & 1u) == !covered;
    }
    if (!valid) continue;
    std::vector<int> kept;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1u) kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end(), [&](int a, int b) { return outranks(a, b); });
    return kept;
  }
  return {};
}

/// Random NMS instance: up to `max_boxes` boxes clustered so that overlaps
/// are common, scores on a coarse grid so that ties occur.
struct NmsInstance {
  std::vector<Box> boxes;
  std::vector<double> scores;
};

inline NmsInstance random_nms_instance(std::mt19937_64& rng, int max_boxes) {
  std::uniform_int_distribution<int> count(0, max_boxes);
  std::uniform_real_distribution<double> pos(0.0, 12.0), size(4.0, 14.0);
  std::uniform_int_distribution<int> level(1, 9);
  NmsInstance inst;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double x = pos(rng), y = pos(rng);
    inst.boxes.push_back({x, y, x + size(rng), y + size(rng)});
    inst.scores.push_back(level(rng) / 10.0);
  }
  return inst;
}

/// Summed face margin, accumulated in long double in reverse row order.
inline double hinge_reference(const std::vector<std::array<double, 2>>& z) {
  long double s = 0;
  for (size_t k = z.size(); k-- > 0;) {
    const long double d = static_cast<long double>(z[k][1]) - z[k][0];
    if (d > 0) s += d;
  }
  return static_cast<double>(s);
}

/// Squared Euclidean distance accumulated in long double.
template <typename A, typename B>
double squared_distance_reference(const A& a, const B& b) {
  long double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - b[i];
    s += d * d;
  }
  return static_cast<double>(s);
}

}  // namespace advgen::oracle

#endif  // ADVGEN_TESTS_ORACLES_HPP_
