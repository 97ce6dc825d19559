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

#ifndef ADVGEN_LOSSES_HPP_
#define ADVGEN_LOSSES_HPP_

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "advgen/detector.hpp"
#include "advgen/image.hpp"
#include "advgen/nn/graph.hpp"

// Attack objective: squared L2 distance between the clean and perturbed
// images plus lambda times a hinge on every proposal that still prefers
// the face class.

namespace advgen::losses {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossBreakdown {
  double l2_term = 0.0;
  double misclassify_term = 0.0;
  double lambda = 1.0;
  double total = 0.0;

  nlohmann::json to_json() const;
};

/// ||x - x'||^2.
double l2_loss(const ImageTensor& x, const ImageTensor& x_prime);

/// sum_i max(Z_face,i - Z_bg,i, 0). Throws NonFiniteLoss on NaN/inf logits.
double misclassify_loss(const detector::ScoreMatrix& z);

LossBreakdown total_loss(const ImageTensor& x, const ImageTensor& x_prime,
                         const detector::ScoreMatrix& z, double lambda);

/// Differentiable counterpart: `total` is a scalar node whose gradient
/// reaches x' (and anything x' was computed from) through both terms.
struct LossGraph {
  nn::Var total;
  LossBreakdown breakdown;
};
LossGraph total_loss(const nn::Var& x, const nn::Var& x_prime, const nn::Var& logits,
                     double lambda);

}  // namespace advgen::losses

#endif  // ADVGEN_LOSSES_HPP_
