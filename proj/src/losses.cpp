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

#include "advgen/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "advgen/nn/ops.hpp"

namespace advgen::losses {
namespace {

void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be positive and finite, got " +
                                std::to_string(lambda));
  }
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NonFiniteLoss(std::string(what) + " is not finite");
}

}  // namespace

nlohmann::json LossBreakdown::to_json() const {
  return {{"l2", l2_term}, {"misclassify", misclassify_term}, {"lambda", lambda}, {"total", total}};
}

double l2_loss(const ImageTensor& x, const ImageTensor& x_prime) {
  if (!x.tensor().same_shape(x_prime.tensor())) {
    throw std::invalid_argument("l2_loss shape mismatch: " + x.tensor().shape_string() +
                                " vs " + x_prime.tensor().shape_string());
  }
  const auto a = x.values();
  const auto b = x_prime.values();
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

double misclassify_loss(const detector::ScoreMatrix& z) {
  double s = 0.0;
  for (const auto& row : z.logits) {
    const double face = row[detector::ScoreMatrix::kFace];
    const double bg = row[detector::ScoreMatrix::kBackground];
    check_finite(face, "face logit");
    check_finite(bg, "background logit");
    s += std::max(face - bg, 0.0);
  }
  return s;
}

LossBreakdown total_loss(const ImageTensor& x, const ImageTensor& x_prime,
                         const detector::ScoreMatrix& z, double lambda) {
  check_lambda(lambda);
  LossBreakdown b;
  b.l2_term = l2_loss(x, x_prime);
  b.misclassify_term = misclassify_loss(z);
  b.lambda = lambda;
  b.total = b.l2_term + lambda * b.misclassify_term;
  check_finite(b.total, "total loss");
  return b;
}

LossGraph total_loss(const nn::Var& x, const nn::Var& x_prime, const nn::Var& logits,
                     double lambda) {
  check_lambda(lambda);
  LossGraph out;
  nn::Var l2 = nn::squared_distance(x_prime, x);
  nn::Var hinge = nn::face_margin_hinge(logits);
  const std::array<nn::Var, 2> terms{l2, hinge};
  const std::array<double, 2> weights{1.0, lambda};
  out.total = nn::weighted_sum(terms, weights);
  out.breakdown.l2_term = l2.value()[0];
  out.breakdown.misclassify_term = hinge.value()[0];
  out.breakdown.lambda = lambda;
  out.breakdown.total = out.total.value()[0];
  check_finite(out.breakdown.l2_term, "l2 term");
  check_finite(out.breakdown.misclassify_term, "misclassify term");
  check_finite(out.breakdown.total, "total loss");
  return out;
}

}  // namespace advgen::losses
