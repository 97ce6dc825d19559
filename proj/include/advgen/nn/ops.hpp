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

#ifndef ADVGEN_NN_OPS_HPP_
#define ADVGEN_NN_OPS_HPP_

#include <array>
#include <span>
#include <vector>

#include "advgen/nn/graph.hpp"

namespace advgen::nn {

// Feature-map ops work on a single image laid out {C, H, W}.

/// 2-D convolution. `weight` is {O, C, k, k}, `bias` is {O}.
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride,
           int pad);
Var relu(const Var& x);
Var tanh(const Var& x);
Var scale(const Var& x, double factor);
Var add(const Var& a, const Var& b);
Var concat_channels(const Var& a, const Var& b);
/// Nearest-neighbour 2x upsampling of a {C, H, W} map.
Var upsample2x(const Var& x);
/// Element-wise clamp; gradient passes only where the input is inside
/// [lo, hi].
Var clamp(const Var& x, double lo, double hi);

/// Row-wise affine map: `x` {N, D}, `weight` {O, D}, `bias` {O} -> {N, O}.
Var linear(const Var& x, const Var& weight, const Var& bias);

/// Box as (x_min, y_min, x_max, y_max) in input-image pixels.
using BoxCoords = std::array<double, 4>;

/// Fixed-size bilinear crop of a {C, Hf, Wf} feature map for every box.
///
/// Each box is split into `out_size` x `out_size` bins and the feature map is
/// sampled once at every bin centre. `spatial_scale` maps image pixels to
/// feature cells. Result is {N, C * out_size * out_size}.
Var roi_crop(const Var& features, std::span<const BoxCoords> boxes,
             double spatial_scale, int out_size);

/// Selects rows of a {N, D} matrix.
Var gather_rows(const Var& x, std::span<const int> rows);

/// Scalar sum of all elements.
Var sum(const Var& x);
/// Scalar sum_i (a_i - b_i)^2.
Var squared_distance(const Var& a, const Var& b);
/// Scalar sum over rows of max(z[i][1] - z[i][0], 0) for a {N, 2} matrix.
Var face_margin_hinge(const Var& logits);
/// Scalar weighted sum of scalars.
Var weighted_sum(std::span<const Var> terms, std::span<const double> weights);

/// Mean binary cross-entropy over the listed entries of a flat logit tensor.
Var sigmoid_bce(const Var& logits, std::span<const int> indices,
                std::span<const double> targets);
/// Mean smooth-L1 (beta = 1) over the listed entries.
Var smooth_l1(const Var& pred, std::span<const int> indices,
              std::span<const double> targets, double normalizer);
/// Mean softmax cross-entropy of a {N, K} logit matrix against class labels.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);

}  // namespace advgen::nn

#endif  // ADVGEN_NN_OPS_HPP_
