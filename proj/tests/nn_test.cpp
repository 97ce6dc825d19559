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

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "advgen/nn/adam.hpp"
#include "advgen/nn/graph.hpp"
#include "advgen/nn/ops.hpp"
#include "advgen/nn/params.hpp"

namespace advgen::nn {
namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Compares the reverse-mode gradient of a scalar function with central
// differences at every coordinate of `at`.
void expect_gradient_matches(const std::function<Var(const Var&)>& f, const Tensor& at,
                             double h = 1e-5, double tol = 1e-6) {
  Var x = leaf(at);
  Var y = f(x);
  ASSERT_EQ(y.value().size(), 1u);
  backward(y);
  const Tensor analytic = x.grad().empty() ? Tensor::zeros_like(at) : x.grad();
  for (size_t i = 0; i < at.size(); ++i) {
    Tensor plus = at, minus = at;
    plus[i] += h;
    minus[i] -= h;
    const double numeric =
        (f(constant(plus)).value()[0] - f(constant(minus)).value()[0]) / (2 * h);
    EXPECT_NEAR(analytic[i], numeric, tol * std::max(1.0, std::abs(numeric))) << "coordinate " << i;
  }
}

// Direct seven-loop convolution.
Tensor conv_reference(const Tensor& in, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int c = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const int o = w.dim(0), k = w.dim(2);
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor out({o, oh, ow});
  for (int oc = 0; oc < o; ++oc)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double s = b[oc];
        for (int ic = 0; ic < c; ++ic)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = y * stride - pad + ky, ix = x * stride - pad + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              s += in.at(ic, iy, ix) * w[((static_cast<size_t>(oc) * c + ic) * k + ky) * k + kx];
            }
        out.at(oc, y, x) = s;
      }
  return out;
}

TEST(Tensor, ShapeAndReshape) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.reshaped({6, 4}).shape(), (std::vector<int>{6, 4}));
  EXPECT_THROW(t.reshaped({5, 5}), std::invalid_argument);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
}

class ConvCase : public ::testing::TestWithParam<std::pair<int, int>> {};

TEST_P(ConvCase, MatchesDirectLoops) {
  const auto [stride, pad] = GetParam();
  std::mt19937_64 rng(1);
  const Tensor in = random_tensor({3, 9, 8}, rng);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng);
  const Tensor b = random_tensor({4}, rng);
  const Tensor got = conv2d(constant(in), constant(w), constant(b), stride, pad).value();
  const Tensor want = conv_reference(in, w, b, stride, pad);
  ASSERT_EQ(got.shape(), want.shape());
  for (size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST_P(ConvCase, GradientsMatchFiniteDifferences) {
  const auto [stride, pad] = GetParam();
  std::mt19937_64 rng(2);
  const Tensor in = random_tensor({2, 6, 7}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor probe = random_tensor(conv_reference(in, w, b, stride, pad).shape(), rng);
  auto weighted = [&](const Var& out) {
    return sum(scale(squared_distance(out, constant(probe)), 0.5));
  };
  expect_gradient_matches(
      [&](const Var& x) { return weighted(conv2d(x, constant(w), constant(b), stride, pad)); }, in);
  expect_gradient_matches(
      [&](const Var& v) { return weighted(conv2d(constant(in), v, constant(b), stride, pad)); }, w);
  expect_gradient_matches(
      [&](const Var& v) { return weighted(conv2d(constant(in), constant(w), v, stride, pad)); }, b);
}

INSTANTIATE_TEST_SUITE_P(StridesAndPadding, ConvCase,
                         ::testing::Values(std::pair{1, 1}, std::pair{2, 1}, std::pair{1, 0},
                                           std::pair{2, 0}));

TEST(Ops, ElementwiseGradients) {
  std::mt19937_64 rng(3);
  // Values kept away from the relu kink and the clamp edges.
  Tensor at = random_tensor({2, 4, 4}, rng, 0.05, 0.9);
  for (size_t i = 0; i < at.size(); i += 2) at[i] = -at[i];
  const Tensor other = random_tensor({2, 4, 4}, rng);
  expect_gradient_matches([](const Var& x) { return sum(tanh(x)); }, at);
  expect_gradient_matches([&](const Var& x) { return squared_distance(relu(x), constant(other)); },
                          at);
  expect_gradient_matches(
      [&](const Var& x) { return squared_distance(clamp(scale(x, 1.3), -0.6, 0.6), constant(other)); },
      at);
  expect_gradient_matches(
      [&](const Var& x) { return squared_distance(add(x, x), constant(other)); }, at);
  expect_gradient_matches(
      [&](const Var& x) {
        return squared_distance(upsample2x(x), constant(Tensor({2, 8, 8}, 0.25)));
      },
      at);
  expect_gradient_matches(
      [&](const Var& x) {
        return squared_distance(concat_channels(x, tanh(x)), constant(Tensor({4, 4, 4}, 0.1)));
      },
      at);
}

TEST(Ops, ClampBlocksGradientOutsideRange) {
  Var x = leaf(Tensor({3}, std::vector<double>{-2.0, 0.5, 2.0}));
  backward(sum(clamp(x, -1.0, 1.0)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(Ops, LinearAndRowGradients) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({5, 6}, rng);
  const Tensor w = random_tensor({3, 6}, rng);
  const Tensor b = random_tensor({3}, rng);
  const std::vector<int> rows{4, 0, 4};
  const Tensor probe = random_tensor({3, 3}, rng);
  expect_gradient_matches(
      [&](const Var& v) {
        return squared_distance(gather_rows(linear(v, constant(w), constant(b)), rows),
                                constant(probe));
      },
      x);
  expect_gradient_matches(
      [&](const Var& v) {
        return squared_distance(linear(constant(x), v, constant(b)), constant(Tensor({5, 3})));
      },
      w);
}

TEST(Ops, RoiCropGradient) {
  std::mt19937_64 rng(5);
  const Tensor features = random_tensor({2, 6, 6}, rng);
  const std::vector<BoxCoords> boxes{{3.1, 2.2, 17.9, 20.3}, {0.0, 0.0, 23.0, 23.0}};
  const Tensor probe = random_tensor({2, 2 * 3 * 3}, rng);
  expect_gradient_matches(
      [&](const Var& f) { return squared_distance(roi_crop(f, boxes, 0.25, 3), constant(probe)); },
      features);
}

TEST(Ops, LossHeadGradients) {
  std::mt19937_64 rng(6);
  const Tensor logits = random_tensor({6, 2}, rng, -2.0, 2.0);
  const std::vector<int> labels{0, 1, 1, 0, 1, 0};
  expect_gradient_matches([&](const Var& z) { return softmax_cross_entropy(z, labels); }, logits);
  const std::vector<int> idx{0, 3, 7, 11};
  const std::vector<double> targets{1.0, 0.0, 1.0, 0.0};
  expect_gradient_matches([&](const Var& z) { return sigmoid_bce(z, idx, targets); }, logits);
  const std::vector<double> reg{0.3, -2.5, 0.1, 4.0};
  expect_gradient_matches([&](const Var& z) { return smooth_l1(z, idx, reg, 4.0); }, logits);

  Tensor margin = random_tensor({6, 2}, rng, -2.0, 2.0);
  for (int r = 0; r < 6; ++r) {
    if (std::abs(margin[2 * r + 1] - margin[2 * r]) < 0.05) margin[2 * r + 1] += 0.2;
  }
  expect_gradient_matches([](const Var& z) { return face_margin_hinge(z); }, margin);
  const std::vector<double> weights{1.0, 10.0};
  expect_gradient_matches(
      [&](const Var& z) {
        const std::vector<Var> terms{sum(tanh(z)), face_margin_hinge(z)};
        return weighted_sum(terms, weights);
      },
      margin);
}

TEST(Graph, ConstantsRecordNothing) {
  std::mt19937_64 rng(7);
  const Tensor in = random_tensor({3, 8, 8}, rng);
  const Tensor w = random_tensor({4, 3, 3, 3}, rng);
  const GraphStats before = graph_stats();
  Var out = relu(conv2d(constant(in), constant(w), constant(Tensor({4})), 1, 1));
  EXPECT_FALSE(out.requires_grad());
  EXPECT_EQ(graph_stats().recorded_nodes, before.recorded_nodes);
  EXPECT_EQ(graph_stats().backward_passes, before.backward_passes);
}

TEST(Graph, DetachCutsGradient) {
  Var x = leaf(Tensor({2}, std::vector<double>{1.0, 2.0}));
  Var y = add(x, scale(x.detach(), 3.0));
  backward(sum(y));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[1], 1.0);
}

TEST(Adam, MatchesHandWrittenUpdate) {
  ParamSet params;
  params.add("w", Tensor({3}, std::vector<double>{0.5, -1.0, 2.0}));
  AdamOptions opt;
  opt.learning_rate = 0.1;
  Adam adam(params, opt);
  std::vector<double> w{0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0);
  std::mt19937_64 rng(8);
  for (int t = 1; t <= 5; ++t) {
    const Tensor g = random_tensor({3}, rng);
    adam.step(params, std::span<const Tensor>(&g, 1));
    for (int i = 0; i < 3; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      w[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(params.get("w")[i], w[i], 1e-12);
  }
  EXPECT_EQ(adam.steps_taken(), 5);
}

TEST(Adam, RestoreContinuesIdentically) {
  ParamSet a;
  a.add("w", Tensor({2}, std::vector<double>{1.0, 1.0}));
  ParamSet b = a;
  Adam first(a, {}), second(b, {});
  const Tensor g({2}, std::vector<double>{0.3, -0.7});
  first.step(a, std::span<const Tensor>(&g, 1));
  second.step(b, std::span<const Tensor>(&g, 1));
  Adam resumed(b, {});
  resumed.restore(second.state(), second.steps_taken());
  first.step(a, std::span<const Tensor>(&g, 1));
  resumed.step(b, std::span<const Tensor>(&g, 1));
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace advgen::nn
