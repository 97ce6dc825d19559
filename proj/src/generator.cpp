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

#include "advgen/generator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "advgen/checkpoint.hpp"
#include "advgen/image_io.hpp"
#include "advgen/nn/ops.hpp"

namespace advgen::generator {
namespace {

nn::Var conv(const nn::BoundParams& p, const std::string& name, const nn::Var& x, int stride) {
  return nn::conv2d(x, p[name + ".w"], p[name + ".b"], stride, 1);
}

void check_geometry(int height, int width) {
  if (height < RawImage::kMinSide || width < RawImage::kMinSide ||
      height % GeneratorWeights::kStrideMultiple || width % GeneratorWeights::kStrideMultiple) {
    throw std::invalid_argument("generator input sides must be multiples of 4 and at least 16, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

nlohmann::json GeneratorConfig::to_json() const {
  return {{"epsilon_max", epsilon_max}, {"base_channels", base_channels}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.epsilon_max = j.at("epsilon_max").get<double>();
  c.base_channels = j.at("base_channels").get<int>();
  return c;
}

double Perturbation::l2_norm() const {
  double s = 0.0;
  for (double v : values.values()) s += v * v;
  return std::sqrt(s);
}

GeneratorWeights init_generator(const GeneratorConfig& config, int height, int width,
                                std::uint64_t seed) {
  if (!(config.epsilon_max > 0.0)) throw std::invalid_argument("epsilon_max must be positive");
  if (config.base_channels < 1) throw std::invalid_argument("base_channels must be positive");
  check_geometry(height, width);
  std::mt19937_64 rng(seed);
  const int c = config.base_channels;
  GeneratorWeights w;
  w.config = config;
  w.height = height;
  w.width = width;
  w.seed = seed;
  auto add_conv = [&](const std::string& name, int out, int in) {
    w.params.add(name + ".w", nn::he_normal({out, in, 3, 3}, rng));
    w.params.add(name + ".b", nn::Tensor({out}));
  };
  add_conv("enc1", c, 3);
  add_conv("enc2", 2 * c, c);
  add_conv("enc3", 2 * c, 2 * c);
  add_conv("dec1", c, 3 * c);
  // Zero output layer: training starts from the identity attack.
  w.params.add("out.w", nn::Tensor({3, c, 3, 3}));
  w.params.add("out.b", nn::Tensor({3}));
  return w;
}

nn::Var forward(const nn::BoundParams& p, const GeneratorConfig& config, const nn::Var& image) {
  const auto& shape = image.value().shape();
  if (shape.size() != 3 || shape[0] != 3) {
    throw std::invalid_argument("generator expects a {3, H, W} image");
  }
  check_geometry(shape[1], shape[2]);
  // Everything but the output layer runs at half or quarter resolution.
  nn::Var e1 = nn::relu(conv(p, "enc1", image, 2));
  nn::Var e2 = nn::relu(conv(p, "enc2", e1, 2));
  nn::Var e3 = nn::relu(conv(p, "enc3", e2, 1));
  nn::Var d1 = nn::relu(conv(p, "dec1", nn::concat_channels(nn::upsample2x(e3), e1), 1));
  return nn::scale(nn::tanh(conv(p, "out", nn::upsample2x(d1), 1)), config.epsilon_max);
}

Perturbation generate(const ImageTensor& x, const GeneratorWeights& weights) {
  if (x.height() != weights.height || x.width() != weights.width) {
    throw std::invalid_argument(
        "image is " + std::to_string(x.height()) + "x" + std::to_string(x.width()) +
        " but the generator was trained at " + std::to_string(weights.height) + "x" +
        std::to_string(weights.width));
  }
  const nn::BoundParams p(weights.params, /*trainable=*/false);
  return {forward(p, weights.config, nn::constant(x.tensor())).value()};
}

ImageTensor apply(const ImageTensor& x, const Perturbation& delta) {
  if (!x.tensor().same_shape(delta.values)) {
    throw std::invalid_argument("perturbation shape " + delta.values.shape_string() +
                                " does not match image " + x.tensor().shape_string());
  }
  nn::Tensor out = x.tensor();
  for (size_t i = 0; i < out.size(); ++i) {
    // NaN maps to -1 so the range invariant holds for any input.
    const double v = out[i] + delta.values[i];
    out[i] = v > 1.0 ? 1.0 : (v >= -1.0 ? v : -1.0);
  }
  return ImageTensor::from_tensor(std::move(out));
}

nn::Var apply(const nn::Var& x, const nn::Var& delta) {
  return nn::clamp(nn::add(x, delta), -1.0, 1.0);
}

std::string serialize(const GeneratorWeights& weights) {
  Checkpoint ckpt;
  ckpt.kind = "generator";
  ckpt.metadata = {{"version", GeneratorWeights::kVersion},
                   {"seed", weights.seed},
                   {"epochs", weights.epochs},
                   {"input_resolution", {weights.height, weights.width}},
                   {"epsilon_max", weights.config.epsilon_max},
                   {"config", weights.config.to_json()},
                   {"training", weights.training}};
  ckpt.sections.emplace_back("params", weights.params);
  return serialize_checkpoint(ckpt);
}

GeneratorWeights parse_generator(std::string_view bytes) {
  Checkpoint ckpt = parse_checkpoint(bytes);
  if (ckpt.kind != "generator") {
    throw CheckpointError("expected a generator checkpoint, found '" + ckpt.kind + "'");
  }
  GeneratorWeights w;
  try {
    const auto& m = ckpt.metadata;
    w.config = GeneratorConfig::from_json(m.at("config"));
    const auto res = m.at("input_resolution").get<std::array<int, 2>>();
    w.height = res[0];
    w.width = res[1];
    w.seed = m.at("seed").get<std::uint64_t>();
    w.epochs = m.at("epochs").get<int>();
    w.training = m.at("training");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad generator metadata: ") + e.what());
  }
  w.params = ckpt.section("params");
  const GeneratorWeights reference = init_generator(w.config, w.height, w.width, 0);
  if (reference.params.entries().size() != w.params.entries().size()) {
    throw CheckpointError("generator checkpoint does not match the architecture");
  }
  for (size_t i = 0; i < w.params.entries().size(); ++i) {
    const auto& want = reference.params.entries()[i];
    const auto& got = w.params.entries()[i];
    if (want.name != got.name || !want.value.same_shape(got.value)) {
      throw CheckpointError("generator parameter mismatch at " + got.name);
    }
  }
  return w;
}

void save(const GeneratorWeights& weights, const std::filesystem::path& path) {
  io::write_file(path, serialize(weights));
}

GeneratorWeights load_generator(const std::filesystem::path& path) {
  return parse_generator(io::read_file(path));
}

std::string weights_hash(const GeneratorWeights& weights) { return sha256_hex(serialize(weights)); }

}  // namespace advgen::generator
