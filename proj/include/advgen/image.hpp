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

#ifndef ADVGEN_IMAGE_HPP_
#define ADVGEN_IMAGE_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advgen/nn/tensor.hpp"

namespace advgen {

/// Axis-aligned box in pixel coordinates.
struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const;
  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

/// 8-bit RGB image, interleaved height x width x 3.
class RawImage {
 public:
  static constexpr int kMinSide = 16;

  RawImage() = default;
  RawImage(int height, int width);
  RawImage(int height, int width, std::vector<std::uint8_t> pixels);

  int height() const { return height_; }
  int width() const { return width_; }
  std::uint8_t& at(int y, int x, int c) {
    return pixels_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels_[(static_cast<size_t>(y) * width_ + x) * 3 + c];
  }
  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  std::optional<std::string> source_path;

  bool operator==(const RawImage& other) const {
    return height_ == other.height_ && width_ == other.width_ && pixels_ == other.pixels_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Normalised image, every value in [-1, 1]. Stored channel-major {3, H, W}
/// so it can feed the networks directly; `at(y, x, c)` gives the
/// height x width x 3 view.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, double fill = 0.0);
  /// Validates shape {3, H, W} and the [-1, 1] range.
  static ImageTensor from_tensor(nn::Tensor values);

  int height() const { return values_.empty() ? 0 : values_.dim(1); }
  int width() const { return values_.empty() ? 0 : values_.dim(2); }
  double at(int y, int x, int c) const { return values_.at(c, y, x); }
  void set(int y, int x, int c, double v);

  const nn::Tensor& tensor() const { return values_; }
  std::span<const double> values() const { return values_.values(); }
  size_t size() const { return values_.size(); }

  bool operator==(const ImageTensor&) const = default;

 private:
  nn::Tensor values_;
};

}  // namespace advgen

#endif  // ADVGEN_IMAGE_HPP_
