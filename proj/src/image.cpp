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

#include "advgen/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace advgen {

double Box::area() const { return std::max(0.0, width()) * std::max(0.0, height()); }

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

RawImage::RawImage(int height, int width)
    : RawImage(height, width,
               std::vector<std::uint8_t>(static_cast<size_t>(std::max(height, 0)) *
                                         std::max(width, 0) * 3)) {}

RawImage::RawImage(int height, int width, std::vector<std::uint8_t> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height < kMinSide || width < kMinSide) {
    throw std::invalid_argument("image must be at least 16x16, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  if (pixels_.size() != static_cast<size_t>(height) * width * 3) {
    throw std::invalid_argument("pixel buffer size does not match " +
                                std::to_string(height) + "x" + std::to_string(width) + "x3");
  }
}

ImageTensor::ImageTensor(int height, int width, double fill)
    : values_({3, height, width}, fill) {
  if (fill < -1.0 || fill > 1.0) throw std::invalid_argument("ImageTensor fill outside [-1, 1]");
}

ImageTensor ImageTensor::from_tensor(nn::Tensor values) {
  if (values.rank() != 3 || values.dim(0) != 3) {
    throw std::invalid_argument("ImageTensor needs shape {3, H, W}, got " +
                                values.shape_string());
  }
  for (double v : values.values()) {
    if (!(v >= -1.0 && v <= 1.0)) {
      throw std::invalid_argument("ImageTensor value " + std::to_string(v) +
                                  " outside [-1, 1]");
    }
  }
  ImageTensor img;
  img.values_ = std::move(values);
  return img;
}

void ImageTensor::set(int y, int x, int c, double v) {
  if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument("ImageTensor value outside [-1, 1]");
  values_.at(c, y, x) = v;
}

}  // namespace advgen
