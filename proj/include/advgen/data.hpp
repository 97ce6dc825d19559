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

#ifndef ADVGEN_DATA_HPP_
#define ADVGEN_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "advgen/image.hpp"

namespace advgen::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Single-class ("face") ground-truth box. Must lie inside its image with
/// x_min < x_max and y_min < y_max.
using GroundTruthBox = Box;

struct ImageItem {
  std::string name;
  RawImage image;
  std::vector<GroundTruthBox> boxes;

  bool operator==(const ImageItem&) const = default;
};

struct ImageSet {
  std::vector<ImageItem> items;
  std::string split_name;
  std::uint64_t seed = 0;
  /// Files skipped while loading, one message each.
  std::vector<std::string> warnings;

  size_t size() const { return items.size(); }
  size_t box_count() const;
};

struct Size {
  int height = 0;
  int width = 0;
  bool operator==(const Size&) const = default;
};

/// A preprocessed image with its boxes scaled to the tensor resolution.
struct Sample {
  std::string name;
  ImageTensor image;
  std::vector<Box> boxes;
};

/// Reads every PNG/JPEG in `dir` (sorted by filename) plus an annotation CSV
/// `filename,x_min,y_min,x_max,y_max`. Images without rows get no boxes;
/// undecodable files are skipped and reported in `warnings`.
ImageSet load_folder(const std::filesystem::path& dir, const std::filesystem::path& annotations);

/// Writes `img_NNNNN.png` files and `annotations.csv` in the same format
/// load_folder reads. Output bytes depend only on the set's contents.
void export_folder(const ImageSet& set, const std::filesystem::path& dir);

struct SynthOptions {
  int min_faces = 1;
  int max_faces = 3;
  int max_distractors = 2;
};

/// Procedural face-glyph dataset: textured background, 1-3 non-overlapping
/// faces (head ellipse, two eyes, mouth) and a few non-face distractor shapes.
/// Identical (n, canvas, seed, options) give identical sets.
ImageSet synth_faces(int n, Size canvas, std::uint64_t seed, const SynthOptions& options = {});

/// Bilinear resize followed by v / 127.5 - 1.
ImageTensor preprocess(const RawImage& img, Size target);

std::vector<Box> scale_boxes(const std::vector<Box>& boxes, Size from, Size to);

/// Preprocesses every item and rescales its boxes to `target`.
std::vector<Sample> prepare(const ImageSet& set, Size target);

/// Inverse of the normalisation, rounding to the nearest 8-bit level.
RawImage to_raw(const ImageTensor& img);
ImageTensor from_raw(const RawImage& img);

/// 8-bit quantise, baseline JPEG encode at `quality`, decode, renormalise.
/// Chroma is 4:2:0 below quality 90 and 4:4:4 from 90 up.
ImageTensor jpeg_roundtrip(const ImageTensor& img, int quality);

}  // namespace advgen::data

#endif  // ADVGEN_DATA_HPP_
