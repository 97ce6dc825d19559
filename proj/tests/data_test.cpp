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
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "advgen/checkpoint.hpp"
#include "advgen/data.hpp"
#include "advgen/image_io.hpp"

namespace advgen {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("advgen_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

RawImage noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RawImage img(h, w);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

TEST(Box, IouMatchesHandComputedValues) {
  const Box a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {5, 0, 15, 10}), 50.0 / 150.0);
  EXPECT_DOUBLE_EQ(iou(a, {10, 10, 20, 20}), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, {2, 2, 4, 4}), 4.0 / 100.0);
}

TEST(ImageTensor, RejectsOutOfRangeValues) {
  EXPECT_THROW(ImageTensor(16, 16, 1.5), std::invalid_argument);
  nn::Tensor t({3, 16, 16}, 0.0);
  t[7] = -1.0001;
  EXPECT_THROW(ImageTensor::from_tensor(t), std::invalid_argument);
  t[7] = std::nan("");
  EXPECT_THROW(ImageTensor::from_tensor(t), std::invalid_argument);
  EXPECT_THROW(ImageTensor::from_tensor(nn::Tensor({1, 16, 16})), std::invalid_argument);
}

TEST(RawImage, RejectsTinyImages) {
  EXPECT_THROW(RawImage(15, 40), std::invalid_argument);
  EXPECT_THROW(RawImage(16, 16, std::vector<std::uint8_t>(10)), std::invalid_argument);
}

TEST(Codecs, PngRoundTripIsExact) {
  const RawImage img = noise_image(20, 33, 1);
  EXPECT_EQ(io::decode_png(io::encode_png(img)), img);
  EXPECT_EQ(io::decode_image(io::encode_png(img)), img);
}

TEST(Codecs, JpegQualityControlsError) {
  const RawImage img = data::synth_faces(1, {64, 64}, 3).items[0].image;
  auto mean_abs_error = [&](int q) {
    const RawImage back = io::decode_image(io::encode_jpeg(img, q, io::ChromaSubsampling::k444));
    double s = 0;
    for (size_t i = 0; i < img.pixels().size(); ++i) {
      s += std::abs(static_cast<int>(img.pixels()[i]) - static_cast<int>(back.pixels()[i]));
    }
    return s / static_cast<double>(img.pixels().size());
  };
  EXPECT_LT(mean_abs_error(100), 1.5);
  EXPECT_LT(mean_abs_error(100), mean_abs_error(10));
  EXPECT_THROW(io::encode_jpeg(img, 0, io::ChromaSubsampling::k420), io::CodecError);
  EXPECT_THROW(io::encode_jpeg(img, 101, io::ChromaSubsampling::k420), io::CodecError);
}

TEST(Codecs, GarbageIsACodecError) {
  EXPECT_THROW(io::decode_image("definitely not an image"), io::CodecError);
  EXPECT_THROW(io::decode_png("\x89PNG\r\n\x1a\n truncated"), io::CodecError);
}

TEST(Checkpoint, RoundTripReproducesBytes) {
  Checkpoint ckpt;
  ckpt.kind = "unit";
  ckpt.metadata = {{"epochs", 3}, {"note", "x"}, {"rate", 0.1}};
  nn::ParamSet p;
  p.add("a", nn::Tensor({2, 2}, std::vector<double>{1.0, -0.0, 1e-300, 0.1}));
  p.add("b", nn::Tensor({3}, 7.25));
  ckpt.sections.emplace_back("params", p);
  const std::string bytes = serialize_checkpoint(ckpt);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(back.kind, "unit");
  EXPECT_EQ(back.section("params"), p);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(sha256_hex(bytes), sha256_hex(serialize_checkpoint(back)));
  EXPECT_THROW(back.section("missing"), CheckpointError);
}

TEST(Checkpoint, CorruptInputsAreRejected) {
  Checkpoint ckpt;
  ckpt.kind = "unit";
  nn::ParamSet p;
  p.add("a", nn::Tensor({4}, 1.0));
  ckpt.sections.emplace_back("params", p);
  const std::string bytes = serialize_checkpoint(ckpt);
  EXPECT_THROW(parse_checkpoint("NOTACKPT" + bytes.substr(8)), CheckpointError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  EXPECT_THROW(parse_checkpoint(bytes + "x"), CheckpointError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, 12)), CheckpointError);
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Synth, SameSeedSameSet) {
  const auto a = data::synth_faces(6, {96, 80}, 42);
  const auto b = data::synth_faces(6, {96, 80}, 42);
  const auto c = data::synth_faces(6, {96, 80}, 43);
  ASSERT_EQ(a.size(), 6u);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.items[i], b.items[i]);
  EXPECT_NE(a.items[0].image, c.items[0].image);
}

TEST(Synth, BoxesAreValidAndFacesDoNotOverlap) {
  const auto set = data::synth_faces(50, {128, 128}, 9);
  for (const auto& item : set.items) {
    ASSERT_GE(item.boxes.size(), 1u);
    ASSERT_LE(item.boxes.size(), 3u);
    for (size_t i = 0; i < item.boxes.size(); ++i) {
      const Box& b = item.boxes[i];
      EXPECT_LT(b.x_min, b.x_max);
      EXPECT_LT(b.y_min, b.y_max);
      EXPECT_GE(b.x_min, 0);
      EXPECT_GE(b.y_min, 0);
      EXPECT_LE(b.x_max, 128);
      EXPECT_LE(b.y_max, 128);
      for (size_t j = i + 1; j < item.boxes.size(); ++j) EXPECT_EQ(iou(b, item.boxes[j]), 0.0);
    }
  }
}

TEST(Synth, RejectsBadArguments) {
  EXPECT_THROW(data::synth_faces(0, {64, 64}, 1), std::invalid_argument);
  EXPECT_THROW(data::synth_faces(1, {8, 64}, 1), std::invalid_argument);
}

TEST(Folder, ExportThenLoadRoundTrips) {
  const fs::path dir = scratch_dir("folder");
  const auto set = data::synth_faces(4, {64, 80}, 5);
  data::export_folder(set, dir);
  const auto back = data::load_folder(dir, dir / "annotations.csv");
  ASSERT_EQ(back.size(), set.size());
  EXPECT_TRUE(back.warnings.empty());
  for (size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(back.items[i].image, set.items[i].image);
    ASSERT_EQ(back.items[i].boxes.size(), set.items[i].boxes.size());
    for (size_t j = 0; j < set.items[i].boxes.size(); ++j) {
      const Box& a = set.items[i].boxes[j];
      const Box& b = back.items[i].boxes[j];
      EXPECT_DOUBLE_EQ(a.x_min, b.x_min);
      EXPECT_DOUBLE_EQ(a.y_max, b.y_max);
    }
  }
  // Export is byte-stable.
  const fs::path again = scratch_dir("folder_again");
  data::export_folder(set, again);
  for (const auto& entry : fs::directory_iterator(dir)) {
    EXPECT_EQ(io::read_file(entry.path()), io::read_file(again / entry.path().filename()));
  }
}

TEST(Folder, SkipsUndecodableFilesWithAWarning) {
  const fs::path dir = scratch_dir("corrupt");
  data::export_folder(data::synth_faces(2, {64, 64}, 5), dir);
  io::write_file(dir / "zz_broken.png", "garbage bytes");
  const auto set = data::load_folder(dir, dir / "annotations.csv");
  EXPECT_EQ(set.size(), 2u);
  ASSERT_EQ(set.warnings.size(), 1u);
  EXPECT_NE(set.warnings[0].find("zz_broken.png"), std::string::npos);
}

TEST(Folder, RejectsBadAnnotations) {
  const fs::path dir = scratch_dir("bad_ann");
  data::export_folder(data::synth_faces(1, {64, 64}, 5), dir);
  EXPECT_THROW(data::load_folder(dir / "missing", dir / "annotations.csv"), data::DataError);
  EXPECT_THROW(data::load_folder(dir, dir / "nope.csv"), data::DataError);

  const std::string header = "filename,x_min,y_min,x_max,y_max\n";
  io::write_file(dir / "a.csv", header + "img_00000.png,1,2,3\n");
  EXPECT_THROW(data::load_folder(dir, dir / "a.csv"), data::DataError);
  io::write_file(dir / "a.csv", header + "img_00000.png,5,5,5,9\n");
  EXPECT_THROW(data::load_folder(dir, dir / "a.csv"), data::DataError);
  io::write_file(dir / "a.csv", header + "img_00000.png,1,1,70,9\n");
  EXPECT_THROW(data::load_folder(dir, dir / "a.csv"), data::DataError);
  io::write_file(dir / "a.csv", "name,boxes\n");
  EXPECT_THROW(data::load_folder(dir, dir / "a.csv"), data::DataError);
  io::write_file(dir / "a.csv", header);
  const auto set = data::load_folder(dir, dir / "a.csv");
  EXPECT_TRUE(set.items[0].boxes.empty());
}

TEST(Preprocess, MapsPixelsIntoUnitRange) {
  RawImage img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = c == 0 ? 0 : (c == 1 ? 255 : 128);
  const ImageTensor t = data::preprocess(img, {32, 32});
  EXPECT_EQ(t.height(), 32);
  EXPECT_DOUBLE_EQ(t.at(5, 5, 0), -1.0);
  EXPECT_DOUBLE_EQ(t.at(5, 5, 1), 1.0);
  EXPECT_NEAR(t.at(5, 5, 2), 128 / 127.5 - 1.0, 1e-12);
}

TEST(Preprocess, ScaleBoxesIsProportional) {
  const auto out = data::scale_boxes({{10, 20, 30, 40}}, {100, 200}, {50, 50});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].x_min, 2.5);
  EXPECT_DOUBLE_EQ(out[0].y_min, 10.0);
  EXPECT_DOUBLE_EQ(out[0].x_max, 7.5);
  EXPECT_DOUBLE_EQ(out[0].y_max, 20.0);
}

TEST(Jpeg, RoundTripStaysInRangeAndDegradesWithQuality) {
  const auto s = data::prepare(data::synth_faces(1, {64, 64}, 8), {64, 64})[0];
  double err10 = 0, err100 = 0;
  const ImageTensor q10 = data::jpeg_roundtrip(s.image, 10);
  const ImageTensor q100 = data::jpeg_roundtrip(s.image, 100);
  for (size_t i = 0; i < s.image.size(); ++i) {
    err10 += std::abs(q10.values()[i] - s.image.values()[i]);
    err100 += std::abs(q100.values()[i] - s.image.values()[i]);
  }
  EXPECT_LT(err100, err10);
  EXPECT_THROW(data::jpeg_roundtrip(s.image, 0), std::invalid_argument);
  EXPECT_THROW(data::jpeg_roundtrip(s.image, 101), std::invalid_argument);
}

TEST(Raw, QuantisationRoundTrip) {
  const RawImage img = noise_image(16, 16, 4);
  EXPECT_EQ(data::to_raw(data::from_raw(img)), img);
}

}  // namespace
}  // namespace advgen
