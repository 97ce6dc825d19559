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

#ifndef ADVGEN_IMAGE_IO_HPP_
#define ADVGEN_IMAGE_IO_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "advgen/image.hpp"

namespace advgen::io {

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ChromaSubsampling { k444, k420 };

std::string encode_png(const RawImage& img);
std::string encode_jpeg(const RawImage& img, int quality, ChromaSubsampling subsampling);

RawImage decode_png(std::string_view bytes);
RawImage decode_jpeg(std::string_view bytes);
/// Dispatches on the file signature. Throws CodecError for anything else.
RawImage decode_image(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

RawImage read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const RawImage& img);

}  // namespace advgen::io

#endif  // ADVGEN_IMAGE_IO_HPP_
