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

#ifndef ADVGEN_CHECKPOINT_HPP_
#define ADVGEN_CHECKPOINT_HPP_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "advgen/nn/params.hpp"

namespace advgen {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// In-memory form of a checkpoint file.
///
/// On disk a checkpoint is one blob:
///
///   "ADVGCKPT"            8-byte magic
///   header_length         u64, little endian
///   header                JSON text: kind, metadata, tensor manifest
///   payload               every tensor of every section, in manifest order,
///                         as little-endian IEEE-754 doubles
///
/// The header is written with sorted keys and shortest round-trip number
/// formatting, so parse -> serialize reproduces the input bytes.
struct Checkpoint {
  std::string kind;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<std::pair<std::string, nn::ParamSet>> sections;

  const nn::ParamSet& section(std::string_view name) const;
  bool has_section(std::string_view name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);

}  // namespace advgen

#endif  // ADVGEN_CHECKPOINT_HPP_
