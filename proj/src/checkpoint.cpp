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

#include "advgen/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace advgen {
namespace {

constexpr std::string_view kMagic = "ADVGCKPT";
constexpr int kFormatVersion = 1;

template <typename T>
void append_le(std::string& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.append(buf, 8);
}

template <typename T>
T read_le(const char* p) {
  std::uint64_t bits;
  std::memcpy(&bits, p, 8);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

const nn::ParamSet& Checkpoint::section(std::string_view name) const {
  for (const auto& [n, s] : sections) {
    if (n == name) return s;
  }
  throw CheckpointError("checkpoint has no section '" + std::string(name) + "'");
}

bool Checkpoint::has_section(std::string_view name) const {
  for (const auto& [n, s] : sections) {
    if (n == name) return true;
  }
  return false;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["format"] = "advgen-checkpoint";
  header["format_version"] = kFormatVersion;
  header["kind"] = ckpt.kind;
  header["metadata"] = ckpt.metadata;
  nlohmann::json sections = nlohmann::json::array();
  for (const auto& [name, params] : ckpt.sections) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& e : params.entries()) {
      tensors.push_back({{"name", e.name}, {"shape", e.value.shape()}});
    }
    sections.push_back({{"name", name}, {"tensors", tensors}});
  }
  header["sections"] = sections;
  const std::string text = header.dump();

  std::string out(kMagic);
  append_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [name, params] : ckpt.sections) {
    for (const auto& e : params.entries()) {
      for (double v : e.value.values()) append_le<double>(out, v);
    }
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError("not an advgen checkpoint (bad magic)");
  }
  const auto header_len = read_le<std::uint64_t>(bytes.data() + kMagic.size());
  const size_t header_start = kMagic.size() + 8;
  if (header_len > bytes.size() - header_start) {
    throw CheckpointError("truncated checkpoint header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_start, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (header.value("format_version", 0) != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint version");
  }

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.metadata = header.at("metadata");
  size_t offset = header_start + header_len;
  for (const auto& sec : header.at("sections")) {
    nn::ParamSet params;
    for (const auto& t : sec.at("tensors")) {
      auto shape = t.at("shape").get<std::vector<int>>();
      const size_t count = nn::element_count(shape);
      if (count > (bytes.size() - offset) / 8) {
        throw CheckpointError("truncated checkpoint payload");
      }
      std::vector<double> values(count);
      for (size_t i = 0; i < count; ++i) values[i] = read_le<double>(bytes.data() + offset + 8 * i);
      offset += 8 * count;
      params.add(t.at("name").get<std::string>(), nn::Tensor(std::move(shape), std::move(values)));
    }
    ckpt.sections.emplace_back(sec.at("name").get<std::string>(), std::move(params));
  }
  if (offset != bytes.size()) throw CheckpointError("trailing bytes after checkpoint payload");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("short write to " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

}  // namespace advgen
