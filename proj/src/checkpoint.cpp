// Copyright 2026 The spanlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spanlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "spanlm/error.hpp"

namespace spanlm {

namespace {

constexpr char kMagic[] = {'K', 'G', 'P', 'L', 'M', '\x01'};
constexpr int kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::ordered_json header;
  header["format_version"] = kFormatVersion;
  header["config"] = ckpt.config;
  header["vocab"] = ckpt.vocab;
  nlohmann::ordered_json state;
  state["epoch"] = ckpt.epoch;
  state["step"] = ckpt.step;
  state["optimizer_steps"] = ckpt.optimizer_steps;
  state["seed"] = ckpt.seed;
  state["best_loss"] = ckpt.has_best_loss ? nlohmann::ordered_json(ckpt.best_loss) : nlohmann::ordered_json(nullptr);
  header["state"] = std::move(state);

  auto table = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : ckpt.tensors) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    e["count"] = t.size();
    table.push_back(std::move(e));
    offset += t.size();
    checksum = fnv1a64(t.data(), t.size() * sizeof(float), checksum);
  }
  header["tensors"] = std::move(table);
  header["checksum"] = hex64(checksum);
  const std::string text = header.dump();

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    }
    if (!out) throw DataError("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string where = path.string();
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 5) != 0) {
    throw DataError(where + ": not a checkpoint (bad magic)");
  }
  if (magic[5] != kMagic[5]) {
    throw DataError(where + ": unsupported checkpoint version " + std::to_string(static_cast<int>(magic[5])));
  }
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (std::uint64_t{1} << 32)) {
    throw DataError(where + ": truncated checkpoint header");
  }
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw DataError(where + ": truncated checkpoint header");

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::ordered_json::parse(text);
    if (header.at("format_version").get<int>() != kFormatVersion) {
      throw DataError(where + ": unsupported checkpoint format_version");
    }
    ckpt.config = header.at("config");
    ckpt.vocab = header.at("vocab");
    const auto& state = header.at("state");
    ckpt.epoch = state.at("epoch").get<std::int64_t>();
    ckpt.step = state.at("step").get<std::int64_t>();
    ckpt.optimizer_steps = state.at("optimizer_steps").get<std::int64_t>();
    ckpt.seed = state.at("seed").get<std::uint64_t>();
    if (!state.at("best_loss").is_null()) {
      ckpt.best_loss = state.at("best_loss").get<double>();
      ckpt.has_best_loss = true;
    }
    std::uint64_t checksum = 0xcbf29ce484222325ULL;
    std::uint64_t expected_offset = 0;
    for (const auto& e : header.at("tensors")) {
      const auto shape = e.at("shape").get<Shape>();
      const auto count = e.at("count").get<std::uint64_t>();
      if (e.at("offset").get<std::uint64_t>() != expected_offset || count != shape_size(shape)) {
        throw DataError(where + ": inconsistent tensor table");
      }
      Tensor<float> t(shape);
      if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
        throw DataError(where + ": truncated checkpoint payload");
      }
      checksum = fnv1a64(t.data(), count * sizeof(float), checksum);
      expected_offset += count;
      ckpt.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(where + ": trailing bytes after payload");
    if (hex64(checksum) != header.at("checksum").get<std::string>()) {
      throw DataError(where + ": checksum mismatch (corrupted payload)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": malformed checkpoint header: " + e.what());
  }
  return ckpt;
}

}  // namespace spanlm
