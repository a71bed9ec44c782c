// Copyright (c) 2026 The cxrformer Authors. All Rights Reserved.
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

#include "cxr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>

#include <zlib.h>

#include "cxr/io.hpp"

namespace cxr {

namespace {

using nlohmann::json;
using Kind = CheckpointError::Kind;

constexpr char kMagic[8] = {'C', 'X', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::size_t kPreamble = 8 + 4 + 8;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
static_assert(sizeof(float) == 4);

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(U));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::span<const std::uint8_t> take(std::uint64_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_)
      throw CheckpointError(Kind::SizeMismatch, std::string("checkpoint: ") + what + " runs past the end of the file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto n = std::min(kChunk, bytes.size() - off);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

json header_json(const Checkpoint& c) {
  json blobs = json::array();
  for (const auto& b : c.blobs) blobs.push_back({{"name", b.name}, {"kind", b.kind}, {"shape", b.shape}});
  return {{"model", c.spec.to_json()},
          {"epoch", c.epoch},
          {"val_acc", c.val_acc},
          {"seed", c.seed},
          {"rng_state", c.rng_state},
          {"optimizer", {{"step", c.optimizer_step}}},
          {"normalize", {{"mean", c.norm_mean}, {"std", c.norm_std}}},
          {"blobs", blobs}};
}

[[noreturn]] void size_mismatch(const std::string& what) {
  throw CheckpointError(Kind::SizeMismatch, "checkpoint: " + what);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  for (const auto& b : ckpt.blobs)
    if (static_cast<Index>(b.values.size()) != numel(b.shape))
      throw ShapeError("checkpoint: blob " + b.name + " holds " + std::to_string(b.values.size()) +
                       " values for shape of " + std::to_string(numel(b.shape)));
  const std::string header = header_json(ckpt).dump();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::size_t length_at = out.size();
  put<std::uint64_t>(out, 0);
  put<std::uint64_t>(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  put<std::uint64_t>(out, ckpt.blobs.size());
  for (const auto& b : ckpt.blobs) {
    put<std::uint64_t>(out, b.values.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(b.values.data());
    out.insert(out.end(), p, p + b.values.size() * sizeof(float));
  }
  const std::uint64_t total = out.size() + 4;
  std::memcpy(out.data() + length_at, &total, sizeof total);
  put<std::uint32_t>(out, crc32_of(out));
  return out;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (!std::equal(bytes.begin(), bytes.begin() + std::min<std::size_t>(bytes.size(), 8), kMagic))
    throw CheckpointError(Kind::VersionUnknown, "checkpoint: not a cxrformer checkpoint (bad magic)");
  if (bytes.size() < kPreamble + 4) size_mismatch("file is " + std::to_string(bytes.size()) + " bytes, too short");
  Reader r(bytes);
  r.take(8, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(Kind::VersionUnknown, "checkpoint: unsupported format version " + std::to_string(version) +
                                                    " (this build reads " + std::to_string(kCheckpointVersion) + ")");
  const auto length = r.get<std::uint64_t>("file length");
  if (length != bytes.size())
    size_mismatch("file is " + std::to_string(bytes.size()) + " bytes, header records " + std::to_string(length));

  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc32_of(bytes.first(bytes.size() - 4)) != stored_crc)
    throw CheckpointError(Kind::ChecksumFailure, "checkpoint: crc32 mismatch; file is corrupt");

  Checkpoint c;
  json header;
  try {
    const auto text = r.take(r.get<std::uint64_t>("header length"), "header");
    header = json::parse(text.begin(), text.end());
    c.spec = ModelSpec::from_json(header.at("model"));
    c.epoch = header.at("epoch").get<int>();
    c.val_acc = header.at("val_acc").get<double>();
    c.seed = header.at("seed").get<std::uint64_t>();
    c.rng_state = header.at("rng_state").get<std::string>();
    c.optimizer_step = header.at("optimizer").at("step").get<std::int64_t>();
    c.norm_mean = header.at("normalize").at("mean").get<std::array<float, 3>>();
    c.norm_std = header.at("normalize").at("std").get<std::array<float, 3>>();
    for (const auto& b : header.at("blobs")) {
      c.blobs.push_back({b.at("name").get<std::string>(), b.at("kind").get<std::string>(),
                         b.at("shape").get<Shape>(), {}});
    }
  } catch (const json::exception& e) {
    size_mismatch(std::string("malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    size_mismatch(std::string("header model spec rejected: ") + e.what());
  }

  const auto count = r.get<std::uint64_t>("blob count");
  if (count != c.blobs.size())
    size_mismatch(std::to_string(count) + " blobs stored, " + std::to_string(c.blobs.size()) + " listed in header");
  for (auto& b : c.blobs) {
    const auto n = r.get<std::uint64_t>("blob length");
    for (Index d : b.shape)
      if (d < 0) size_mismatch("blob " + b.name + " has a negative dimension");
    if (static_cast<Index>(n) != numel(b.shape))
      size_mismatch("blob " + b.name + " holds " + std::to_string(n) + " values, its shape needs " +
                    std::to_string(numel(b.shape)));
    if (n > bytes.size()) size_mismatch("blob " + b.name + " is longer than the file");
    const auto raw = r.take(n * sizeof(float), "blob data");
    b.values.resize(n);
    std::memcpy(b.values.data(), raw.data(), raw.size());
  }
  if (r.pos() != bytes.size() - 4) size_mismatch("trailing bytes after the last blob");

  Index params = 0;
  for (const auto& b : c.blobs) {
    if (b.kind == "param") params += numel(b.shape);
    else if (b.kind != "adam_m" && b.kind != "adam_v") size_mismatch("blob " + b.name + " has unknown kind " + b.kind);
  }
  if (params != c.spec.parameter_count())
    size_mismatch("parameter blobs hold " + std::to_string(params) + " values, the model spec needs " +
                  std::to_string(c.spec.parameter_count()));
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(e.kind(), path.string() + ": " + e.what());
  }
}

template <typename T>
Checkpoint capture_checkpoint(const ModelSpec& spec, const Classifier<T>& model, const OptState<T>* state) {
  Checkpoint c;
  c.spec = spec;
  const auto params = model.parameters();
  for (const auto& p : params) {
    const auto d = p.tensor.data();
    c.blobs.push_back({p.name, "param", p.tensor.shape(), std::vector<float>(d.begin(), d.end())});
  }
  if (state) {
    c.optimizer_step = state->step;
    for (std::size_t i = 0; i < params.size() && i < state->m.size(); ++i) {
      if (state->m[i].empty()) continue;
      const auto& shape = params[i].tensor.shape();
      c.blobs.push_back({params[i].name, "adam_m", shape, std::vector<float>(state->m[i].begin(), state->m[i].end())});
      c.blobs.push_back({params[i].name, "adam_v", shape, std::vector<float>(state->v[i].begin(), state->v[i].end())});
    }
  }
  return c;
}

template <typename T>
void restore_parameters(const Checkpoint& ckpt, const Classifier<T>& model) {
  const auto params = model.parameters();
  std::size_t next = 0;
  for (const auto& b : ckpt.blobs) {
    if (b.kind != "param") continue;
    if (next >= params.size()) size_mismatch("more parameter blobs than the model has parameters");
    Tensor<T> p = params[next++].tensor;
    if (b.name != params[next - 1].name || b.shape != p.shape())
      size_mismatch("blob " + b.name + " does not match model parameter " + params[next - 1].name);
    auto dst = p.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = static_cast<T>(b.values[k]);
  }
  if (next != params.size()) size_mismatch("model has parameters missing from the checkpoint");
}

template <typename T>
OptState<T> restore_optimizer(const Checkpoint& ckpt, const Classifier<T>& model) {
  const auto params = model.parameters();
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < params.size(); ++i) slot[params[i].name] = i;
  OptState<T> s;
  s.step = ckpt.optimizer_step;
  s.m.resize(params.size());
  s.v.resize(params.size());
  for (const auto& b : ckpt.blobs) {
    if (b.kind == "param") continue;
    const auto it = slot.find(b.name);
    if (it == slot.end() || params[it->second].tensor.shape() != b.shape)
      size_mismatch("optimizer moment " + b.name + " does not match any model parameter");
    auto& dst = (b.kind == "adam_m" ? s.m : s.v)[it->second];
    dst.assign(b.values.begin(), b.values.end());
  }
  for (std::size_t i = 0; i < params.size(); ++i)
    if (s.m[i].size() != s.v[i].size()) size_mismatch("optimizer moments for " + params[i].name + " are incomplete");
  return s;
}

template <typename T>
std::unique_ptr<Classifier<T>> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = make_classifier<T>(ckpt.spec, ckpt.seed);
  restore_parameters(ckpt, *model);
  return model;
}

template Checkpoint capture_checkpoint<float>(const ModelSpec&, const Classifier<float>&, const OptState<float>*);
template Checkpoint capture_checkpoint<double>(const ModelSpec&, const Classifier<double>&, const OptState<double>*);
template void restore_parameters<float>(const Checkpoint&, const Classifier<float>&);
template void restore_parameters<double>(const Checkpoint&, const Classifier<double>&);
template OptState<float> restore_optimizer<float>(const Checkpoint&, const Classifier<float>&);
template OptState<double> restore_optimizer<double>(const Checkpoint&, const Classifier<double>&);
template std::unique_ptr<Classifier<float>> model_from_checkpoint<float>(const Checkpoint&);
template std::unique_ptr<Classifier<double>> model_from_checkpoint<double>(const Checkpoint&);

}  // namespace cxr
