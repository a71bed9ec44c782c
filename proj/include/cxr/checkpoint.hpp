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

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cxr/error.hpp"
#include "cxr/model.hpp"
#include "cxr/optim.hpp"

namespace cxr {

class CheckpointError : public Error {
 public:
  enum class Kind { VersionUnknown, SizeMismatch, ChecksumFailure };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// One flat little-endian float32 array. `kind` is "param", "adam_m" or
/// "adam_v"; optimizer moments carry the name of their parameter.
struct CheckpointBlob {
  std::string name;
  std::string kind;
  Shape shape;
  std::vector<float> values;

  bool operator==(const CheckpointBlob&) const = default;
};

struct Checkpoint {
  ModelSpec spec;
  int epoch = 0;
  double val_acc = 0.0;
  std::uint64_t seed = 0;
  std::string rng_state;
  std::int64_t optimizer_step = 0;
  // Input normalization the weights were trained with.
  std::array<float, 3> norm_mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> norm_std{0.229f, 0.224f, 0.225f};
  std::vector<CheckpointBlob> blobs;
};

/// File layout, integers little-endian:
///
///   "CXRCKPT\0"  u32 version  u64 file_length
///   u64 header_length  header (JSON: spec, epoch, val_acc, seed, rng_state,
///                               optimizer step, normalization, blob directory)
///   u64 blob_count  { u64 n  f32[n] } * blob_count
///   u32 crc32 of every preceding byte
///
/// Load checks run in that order: magic and version (VersionUnknown), file
/// length (SizeMismatch), crc32 (ChecksumFailure), then the structure and
/// parameter total against the spec (SizeMismatch). Any byte flipped after
/// the 20-byte preamble therefore surfaces as ChecksumFailure.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

/// Atomic write.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters (and moments, if `state` is given) in model order.
template <typename T>
Checkpoint capture_checkpoint(const ModelSpec& spec, const Classifier<T>& model, const OptState<T>* state = nullptr);

/// Copies the parameter blobs into a model of the same spec; names and
/// shapes must match one to one (SizeMismatch otherwise).
template <typename T>
void restore_parameters(const Checkpoint& ckpt, const Classifier<T>& model);

/// Rebuilds the optimizer state in the model's parameter order. Parameters
/// without saved moments get empty buffers, as before their first update.
template <typename T>
OptState<T> restore_optimizer(const Checkpoint& ckpt, const Classifier<T>& model);

template <typename T>
std::unique_ptr<Classifier<T>> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace cxr
