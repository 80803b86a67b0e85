// Copyright 2026 The Phrasecl Authors.
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

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "phrasecl/autograd.hpp"
#include "phrasecl/corpus.hpp"
#include "phrasecl/encoder.hpp"

namespace phrasecl {

// Single-file archive: an 8-byte magic, a little-endian u64 length, a JSON
// header (caller metadata plus the tensor index), then each tensor's doubles
// in row-major order. Save/load round-trips bitwise.
struct Archive {
  nlohmann::json meta;
  std::map<std::string, Matrix> tensors;

  // Throws FormatError when the tensor is absent or has the wrong shape.
  const Matrix& tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) const;
};

void save_archive(const std::filesystem::path& path, const nlohmann::json& meta,
                  std::span<const ad::Tensor* const> tensors);
// Throws ValidationError when the file is missing, FormatError when corrupt.
Archive load_archive(const std::filesystem::path& path);

// Encoder checkpoint: config and vocabulary in the header, tensors by name.
void save_encoder_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                             const Vocabulary& vocab, const nlohmann::json& extra = {});

struct EncoderCheckpoint {
  EncoderParams params;
  Vocabulary vocab;
  nlohmann::json meta;
};

EncoderCheckpoint encoder_from_archive(const Archive& archive);
EncoderCheckpoint load_encoder_checkpoint(const std::filesystem::path& path);

}  // namespace phrasecl
