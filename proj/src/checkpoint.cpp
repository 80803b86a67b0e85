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

#include "phrasecl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "phrasecl/errors.hpp"

namespace phrasecl {

static_assert(std::endian::native == std::endian::little,
              "archive format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'H', 'R', 'C', 'L', 'A', 'R', '1'};

}  // namespace

const Matrix& Archive::tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw FormatError("archive: missing tensor " + name);
  if (it->second.rows() != rows || it->second.cols() != cols) {
    throw FormatError("archive: tensor " + name + " has the wrong shape");
  }
  return it->second;
}

void save_archive(const std::filesystem::path& path, const nlohmann::json& meta,
                  std::span<const ad::Tensor* const> tensors) {
  nlohmann::json header = meta.is_null() ? nlohmann::json::object() : meta;
  nlohmann::json index = nlohmann::json::array();
  for (const ad::Tensor* t : tensors) {
    index.push_back({{"name", t->name}, {"rows", t->value.rows()}, {"cols", t->value.cols()}});
  }
  header["tensors"] = std::move(index);
  const std::string text = header.dump();

  std::string blob(kMagic, sizeof(kMagic));
  const auto len = static_cast<std::uint64_t>(text.size());
  blob.append(reinterpret_cast<const char*>(&len), sizeof(len));
  blob += text;
  for (const ad::Tensor* t : tensors) {
    // Row-major on disk regardless of Eigen's storage order.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = t->value;
    blob.append(reinterpret_cast<const char*>(rm.data()),
                static_cast<std::size_t>(rm.size()) * sizeof(double));
  }
  write_file(path, blob);
}

Archive load_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("checkpoint not found: " + path.string());
  }
  const std::string blob = read_file(path);
  if (blob.size() < sizeof(kMagic) + 8 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("archive: bad magic in " + path.string());
  }
  std::uint64_t len = 0;
  std::memcpy(&len, blob.data() + sizeof(kMagic), sizeof(len));
  std::size_t offset = sizeof(kMagic) + sizeof(len);
  if (len > blob.size() - offset) throw FormatError("archive: truncated header");
  Archive archive;
  try {
    archive.meta = nlohmann::json::parse(blob.substr(offset, len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("archive: ") + e.what());
  }
  offset += len;
  for (const auto& entry : archive.meta.at("tensors")) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (bytes > blob.size() - offset) throw FormatError("archive: truncated tensor data");
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    std::memcpy(rm.data(), blob.data() + offset, bytes);
    offset += bytes;
    archive.tensors.emplace(entry.at("name").get<std::string>(), Matrix(rm));
  }
  if (offset != blob.size()) throw FormatError("archive: trailing bytes");
  archive.meta.erase("tensors");
  return archive;
}

void save_encoder_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                             const Vocabulary& vocab, const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_null() ? nlohmann::json::object() : extra;
  meta["encoder"] = params.config.to_json();
  meta["vocabulary"] = vocab.tokens();
  const auto tensors = params.tensors();
  save_archive(path, meta, tensors);
}

EncoderCheckpoint encoder_from_archive(const Archive& archive) {
  if (!archive.meta.contains("encoder") || !archive.meta.contains("vocabulary")) {
    throw FormatError("checkpoint: missing encoder config or vocabulary");
  }
  EncoderCheckpoint ckpt;
  ckpt.meta = archive.meta;
  const auto config = EncoderConfig::from_json(archive.meta.at("encoder"));
  ckpt.vocab = Vocabulary::from_tokens(archive.meta.at("vocabulary").get<std::vector<std::string>>());
  if (ckpt.vocab.size() != config.vocab_size) {
    throw FormatError("checkpoint: vocabulary size disagrees with encoder config");
  }
  // Shapes come from a fresh initialization; values are overwritten.
  ckpt.params = EncoderParams::initialize(config, 0);
  for (ad::Tensor* t : ckpt.params.tensors()) {
    t->value = archive.tensor(t->name, t->value.rows(), t->value.cols());
  }
  return ckpt;
}

EncoderCheckpoint load_encoder_checkpoint(const std::filesystem::path& path) {
  return encoder_from_archive(load_archive(path));
}

}  // namespace phrasecl
