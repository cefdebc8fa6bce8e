/*
 * Copyright 2026 The chronolm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "chronolm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "chronolm/hash.hpp"
#include "json.hpp"
#include "json_convert.hpp"

namespace chronolm {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'C', 'H', 'R', 'O', 'N', 'O', 'L', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put_le(std::string& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <class T>
T get_le(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return static_cast<T>(v);
}

void put_f64(std::string& out, double x) { put_le(out, std::bit_cast<std::uint64_t>(x)); }
double get_f64(const std::string& in, std::size_t pos) {
  return std::bit_cast<double>(get_le<std::uint64_t>(in, pos));
}

}  // namespace

std::string serialize_checkpoint(const Transformer& model, const CheckpointMetadata& metadata) {
  std::string data;
  json tensors = json::array();
  model.weights().for_each([&](const std::string& name, const Matrix& m) {
    const std::size_t offset = data.size();
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(data, m.data()[i]);
    tensors.push_back({{"name", name},
                       {"dtype", "f64"},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", offset},
                       {"nbytes", data.size() - offset}});
  });

  json meta = {{"tokenizer_hash", metadata.tokenizer_hash},
               {"role", metadata.role},
               {"epoch", metadata.epoch},
               {"step", metadata.step},
               {"extra", metadata.extra}};
  meta["val_loss"] = metadata.val_loss ? json(*metadata.val_loss) : json(nullptr);

  const json header = {{"format", "chronolm-checkpoint"},
                       {"config", model.config()},
                       {"metadata", meta},
                       {"tensors", tensors},
                       {"data_bytes", data.size()},
                       {"data_sha256", sha256_hex(data)}};
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += data;
  return out;
}

void save_checkpoint(const Transformer& model, const CheckpointMetadata& metadata,
                     const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model, metadata);
  // Write to a sibling temporary file, then rename over the target.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write on checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint parse_checkpoint(const std::string& bytes,
                                  const std::optional<std::string>& expected_tokenizer_hash) {
  constexpr std::size_t kPrefix = sizeof(kMagic) + 4 + 8;
  if (bytes.size() < kPrefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a chronolm checkpoint (bad magic or truncated prefix)");
  }
  const auto version = get_le<std::uint32_t>(bytes, sizeof(kMagic));
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(bytes, sizeof(kMagic) + 4);
  if (header_len > bytes.size() - kPrefix) throw FormatError("checkpoint truncated inside header");

  json header;
  try {
    header = json::parse(bytes.substr(kPrefix, header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }

  const std::size_t data_start = kPrefix + header_len;
  try {
    const auto data_bytes = header.at("data_bytes").get<std::size_t>();
    if (bytes.size() - data_start != data_bytes) {
      throw FormatError("checkpoint data is " + std::to_string(bytes.size() - data_start) +
                        " bytes, header declares " + std::to_string(data_bytes));
    }
    const std::string data = bytes.substr(data_start);
    if (sha256_hex(data) != header.at("data_sha256").get<std::string>()) {
      throw FormatError("checkpoint data digest mismatch");
    }

    const auto config = header.at("config").get<ModelConfig>();
    const auto diags = config.diagnostics();
    if (!diags.empty()) throw FormatError("checkpoint config invalid: " + diags.front());
    TransformerWeights weights = TransformerWeights::zeros(config);
    const auto& tensors = header.at("tensors");
    std::size_t ti = 0;
    weights.for_each([&](const std::string& name, Matrix& m) {
      if (ti >= tensors.size()) throw FormatError("checkpoint is missing tensor " + name);
      const auto& t = tensors[ti++];
      if (t.at("name").get<std::string>() != name) {
        throw FormatError("expected tensor " + name + ", found " + t.at("name").get<std::string>());
      }
      if (t.at("dtype").get<std::string>() != "f64") throw FormatError("tensor " + name + " is not f64");
      const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
      if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols()) {
        throw FormatError("tensor " + name + " shape does not match config");
      }
      const auto offset = t.at("offset").get<std::size_t>();
      const auto nbytes = t.at("nbytes").get<std::size_t>();
      if (nbytes != static_cast<std::size_t>(m.size()) * 8 || offset + nbytes > data.size()) {
        throw FormatError("tensor " + name + " extent is out of bounds");
      }
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = get_f64(data, offset + static_cast<std::size_t>(i) * 8);
      }
    });
    if (ti != tensors.size()) throw FormatError("checkpoint has unexpected extra tensors");

    const auto& meta = header.at("metadata");
    CheckpointMetadata metadata;
    metadata.tokenizer_hash = meta.value("tokenizer_hash", "");
    metadata.role = meta.value("role", "");
    metadata.epoch = meta.value("epoch", std::size_t{0});
    metadata.step = meta.value("step", std::size_t{0});
    if (meta.contains("val_loss") && !meta["val_loss"].is_null()) {
      metadata.val_loss = meta["val_loss"].get<double>();
    }
    if (meta.contains("extra")) metadata.extra = meta["extra"].get<std::map<std::string, std::string>>();

    LoadedCheckpoint loaded{Transformer(config, std::move(weights)), std::move(metadata), {}};
    if (expected_tokenizer_hash && *expected_tokenizer_hash != loaded.metadata.tokenizer_hash) {
      loaded.warnings.push_back("tokenizer hash mismatch: checkpoint was trained with " +
                                loaded.metadata.tokenizer_hash.substr(0, 12) + ", supplied tokenizer is " +
                                expected_tokenizer_hash->substr(0, 12));
    }
    return loaded;
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<std::string>& expected_tokenizer_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), expected_tokenizer_hash);
}

}  // namespace chronolm
