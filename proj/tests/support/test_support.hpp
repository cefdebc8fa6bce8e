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

#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "chronolm/model.hpp"
#include "chronolm/tokenizer.hpp"

namespace chronolm::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "chronolm-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) std::abort();
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Texts over a small alphabet so a tiny vocabulary still forms words.
inline std::vector<std::string> toy_texts(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> words = {"the", "cat", "sat", "on",  "a",   "mat", "dog",
                                                 "ran", "to",  "tea", "at",  "son", "toad"};
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 3 + rng() % 6;
    for (std::size_t j = 0; j < len; ++j) {
      if (j > 0) s += ' ';
      s += words[rng() % words.size()];
    }
    s += '.';
    out.push_back(s);
  }
  return out;
}

/// Byte alphabet limited to the training texts.
inline BpeTokenizer toy_tokenizer(std::size_t vocab_size, std::uint64_t seed = 0) {
  BpeTrainOptions o;
  o.vocab_size = vocab_size;
  o.full_byte_alphabet = false;
  return BpeTokenizer::train(toy_texts(200, seed), o);
}

inline ModelConfig toy_config(std::size_t vocab_size, std::size_t ctx = 16, std::uint64_t seed = 0) {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.n_kv_heads = 1;
  c.d_model = 16;
  c.d_ff = 24;
  c.vocab_size = vocab_size;
  c.context_length = ctx;
  c.seed = seed;
  c.init_std = 0.3;
  return c;
}

/// Row-normalized random log-probability table.
inline Matrix random_bigram_table(std::size_t v, std::uint64_t seed, double spread = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, spread);
  Matrix m(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return log_softmax_rows(m);
}

}  // namespace chronolm::testing
