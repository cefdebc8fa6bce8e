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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chronolm/common.hpp"

namespace chronolm {

/// How a token relates to word boundaries.
enum class TokenKind : std::uint8_t {
  kSpecial,       // <unk>, <bos>, <eos>
  kWordStart,     // begins with the boundary marker and carries word bytes
  kPunctuation,   // only punctuation and/or whitespace bytes
  kContinuation,  // word bytes that extend the current word
};

struct BpeTrainOptions {
  std::size_t vocab_size = 16000;
  /// All 256 bytes in the base alphabet, so any input encodes without <unk>.
  /// When false only bytes seen in training are included (tiny vocabularies).
  bool full_byte_alphabet = true;
};

struct Merge {
  TokenId left = 0;
  TokenId right = 0;
};

struct TokenSpan {
  TokenId id = 0;
  std::size_t begin = 0;  // byte offsets into the encoded text
  std::size_t end = 0;
};

/// Byte-level BPE. Text is pre-split into pieces (a word, a digit run, a
/// punctuation run or a whitespace run); a single space directly before a
/// piece belongs to that piece and is the boundary marker, displayed as
/// U+2581 in the serialized vocabulary. Merges never cross pieces, and
/// decode(encode(t)) == t for every byte string when the byte alphabet is
/// full.
class BpeTokenizer {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr std::size_t kNumSpecials = 3;

  static BpeTokenizer train(std::span<const std::string> texts,
                            const BpeTrainOptions& options);

  std::vector<TokenId> encode(std::string_view text) const;
  std::vector<TokenSpan> encode_with_offsets(std::string_view text) const;
  /// Skips <bos>/<eos>; <unk> decodes to U+FFFD. Throws on ids out of range.
  std::string decode(std::span<const TokenId> ids) const;

  std::size_t vocab_size() const noexcept { return tokens_.size(); }
  TokenId bos() const noexcept { return kBos; }
  TokenId eos() const noexcept { return kEos; }
  TokenId unk() const noexcept { return kUnk; }

  const std::string& token_bytes(TokenId id) const;
  TokenKind kind(TokenId id) const;
  /// True for boundary-marked tokens and pure punctuation/whitespace tokens.
  bool is_word_initiating(TokenId id) const;
  /// Readable form of a token: space shown as U+2581, other unprintable
  /// bytes as \xNN.
  std::string display(TokenId id) const;

  const std::vector<Merge>& merges() const noexcept { return merges_; }
  bool full_byte_alphabet() const noexcept { return full_byte_alphabet_; }

  std::string serialize() const;
  static BpeTokenizer parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BpeTokenizer load(const std::filesystem::path& path);
  /// SHA-256 of serialize(); checkpoints record it.
  std::string content_hash() const;

  /// The pre-tokenizer's pieces as [begin, end) byte offsets.
  static std::vector<std::pair<std::size_t, std::size_t>> split_pieces(std::string_view text);

 private:
  BpeTokenizer() = default;
  void finalize();
  std::vector<TokenId> encode_piece(std::string_view piece) const;

  bool full_byte_alphabet_ = true;
  std::vector<std::string> tokens_;
  std::vector<TokenKind> kinds_;
  std::vector<Merge> merges_;
  std::vector<TokenId> byte_to_id_;  // 256 entries, kUnk when absent
  std::unordered_map<std::uint64_t, std::size_t> merge_rank_;
};

/// Escaping used by BpeTokenizer::display and the serialized format.
std::string escape_token_bytes(std::string_view bytes);
std::string unescape_token_bytes(std::string_view escaped);

}  // namespace chronolm
