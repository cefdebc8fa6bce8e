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

#include "chronolm/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "chronolm/hash.hpp"
#include "chronolm/text.hpp"

namespace chronolm {
namespace {

constexpr std::string_view kMarkerGlyph = "\xE2\x96\x81";  // U+2581
constexpr std::string_view kReplacement = "\xEF\xBF\xBD";  // U+FFFD
constexpr std::string_view kHeader = "chronolm-bpe v1";

enum class ByteClass { kSpace, kWhitespace, kLetter, kDigit, kPunct };

ByteClass classify(unsigned char c) {
  if (c == ' ') return ByteClass::kSpace;
  if (c == '\t' || c == '\n' || c == '\v' || c == '\f' || c == '\r') return ByteClass::kWhitespace;
  if (text::is_word_byte(c)) return ByteClass::kLetter;
  if (c >= '0' && c <= '9') return ByteClass::kDigit;
  return ByteClass::kPunct;
}

bool is_ws(ByteClass c) { return c == ByteClass::kSpace || c == ByteClass::kWhitespace; }

std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

const char* special_name(TokenId id) {
  switch (id) {
    case BpeTokenizer::kUnk: return "<unk>";
    case BpeTokenizer::kBos: return "<bos>";
    default: return "<eos>";
  }
}

}  // namespace

std::string escape_token_bytes(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (char ch : bytes) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == ' ') {
      out += kMarkerGlyph;
    } else if (c == '\\') {
      out += "\\\\";
    } else if (c > 0x20 && c < 0x7F) {
      out.push_back(ch);
    } else {
      out += "\\x";
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

std::string unescape_token_bytes(std::string_view s) {
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s.substr(i, kMarkerGlyph.size()) == kMarkerGlyph) {
      out.push_back(' ');
      i += kMarkerGlyph.size();
    } else if (s[i] == '\\') {
      if (i + 1 < s.size() && s[i + 1] == '\\') {
        out.push_back('\\');
        i += 2;
      } else if (i + 3 < s.size() && s[i + 1] == 'x') {
        out.push_back(static_cast<char>(std::stoi(std::string(s.substr(i + 2, 2)), nullptr, 16)));
        i += 4;
      } else {
        throw FormatError("bad escape in token '" + std::string(s) + "'");
      }
    } else {
      out.push_back(s[i]);
      ++i;
    }
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> BpeTokenizer::split_pieces(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> pieces;
  const std::size_t n = text.size();
  auto cls = [&](std::size_t i) { return classify(static_cast<unsigned char>(text[i])); };
  std::size_t i = 0;
  while (i < n) {
    std::size_t start = i;
    if (is_ws(cls(i))) {
      std::size_t j = i;
      while (j < n && is_ws(cls(j))) ++j;
      if (j < n && text[j - 1] == ' ') {
        // The final space marks the following piece.
        if (j - 1 > i) pieces.emplace_back(i, j - 1);
        start = j - 1;
        i = j;
      } else {
        pieces.emplace_back(i, j);
        i = j;
        continue;
      }
    }
    const ByteClass c = cls(i);
    std::size_t j = i + 1;
    while (j < n) {
      const ByteClass cj = cls(j);
      if (cj == c) {
        ++j;
      } else if (c == ByteClass::kLetter && text[j] == '\'' && j + 1 < n &&
                 cls(j + 1) == ByteClass::kLetter) {
        j += 2;
      } else {
        break;
      }
    }
    pieces.emplace_back(start, j);
    i = j;
  }
  return pieces;
}

void BpeTokenizer::finalize() {
  kinds_.assign(tokens_.size(), TokenKind::kContinuation);
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    if (id < kNumSpecials) {
      kinds_[id] = TokenKind::kSpecial;
      continue;
    }
    const std::string& b = tokens_[id];
    bool only_punct = true;
    for (char ch : b) {
      const ByteClass c = classify(static_cast<unsigned char>(ch));
      if (c == ByteClass::kLetter || c == ByteClass::kDigit) only_punct = false;
    }
    if (only_punct) {
      kinds_[id] = TokenKind::kPunctuation;
    } else if (!b.empty() && b.front() == ' ') {
      kinds_[id] = TokenKind::kWordStart;
    }
  }
  merge_rank_.clear();
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    merge_rank_.emplace(pair_key(merges_[r].left, merges_[r].right), r);
  }
}

BpeTokenizer BpeTokenizer::train(std::span<const std::string> texts,
                                 const BpeTrainOptions& options) {
  if (texts.empty()) throw InvalidArgument("train_bpe: no training texts");

  std::map<std::string, std::uint64_t> piece_counts;
  std::vector<bool> seen(256, false);
  for (const auto& t : texts) {
    for (auto [b, e] : split_pieces(t)) {
      ++piece_counts[t.substr(b, e - b)];
    }
    for (char ch : t) seen[static_cast<unsigned char>(ch)] = true;
  }

  BpeTokenizer tok;
  tok.full_byte_alphabet_ = options.full_byte_alphabet;
  tok.tokens_ = {"", "", ""};
  tok.byte_to_id_.assign(256, kUnk);
  for (int b = 0; b < 256; ++b) {
    if (options.full_byte_alphabet || seen[static_cast<std::size_t>(b)]) {
      tok.byte_to_id_[static_cast<std::size_t>(b)] = static_cast<TokenId>(tok.tokens_.size());
      tok.tokens_.emplace_back(1, static_cast<char>(b));
    }
  }
  if (options.vocab_size <= tok.tokens_.size()) {
    throw InvalidArgument("vocab_size " + std::to_string(options.vocab_size) +
                          " must exceed base alphabet plus specials (" +
                          std::to_string(tok.tokens_.size()) + ")");
  }

  struct Word {
    std::vector<TokenId> symbols;
    std::int64_t count;
  };
  std::vector<Word> words;
  words.reserve(piece_counts.size());
  for (const auto& [piece, count] : piece_counts) {
    Word w{{}, static_cast<std::int64_t>(count)};
    for (char ch : piece) w.symbols.push_back(tok.byte_to_id_[static_cast<unsigned char>(ch)]);
    words.push_back(std::move(w));
  }

  std::unordered_map<std::uint64_t, std::int64_t> pair_counts;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words;
  auto add_pairs = [&](std::uint32_t wi, std::int64_t sign) {
    const auto& s = words[wi].symbols;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const auto key = pair_key(s[i], s[i + 1]);
      pair_counts[key] += sign * words[wi].count;
      if (sign > 0) pair_words[key].push_back(wi);
    }
  };
  for (std::uint32_t wi = 0; wi < words.size(); ++wi) add_pairs(wi, +1);

  std::vector<std::uint32_t> visited(words.size(), 0);
  std::uint32_t stamp = 0;
  while (tok.tokens_.size() < options.vocab_size) {
    // Highest count wins; ties go to the lexicographically smaller merged
    // string, then to the shorter left part.
    std::uint64_t best_key = 0;
    std::int64_t best_count = 0;
    for (const auto& [key, count] : pair_counts) {
      if (count <= 0) continue;
      bool better = count > best_count;
      if (!better && count == best_count) {
        const auto l = static_cast<TokenId>(key >> 32), r = static_cast<TokenId>(key & 0xFFFFFFFF);
        const auto bl = static_cast<TokenId>(best_key >> 32), br = static_cast<TokenId>(best_key & 0xFFFFFFFF);
        const std::string cand = tok.tokens_[l] + tok.tokens_[r];
        const std::string best = tok.tokens_[bl] + tok.tokens_[br];
        better = cand < best || (cand == best && tok.tokens_[l].size() < tok.tokens_[bl].size());
      }
      if (better) {
        best_key = key;
        best_count = count;
      }
    }
    if (best_count <= 0) break;

    const auto left = static_cast<TokenId>(best_key >> 32);
    const auto right = static_cast<TokenId>(best_key & 0xFFFFFFFF);
    const auto merged = static_cast<TokenId>(tok.tokens_.size());
    tok.tokens_.push_back(tok.tokens_[left] + tok.tokens_[right]);
    tok.merges_.push_back({left, right});

    ++stamp;
    const std::vector<std::uint32_t> affected = pair_words[best_key];
    for (std::uint32_t wi : affected) {
      if (visited[wi] == stamp) continue;
      visited[wi] = stamp;
      auto& s = words[wi].symbols;
      bool present = false;
      for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] == left && s[i + 1] == right) {
          present = true;
          break;
        }
      }
      if (!present) continue;
      add_pairs(wi, -1);
      std::vector<TokenId> out;
      out.reserve(s.size());
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == left && s[i + 1] == right) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(s[i]);
          ++i;
        }
      }
      s = std::move(out);
      add_pairs(wi, +1);
    }
    pair_counts.erase(best_key);
    pair_words.erase(best_key);
  }
  tok.finalize();
  return tok;
}

std::vector<TokenId> BpeTokenizer::encode_piece(std::string_view piece) const {
  std::vector<TokenId> s;
  s.reserve(piece.size());
  for (char ch : piece) s.push_back(byte_to_id_[static_cast<unsigned char>(ch)]);
  while (s.size() > 1) {
    std::size_t best_rank = merges_.size();
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      auto it = merge_rank_.find(pair_key(s[i], s[i + 1]));
      if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == merges_.size()) break;
    const Merge m = merges_[best_rank];
    const auto merged = static_cast<TokenId>(tokens_.size() - merges_.size() + best_rank);
    std::size_t w = 0;
    for (std::size_t i = 0; i < s.size();) {
      if (i + 1 < s.size() && s[i] == m.left && s[i + 1] == m.right) {
        s[w++] = merged;
        i += 2;
      } else {
        s[w++] = s[i++];
      }
    }
    s.resize(w);
  }
  return s;
}

std::vector<TokenSpan> BpeTokenizer::encode_with_offsets(std::string_view text) const {
  std::vector<TokenSpan> out;
  for (auto [b, e] : split_pieces(text)) {
    std::size_t pos = b;
    for (TokenId id : encode_piece(text.substr(b, e - b))) {
      const std::size_t len = id == kUnk ? 1 : tokens_[static_cast<std::size_t>(id)].size();
      out.push_back({id, pos, pos + len});
      pos += len;
    }
  }
  return out;
}

std::vector<TokenId> BpeTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (auto [b, e] : split_pieces(text)) {
    auto piece = encode_piece(text.substr(b, e - b));
    ids.insert(ids.end(), piece.begin(), piece.end());
  }
  return ids;
}

std::string BpeTokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw InvalidArgument("decode: unknown token id " + std::to_string(id));
    }
    if (id == kUnk) {
      out += kReplacement;
    } else if (id >= static_cast<TokenId>(kNumSpecials)) {
      out += tokens_[static_cast<std::size_t>(id)];
    }
  }
  return out;
}

const std::string& BpeTokenizer::token_bytes(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvalidArgument("unknown token id " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenKind BpeTokenizer::kind(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= kinds_.size()) {
    throw InvalidArgument("unknown token id " + std::to_string(id));
  }
  return kinds_[static_cast<std::size_t>(id)];
}

bool BpeTokenizer::is_word_initiating(TokenId id) const {
  const TokenKind k = kind(id);
  return k == TokenKind::kWordStart || k == TokenKind::kPunctuation;
}

std::string BpeTokenizer::display(TokenId id) const {
  if (id >= 0 && static_cast<std::size_t>(id) < kNumSpecials) return special_name(id);
  return escape_token_bytes(token_bytes(id));
}

std::string BpeTokenizer::serialize() const {
  std::ostringstream out;
  out << kHeader << '\n';
  out << "alphabet " << (full_byte_alphabet_ ? "full" : "observed") << '\n';
  out << "vocab_size " << tokens_.size() << '\n';
  out << "specials unk=" << kUnk << " bos=" << kBos << " eos=" << kEos << '\n';
  out << "tokens\n";
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    out << id << ' ' << display(static_cast<TokenId>(id)) << '\n';
  }
  out << "merges " << merges_.size() << '\n';
  for (const auto& m : merges_) {
    out << m.left << ' ' << m.right << "  " << display(m.left) << ' ' << display(m.right) << '\n';
  }
  return out.str();
}

BpeTokenizer BpeTokenizer::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw FormatError(std::string("tokenizer file truncated at ") + what);
    return line;
  };
  if (next("header") != kHeader) throw FormatError("not a chronolm tokenizer file");

  BpeTokenizer tok;
  std::string key, value;
  std::istringstream(next("alphabet")) >> key >> value;
  if (key != "alphabet" || (value != "full" && value != "observed")) throw FormatError("bad alphabet line");
  tok.full_byte_alphabet_ = value == "full";

  std::size_t vocab = 0;
  std::istringstream(next("vocab_size")) >> key >> vocab;
  if (key != "vocab_size" || vocab < kNumSpecials) throw FormatError("bad vocab_size line");
  next("specials");
  if (next("tokens") != "tokens") throw FormatError("missing tokens section");

  tok.byte_to_id_.assign(256, kUnk);
  tok.tokens_.resize(vocab);
  for (std::size_t id = 0; id < vocab; ++id) {
    next("tokens");
    const auto space = line.find(' ');
    if (space == std::string::npos || std::stoul(line.substr(0, space)) != id) {
      throw FormatError("bad token line '" + line + "'");
    }
    const std::string shown = line.substr(space + 1);
    if (id >= kNumSpecials) {
      tok.tokens_[id] = unescape_token_bytes(shown);
    }
  }

  std::size_t n_merges = 0;
  std::istringstream(next("merges")) >> key >> n_merges;
  if (key != "merges") throw FormatError("missing merges section");
  const std::size_t base = vocab - n_merges;
  if (n_merges > vocab - kNumSpecials) throw FormatError("more merges than tokens");
  // Base tokens are single bytes; anything past them comes from a merge.
  std::fill(tok.byte_to_id_.begin(), tok.byte_to_id_.end(), kUnk);
  for (std::size_t id = kNumSpecials; id < base; ++id) {
    if (tok.tokens_[id].size() != 1) throw FormatError("base token is not a single byte");
    tok.byte_to_id_[static_cast<unsigned char>(tok.tokens_[id][0])] = static_cast<TokenId>(id);
  }
  for (std::size_t r = 0; r < n_merges; ++r) {
    next("merges");
    long left = -1, right = -1;
    std::istringstream(line) >> left >> right;
    const std::size_t id = base + r;
    if (left < 0 || right < 0 || static_cast<std::size_t>(left) >= id ||
        static_cast<std::size_t>(right) >= id) {
      throw FormatError("bad merge line '" + line + "'");
    }
    if (tok.tokens_[static_cast<std::size_t>(left)] + tok.tokens_[static_cast<std::size_t>(right)] !=
        tok.tokens_[id]) {
      throw FormatError("merge " + std::to_string(r) + " does not produce token " + std::to_string(id));
    }
    tok.merges_.push_back({static_cast<TokenId>(left), static_cast<TokenId>(right)});
  }
  tok.finalize();
  return tok;
}

void BpeTokenizer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write tokenizer " + path.string());
  out << serialize();
}

BpeTokenizer BpeTokenizer::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read tokenizer " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string BpeTokenizer::content_hash() const { return sha256_hex(serialize()); }

}  // namespace chronolm
