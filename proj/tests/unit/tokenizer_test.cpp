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

#include <gtest/gtest.h>

#include <random>

#include "chronolm/synthetic.hpp"
#include "chronolm/tokenizer.hpp"
#include "test_support.hpp"

namespace chronolm {
namespace {

BpeTokenizer train_small(const std::vector<std::string>& texts, std::size_t vocab, bool full = false) {
  BpeTrainOptions o;
  o.vocab_size = vocab;
  o.full_byte_alphabet = full;
  return BpeTokenizer::train(texts, o);
}

TokenId id_of(const BpeTokenizer& t, const std::string& bytes) {
  for (std::size_t i = BpeTokenizer::kNumSpecials; i < t.vocab_size(); ++i) {
    if (t.token_bytes(static_cast<TokenId>(i)) == bytes) return static_cast<TokenId>(i);
  }
  return -1;
}

TEST(BpeTrain, HandSimulatedMerges) {
  // Alphabet {' ', a, b} plus specials leaves room for two merges.
  const auto t = train_small({"aaab aaab"}, 8);
  ASSERT_EQ(t.merges().size(), 2u);
  EXPECT_EQ(t.token_bytes(t.merges()[0].left), "a");
  EXPECT_EQ(t.token_bytes(t.merges()[0].right), "a");
  EXPECT_EQ(t.token_bytes(t.merges()[1].left), "aa");
  EXPECT_EQ(t.token_bytes(t.merges()[1].right), "a");
  EXPECT_EQ(t.encode("aaab"), (std::vector<TokenId>{id_of(t, "aaa"), id_of(t, "b")}));
  // After a space the boundary byte opens the word.
  const auto spaced = t.encode(" aaab");
  ASSERT_EQ(spaced.size(), 3u);
  EXPECT_EQ(t.token_bytes(spaced[0]), " ");
  EXPECT_TRUE(t.is_word_initiating(spaced[0]));
  EXPECT_FALSE(t.is_word_initiating(spaced[1]));
}

TEST(BpeTrain, SingleCharacterCorpusHasNoMerges) {
  const auto t = train_small({"a"}, 10);
  EXPECT_TRUE(t.merges().empty());
  EXPECT_EQ(t.vocab_size(), 4u);
}

TEST(BpeTrain, DeterministicRetraining) {
  const auto texts = testing::toy_texts(300, 9);
  EXPECT_EQ(train_small(texts, 80).serialize(), train_small(texts, 80).serialize());
  EXPECT_EQ(train_small(texts, 300, true).serialize(), train_small(texts, 300, true).serialize());
}

TEST(BpeTrain, RejectsTooSmallVocabulary) {
  BpeTrainOptions o;
  o.vocab_size = 200;
  EXPECT_THROW(BpeTokenizer::train(std::vector<std::string>{"abc"}, o), InvalidArgument);
  EXPECT_THROW(BpeTokenizer::train(std::vector<std::string>{}, o), InvalidArgument);
}

TEST(BpeTrain, MergesNeverCrossPieces) {
  const auto t = train_small(testing::toy_texts(300, 2), 120);
  for (std::size_t i = BpeTokenizer::kNumSpecials; i < t.vocab_size(); ++i) {
    const std::string& b = t.token_bytes(static_cast<TokenId>(i));
    // A space may only lead a token, never sit inside it.
    EXPECT_EQ(b.find(' ', 1), std::string::npos) << t.display(static_cast<TokenId>(i));
  }
}

TEST(Codec, EmptyInput) {
  const auto t = train_small({"abc"}, 8);
  EXPECT_TRUE(t.encode("").empty());
  EXPECT_EQ(t.decode(std::vector<TokenId>{}), "");
}

TEST(Codec, RoundTripOnRandomByteStrings) {
  const auto t = train_small(testing::toy_texts(300, 4), 400, true);
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    std::string s(rng() % 64, '\0');
    for (auto& c : s) c = static_cast<char>(rng() % 256);
    const auto ids = t.encode(s);
    EXPECT_EQ(t.decode(ids), s);
    EXPECT_LE(ids.size(), s.size());
  }
}

TEST(Codec, RoundTripOnFixtureSentences) {
  const auto texts = testing::toy_texts(100, 5);
  const auto t = train_small(texts, 60);
  for (const auto& s : texts) EXPECT_EQ(t.decode(t.encode(s)), s);
}

TEST(Codec, OffsetsCoverTheText) {
  const auto t = train_small(testing::toy_texts(100, 5), 60);
  const std::string s = "the cat sat, on  a mat.";
  std::size_t pos = 0;
  for (const auto& span : t.encode_with_offsets(s)) {
    EXPECT_EQ(span.begin, pos);
    if (span.id != t.unk()) {
      EXPECT_EQ(s.substr(span.begin, span.end - span.begin), t.token_bytes(span.id));
    }
    pos = span.end;
  }
  EXPECT_EQ(pos, s.size());
}

TEST(Codec, UnknownIdIsAnError) {
  const auto t = train_small({"abc"}, 8);
  EXPECT_THROW(t.decode(std::vector<TokenId>{static_cast<TokenId>(t.vocab_size())}), Error);
  EXPECT_THROW(t.decode(std::vector<TokenId>{-1}), Error);
}

TEST(Codec, SpecialsDecodeAsDocumented) {
  const auto t = train_small({"abc"}, 8);
  const std::vector<TokenId> ids = {t.bos(), t.encode("ab")[0], t.eos(), t.unk()};
  EXPECT_EQ(t.decode(ids), t.token_bytes(ids[1]) + "\xEF\xBF\xBD");
}

TEST(Codec, UnseenBytesMapToUnkWithoutFullAlphabet) {
  const auto t = train_small({"abc"}, 8);
  EXPECT_EQ(t.encode("z"), (std::vector<TokenId>{t.unk()}));
}

TEST(WordInitiation, BoundaryTokensAndContinuations) {
  std::vector<std::string> texts;
  for (int i = 0; i < 50; ++i) texts.push_back("the station and the nation, the ration");
  const auto t = train_small(texts, 60);
  const TokenId station = id_of(t, " station");
  ASSERT_GE(station, 0);
  EXPECT_TRUE(t.is_word_initiating(station));
  EXPECT_EQ(t.display(station), "\xE2\x96\x81station");
  const auto plural = t.encode(" stations");
  ASSERT_EQ(plural.size(), 2u);
  EXPECT_EQ(plural[0], station);
  EXPECT_EQ(t.token_bytes(plural[1]), "s");
  EXPECT_FALSE(t.is_word_initiating(plural[1]));
  EXPECT_EQ(t.kind(plural[1]), TokenKind::kContinuation);
  EXPECT_EQ(t.kind(id_of(t, ",")), TokenKind::kPunctuation);
  EXPECT_TRUE(t.is_word_initiating(id_of(t, ",")));
}

TEST(WordInitiation, ClassificationPartitionsTheVocabulary) {
  const auto t = train_small(testing::toy_texts(300, 8), 400, true);
  std::size_t special = 0, initiating = 0, continuation = 0;
  for (std::size_t i = 0; i < t.vocab_size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    const std::string& b = t.token_bytes(id);
    // Independent rule over the token's bytes.
    bool word_bytes = false;
    for (char c : b) word_bytes |= std::isalnum(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
    const bool expect_initiating = i >= BpeTokenizer::kNumSpecials && (!word_bytes || b.front() == ' ');
    if (i < BpeTokenizer::kNumSpecials) {
      ++special;
      EXPECT_FALSE(t.is_word_initiating(id));
    } else if (t.is_word_initiating(id)) {
      ++initiating;
      EXPECT_TRUE(expect_initiating) << t.display(id);
    } else {
      ++continuation;
      EXPECT_FALSE(expect_initiating) << t.display(id);
    }
  }
  EXPECT_EQ(special + initiating + continuation, t.vocab_size());
  EXPECT_GT(initiating, 0u);
  EXPECT_GT(continuation, 0u);
}

TEST(Serialization, ParseRestoresTheTokenizer) {
  const auto t = train_small(testing::toy_texts(200, 3), 300, true);
  const auto u = BpeTokenizer::parse(t.serialize());
  EXPECT_EQ(u.serialize(), t.serialize());
  EXPECT_EQ(u.content_hash(), t.content_hash());
  const std::string s = "the toad ran to tea, at noon!";
  EXPECT_EQ(u.encode(s), t.encode(s));
  testing::TempDir dir;
  t.save(dir / "t.bpe");
  EXPECT_EQ(BpeTokenizer::load(dir / "t.bpe").serialize(), t.serialize());
  EXPECT_THROW(BpeTokenizer::parse("not a tokenizer"), FormatError);
}

TEST(Serialization, EscapingRoundTrips) {
  const std::string raw = std::string("a\x01 b\\\n", 6) + "\xff";
  EXPECT_EQ(unescape_token_bytes(escape_token_bytes(raw)), raw);
}

TEST(Codec, RoundTripOnSyntheticCorpus) {
  SyntheticConfig c;
  c.tokens_per_slice = 20000;
  const auto corpus = generate_synthetic(c);
  std::vector<std::string> texts;
  for (const auto& d : corpus.documents) texts.push_back(d.text);
  BpeTrainOptions o;
  o.vocab_size = 600;
  const auto t = BpeTokenizer::train(texts, o);
  for (const auto& s : texts) ASSERT_EQ(t.decode(t.encode(s)), s);
}

}  // namespace
}  // namespace chronolm
