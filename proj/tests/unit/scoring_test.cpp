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

#include <cmath>
#include <numeric>
#include <random>

#include "chronolm/scoring.hpp"
#include "chronolm/text.hpp"
#include "test_support.hpp"

namespace chronolm {
namespace {

TEST(Perplexity, UniformModelEqualsVocabularySize) {
  const auto tok = testing::toy_tokenizer(40);
  const auto m = make_uniform_transformer(tok.vocab_size(), 16);
  const auto texts = testing::toy_texts(30, 5);
  const auto r = perplexity(m, tok, texts);
  EXPECT_NEAR(r.perplexity, static_cast<double>(tok.vocab_size()), 1e-9);
  EXPECT_EQ(r.n_tokens, token_stream(tok, texts).size() - 1);
}

TEST(Perplexity, BigramChainMatchesTableLookup) {
  const std::size_t v = 9;
  const Matrix table = testing::random_bigram_table(v, 11);
  const auto m = make_bigram_transformer(table, 8);
  std::mt19937_64 rng(3);
  std::vector<TokenId> stream(100);
  for (auto& t : stream) t = static_cast<TokenId>(rng() % v);
  double total = 0.0;
  for (std::size_t i = 1; i < stream.size(); ++i) total -= table(stream[i - 1], stream[i]);
  for (std::size_t stride : {1u, 3u, 4u, 7u}) {
    const auto r = stream_perplexity(m, stream, stride);
    EXPECT_EQ(r.n_tokens, 99u);
    EXPECT_NEAR(r.total_nll, total, 1e-9);
    EXPECT_NEAR(r.perplexity, std::exp(total / 99.0), 1e-9);
  }
}

TEST(WindowedNll, ScoresEveryTargetOnceWithFullHistoryWhenAvailable) {
  const auto m = Transformer(testing::toy_config(20, 8, 4));
  std::mt19937_64 rng(9);
  std::vector<TokenId> toks(30);
  for (auto& t : toks) t = static_cast<TokenId>(rng() % 20);
  const std::size_t stride = 3;
  const auto values = windowed_nll(m, toks, stride);
  ASSERT_EQ(values.size(), 29u);
  // Chunk ending at e is scored in the window [max(0, e - 8), e).
  for (std::size_t target = 1; target < toks.size(); ++target) {
    const std::size_t e = std::min<std::size_t>(((target - 1) / stride + 1) * stride + 1, toks.size());
    const std::size_t b = e > 8 ? e - 8 : 0;
    const std::vector<TokenId> window(toks.begin() + static_cast<std::ptrdiff_t>(b),
                                      toks.begin() + static_cast<std::ptrdiff_t>(target) + 1);
    const auto direct = nll(m, window);
    EXPECT_NEAR(values[target - 1], direct.back(), 1e-12) << target;
    EXPECT_GE(target - b, std::min<std::size_t>(target, 8 - stride));
  }
  EXPECT_THROW(windowed_nll(m, toks, 8), InvalidArgument);
}

TEST(WindowedNll, ShortSequencesMatchPlainNll) {
  const auto m = Transformer(testing::toy_config(20, 8, 4));
  const std::vector<TokenId> toks = {1, 2, 3, 4, 5};
  EXPECT_EQ(windowed_nll(m, toks), nll(m, toks));
  EXPECT_THROW(nll(m, std::vector<TokenId>{1}), InvalidArgument);
}

TEST(PerWordSurprisal, UniformModelGivesLogVocabularyForEveryWord) {
  const auto tok = testing::toy_tokenizer(40);
  const auto m = make_uniform_transformer(tok.vocab_size(), 64);
  const auto ws = per_word_surprisal(m, tok, "The cat sat on the mat.");
  ASSERT_EQ(ws.size(), 6u);
  EXPECT_EQ(ws[0].word, "the");
  for (const auto& w : ws) {
    EXPECT_GE(w.n_tokens, 1u);
    EXPECT_NEAR(w.value, std::log(static_cast<double>(tok.vocab_size())), 1e-9);
  }
}

// Tokens never straddle words, so a token belongs to the word its bytes
// overlap; the oracle scores each token by bigram table lookup.
void expect_overlap_alignment(const BpeTokenizer& tok, const std::string& sentence) {
  const Matrix table = testing::random_bigram_table(tok.vocab_size(), 17);
  const auto m = make_bigram_transformer(table, 128);
  const auto spans = tok.encode_with_offsets(sentence);
  const auto words = text::word_spans(sentence);
  std::vector<double> sum(words.size(), 0.0);
  std::vector<std::size_t> count(words.size(), 0);
  TokenId prev = tok.bos();
  for (const auto& s : spans) {
    const double cost = -table(prev, s.id);
    prev = s.id;
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (s.begin < words[w].end && words[w].begin < s.end) {
        sum[w] += cost;
        ++count[w];
      }
    }
  }
  const auto got = per_word_surprisal(m, tok, sentence);
  ASSERT_EQ(got.size(), words.size());
  for (std::size_t w = 0; w < words.size(); ++w) {
    ASSERT_GT(count[w], 0u);
    EXPECT_EQ(got[w].n_tokens, count[w]) << sentence << " word " << w;
    EXPECT_NEAR(got[w].value, sum[w] / static_cast<double>(count[w]), 1e-9);
  }
}

TEST(PerWordSurprisal, MatchesOverlapAlignmentForTwoTokenizers) {
  const auto small = testing::toy_tokenizer(30);
  const auto large = testing::toy_tokenizer(80);
  for (const char* s : {"The cat sat on the mat.", "a toad, a dog; tea at ten", "son ran to sea"}) {
    expect_overlap_alignment(small, s);
    expect_overlap_alignment(large, s);
  }
  EXPECT_LT(large.encode("the toad sat").size(), small.encode("the toad sat").size());
}

TEST(PerWordSurprisal, SentenceWithoutWordsIsEmpty) {
  const auto tok = testing::toy_tokenizer(30);
  const auto m = make_uniform_transformer(tok.vocab_size(), 16);
  EXPECT_TRUE(per_word_surprisal(m, tok, " ... ").empty());
}

TEST(Normalize, MinMaxScaling) {
  const std::vector<double> v = {2.0, 4.0, 3.0};
  EXPECT_EQ(min_max_normalize(v), (std::vector<double>{0.0, 1.0, 0.5}));
  const std::vector<double> flat = {3.0, 3.0, 3.0};
  EXPECT_EQ(min_max_normalize(flat), (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(min_max_normalize(std::vector<double>{7.0}), (std::vector<double>{0.0}));
  EXPECT_TRUE(min_max_normalize(std::vector<double>{}).empty());
}

TEST(Normalize, ProfileRowsScaledIndependently) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.0, 10.0);
  std::vector<std::vector<double>> rows(4, std::vector<double>(6));
  for (auto& r : rows) for (auto& x : r) x = d(rng);
  const auto p = normalize_profile("s", {"a", "b", "c", "d", "e", "f"}, {"1", "2", "3", "4"}, rows);
  ASSERT_EQ(p.normalized.size(), 4u);
  for (const auto& r : p.normalized) {
    EXPECT_EQ(*std::min_element(r.begin(), r.end()), 0.0);
    EXPECT_EQ(*std::max_element(r.begin(), r.end()), 1.0);
  }
  EXPECT_THROW(normalize_profile("s", {"a"}, {"1"}, {{1.0, 2.0}}), InvalidArgument);
  EXPECT_THROW(normalize_profile("s", {"a"}, {"1", "2"}, {{1.0}}), InvalidArgument);
}

}  // namespace
}  // namespace chronolm
