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

#include <map>
#include <set>

#include "chronolm/synthetic.hpp"
#include "chronolm/text.hpp"
#include "test_support.hpp"

namespace chronolm {
namespace {

SyntheticConfig small(std::uint64_t seed = 0) {
  SyntheticConfig c;
  c.seed = seed;
  c.tokens_per_slice = 20000;
  return c;
}

bool has_trigram(const std::vector<std::string>& w, const std::string& a, const std::string& b, const std::string& t) {
  for (std::size_t i = 0; i + 2 < w.size(); ++i) {
    if (w[i] == a && w[i + 1] == b && w[i + 2] == t) return true;
  }
  return false;
}

// Slice words and the word following each cue pair, per slice.
struct SliceView {
  std::vector<std::vector<std::string>> words;
};

SliceView view(const SyntheticCorpus& c) {
  SliceView v;
  v.words.resize(c.slice_years.size());
  for (const auto& d : c.documents) {
    for (std::size_t s = 0; s < c.slice_years.size(); ++s) {
      if (c.slice_years[s].contains(d.year)) {
        auto w = text::words(d.text);
        v.words[s].insert(v.words[s].end(), w.begin(), w.end());
      }
    }
  }
  return v;
}

TEST(Synthetic, SameSeedSameCorpus) {
  const auto a = generate_synthetic(small(4));
  const auto b = generate_synthetic(small(4));
  ASSERT_EQ(a.documents.size(), b.documents.size());
  for (std::size_t i = 0; i < a.documents.size(); ++i) EXPECT_EQ(a.documents[i].text, b.documents[i].text);
  EXPECT_EQ(a.future_targets, b.future_targets);
  const auto c = generate_synthetic(small(5));
  EXPECT_NE(a.documents.front().text, c.documents.front().text);
}

TEST(Synthetic, SlicesCoverTheirYearsAndBudget) {
  const auto cfg = small();
  const auto c = generate_synthetic(cfg);
  ASSERT_EQ(c.slice_years.size(), 3u);
  EXPECT_EQ(c.slice_years[0].first, 1800);
  EXPECT_EQ(c.slice_years[2].last, 1949);
  EXPECT_EQ(c.cutoff_year, 1849);
  std::vector<std::uint64_t> tokens(3, 0);
  std::set<int> years;
  for (const auto& d : c.documents) {
    ASSERT_GE(d.year, 1800);
    ASSERT_LE(d.year, 1949);
    tokens[static_cast<std::size_t>((d.year - 1800) / 50)] += text::whitespace_token_count(d.text);
    years.insert(d.year);
  }
  EXPECT_EQ(years.size(), 150u);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(tokens[s], c.slice_tokens[s]);
    EXPECT_GE(c.slice_tokens[s], cfg.tokens_per_slice);
  }
}

TEST(Synthetic, FutureCollocationsAreAbsentFromTheFirstSlice) {
  const auto c = generate_synthetic(small());
  const auto v = view(c);
  std::map<std::string, std::pair<std::string, std::string>> cues;
  for (const auto& s : c.senses) {
    if (s.sense_id.rfind("future-", 0) == 0 || s.sense_id.rfind("past-", 0) == 0) {
      const auto w = text::words(s.examples.at(0));
      ASSERT_GE(w.size(), 3u);
      cues[s.sense_id] = {w[w.size() - 3], w[w.size() - 2]};
      EXPECT_EQ(w.back(), s.word);
    }
  }
  ASSERT_EQ(cues.size(), 16u);
  for (std::size_t i = 0; i < c.future_targets.size(); ++i) {
    const auto& [a, b] = cues.at("future-" + std::to_string(i));
    const auto& t = c.future_targets[i];
    EXPECT_FALSE(has_trigram(v.words[0], a, b, t)) << t;
    EXPECT_TRUE(has_trigram(v.words[2], a, b, t)) << t;
    EXPECT_NE(std::find(v.words[0].begin(), v.words[0].end(), t), v.words[0].end()) << t;
    EXPECT_GT(c.future_years[i], c.cutoff_year);
  }
  for (std::size_t i = 0; i < c.past_targets.size(); ++i) {
    const auto& [a, b] = cues.at("past-" + std::to_string(i));
    for (std::size_t s = 0; s < 3; ++s) EXPECT_TRUE(has_trigram(v.words[s], a, b, c.past_targets[i]));
    EXPECT_LE(c.past_years[i], c.cutoff_year);
  }
}

TEST(Synthetic, RejectRecordsFailTheirNamedRule) {
  const auto c = generate_synthetic(small());
  const auto v = view(c);
  std::vector<WordCounts> vocabs;
  for (const auto& w : v.words) vocabs.push_back(word_counts_of_texts(w));
  const auto built = build_cloze_set(c.senses, vocabs);
  std::map<std::string, std::string> reasons;
  for (const auto& s : built.skipped) reasons[s.record.substr(0, s.record.find('#'))] = s.reason;
  EXPECT_EQ(reasons.at("reject-no-year"), "missing sense year");
  EXPECT_EQ(reasons.at("reject-frequency"), "frequency outside band");
  EXPECT_EQ(reasons.at("reject-not-final"), "target is not the final word");
  EXPECT_EQ(reasons.at("reject-tail"), "target starts before the tail");
  EXPECT_EQ(reasons.at("reject-vocabulary"), "word below min_count in a vocabulary");
  EXPECT_EQ(built.tasks.size(), 32u);
}

TEST(Synthetic, PairsDifferAndFilesRoundTrip) {
  const auto c = generate_synthetic(small());
  ASSERT_EQ(c.pairs.size(), 100u);
  for (const auto& p : c.pairs) EXPECT_NE(p.good, p.bad);
  testing::TempDir dir;
  write_synthetic(c, dir.path());
  EXPECT_EQ(read_minimal_pairs(dir / "pairs.jsonl").size(), 100u);
  EXPECT_EQ(read_sense_inventory(dir / "senses.jsonl").size(), c.senses.size());
  EXPECT_TRUE(std::filesystem::exists(dir / "corpus.jsonl"));
}

}  // namespace
}  // namespace chronolm
