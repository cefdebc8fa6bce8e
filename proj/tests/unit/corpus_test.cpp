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

#include <algorithm>
#include <map>
#include <optional>
#include <random>
#include <regex>

#include "chronolm/corpus.hpp"
#include "chronolm/text.hpp"
#include "test_support.hpp"

namespace chronolm {
namespace {

using testing::TempDir;
using testing::write_file;

Document doc(std::string id, int year, std::string text) { return Document{std::move(id), {}, {}, year, std::move(text)}; }

std::string words_of_length(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w");
  return s;
}

TEST(Ingest, SingleValidRecord) {
  TempDir dir;
  write_file(dir / "a.jsonl", R"({"id":"a","year":1800,"text":"some words here"})" "\n");
  const std::vector<std::filesystem::path> paths = {dir / "a.jsonl"};
  const auto r = ingest(paths, RecordSchema{}, {1750, 1940});
  EXPECT_EQ(r.store.size(), 1u);
  EXPECT_TRUE(r.rejections.empty());
  EXPECT_EQ(r.store.at("a").year, 1800);
}

TEST(Ingest, YearOutsideRangeIsReported) {
  TempDir dir;
  write_file(dir / "a.jsonl", R"({"id":"old","year":1700,"text":"x"})" "\n");
  const std::vector<std::filesystem::path> paths = {dir / "a.jsonl"};
  const auto r = ingest(paths, RecordSchema{}, {1750, 1940});
  EXPECT_TRUE(r.store.empty());
  ASSERT_EQ(r.rejections.size(), 1u);
  EXPECT_EQ(r.rejections[0].id, "old");
  EXPECT_EQ(r.rejections[0].line, 1u);
}

TEST(Ingest, ThreeFilesTenRecordsTwoMalformed) {
  TempDir dir;
  write_file(dir / "a.jsonl",
             R"({"id":"a1","year":1800,"text":"one"})" "\n"
             R"({"id":"a2","year":1801,"text":"two"})" "\n"
             R"({"id":"a3","year":1802,"text":"three"})" "\n");
  write_file(dir / "b.jsonl",
             R"({"id":"b1","year":1810,"text":"four"})" "\n"
             R"({"id":"b2","text":"no year"})" "\n"
             R"({"id":"b3","year":"1811","text":"five"})" "\n"
             "\n");
  write_file(dir / "c.jsonl",
             R"({"id":"c1","year":1820,"text":"six"})" "\n"
             R"({"id":"c2","year":1821,"text":"seven"})" "\n"
             R"({"id":"c3","year":1822,"text":"eight")" "\n"
             R"({"id":"c4","year":1823,"text":"nine"})" "\n");
  const std::vector<std::filesystem::path> paths = {dir / "a.jsonl", dir / "b.jsonl", dir / "c.jsonl"};
  const auto r = ingest(paths, RecordSchema{}, {1750, 1940});
  EXPECT_EQ(r.store.size(), 8u);
  ASSERT_EQ(r.rejections.size(), 2u);
  EXPECT_EQ(r.rejections[0].id, "");
  EXPECT_NE(r.rejections[0].reason.find("missing year"), std::string::npos);
  EXPECT_EQ(r.rejections[1].line, 3u);
}

TEST(Ingest, EmptyTextAndDuplicateIdsAreRejected) {
  TempDir dir;
  write_file(dir / "a.jsonl",
             R"({"id":"a","year":1800,"text":""})" "\n"
             R"({"id":"b","year":1800,"text":"x"})" "\n"
             R"({"id":"b","year":1801,"text":"y"})" "\n");
  const std::vector<std::filesystem::path> paths = {dir / "a.jsonl"};
  const auto r = ingest(paths, RecordSchema{}, {1750, 1940});
  EXPECT_EQ(r.store.size(), 1u);
  ASSERT_EQ(r.rejections.size(), 2u);
  EXPECT_EQ(r.rejections[1].reason, "duplicate id");
}

TEST(Ingest, CustomSchemaAndUnreadableFile) {
  TempDir dir;
  write_file(dir / "a.jsonl", R"({"key":"k","date":1900,"body":"hello"})" "\n");
  RecordSchema schema;
  schema.id = "key";
  schema.year = "date";
  schema.text = "body";
  const std::vector<std::filesystem::path> paths = {dir / "a.jsonl"};
  EXPECT_EQ(ingest(paths, schema, {1750, 1940}).store.at("k").text, "hello");
  const std::vector<std::filesystem::path> missing = {dir / "none.jsonl"};
  EXPECT_THROW(ingest(missing, schema, {1750, 1940}), Error);
}

CorpusStore store_from_histogram(const std::vector<std::size_t>& tokens_per_year, int first_year) {
  CorpusStore s;
  for (std::size_t i = 0; i < tokens_per_year.size(); ++i) {
    if (tokens_per_year[i] == 0) continue;
    s.add(doc("d" + std::to_string(i), first_year + static_cast<int>(i), words_of_length(tokens_per_year[i])));
  }
  return s;
}

TEST(PlanSlices, OneSliceSpansTheRange) {
  const auto store = store_from_histogram({5, 5, 5, 5}, 1800);
  SlicePlanRequest req;
  req.n_slices = 1;
  req.budgets = {10, 2, 2};
  req.range = {1800, 1803};
  const auto plan = plan_slices(store, req);
  ASSERT_EQ(plan.slices.size(), 1u);
  EXPECT_EQ(plan.slices[0].start_year, 1800);
  EXPECT_EQ(plan.slices[0].end_year, 1803);
  EXPECT_EQ(plan.slices[0].label, "1800-1803");
  EXPECT_TRUE(plan.feasible);
  EXPECT_EQ(plan.assignment.size(), 4u);
}

// Every boundary pair (b1, b2) is tried; the oracle keeps the feasible pair
// with the shortest first slice, then the shortest second slice.
std::optional<std::vector<int>> brute_force_three_slices(const std::vector<std::size_t>& hist, int first,
                                                         std::uint64_t need) {
  const int n = static_cast<int>(hist.size());
  auto sum = [&](int a, int b) {
    std::uint64_t s = 0;
    for (int y = a; y < b; ++y) s += hist[static_cast<std::size_t>(y)];
    return s;
  };
  std::optional<std::pair<int, int>> best;
  for (int b1 = 1; b1 <= n - 2; ++b1) {
    for (int b2 = b1 + 1; b2 <= n - 1; ++b2) {
      if (sum(0, b1) < need || sum(b1, b2) < need || sum(b2, n) < need) continue;
      if (!best || std::make_pair(b1, b2 - b1) < std::make_pair(best->first, best->second - best->first)) {
        best = {b1, b2};
      }
    }
  }
  if (!best) return std::nullopt;
  return std::vector<int>{first + best->first, first + best->second};
}

TEST(PlanSlices, GreedyMatchesBoundaryEnumeration) {
  std::mt19937_64 rng(11);
  std::size_t feasible_cases = 0;
  std::size_t infeasible_cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t years = 6 + rng() % 20;
    std::vector<std::size_t> hist(years);
    for (auto& h : hist) h = rng() % 4 == 0 ? 0 : 1 + rng() % 30;
    if (hist[0] == 0) hist[0] = 1;
    const auto store = store_from_histogram(hist, 1700);
    const std::uint64_t need = 20 + rng() % 60;
    SlicePlanRequest req;
    req.n_slices = 3;
    req.budgets = {need - 10, 5, 5};
    req.range = {1700, 1700 + static_cast<int>(years) - 1};
    const auto plan = plan_slices(store, req);
    const auto oracle = brute_force_three_slices(hist, 1700, need);
    if (oracle) {
      ++feasible_cases;
      EXPECT_TRUE(plan.feasible) << "trial " << trial;
      EXPECT_EQ(slice_boundaries(plan), *oracle) << "trial " << trial;
    } else {
      ++infeasible_cases;
      EXPECT_FALSE(plan.feasible) << "trial " << trial;
      EXPECT_FALSE(plan.shortfalls.empty());
    }
  }
  EXPECT_GT(feasible_cases, 30u);
  EXPECT_GT(infeasible_cases, 30u);
}

TEST(PlanSlices, SlicesPartitionRangeAndAssignmentsFit) {
  std::vector<std::size_t> hist = {10, 3, 8, 0, 12, 7, 9, 4, 11, 6};
  const auto store = store_from_histogram(hist, 1850);
  SlicePlanRequest req;
  req.n_slices = 4;
  req.budgets = {10, 2, 2};
  req.range = {1850, 1859};
  const auto plan = plan_slices(store, req);
  EXPECT_EQ(plan.slices.front().start_year, 1850);
  EXPECT_EQ(plan.slices.back().end_year, 1859);
  for (std::size_t i = 1; i < plan.slices.size(); ++i) {
    EXPECT_EQ(plan.slices[i].start_year, plan.slices[i - 1].end_year + 1);
    EXPECT_LE(plan.slices[i].start_year, plan.slices[i].end_year);
  }
  for (const auto& [id, label] : plan.assignment) {
    EXPECT_TRUE(plan.find(label)->contains(store.at(id).year));
  }
  // Adjacent labels share their boundary year.
  EXPECT_EQ(plan.slices[0].label.substr(5), plan.slices[1].label.substr(0, 4));
}

TEST(PlanSlices, InfeasibleBudgetsListShortfallsPerSlice) {
  const auto store = store_from_histogram({5, 5, 5, 5, 5, 5}, 1800);
  SlicePlanRequest req;
  req.n_slices = 2;
  req.budgets = {20, 2, 2};
  req.range = {1800, 1805};
  const auto plan = plan_slices(store, req);
  EXPECT_FALSE(plan.feasible);
  ASSERT_EQ(plan.shortfalls.size(), 1u);
  EXPECT_EQ(plan.shortfalls[0].label, plan.slices[1].label);
  EXPECT_EQ(plan.shortfalls[0].available, 5u);
  EXPECT_EQ(plan.shortfalls[0].required, 24u);
}

TEST(PlanSlices, LargerBudgetsNeverMoveBoundariesEarlier) {
  std::mt19937_64 rng(5);
  std::vector<std::size_t> hist(30);
  for (auto& h : hist) h = 1 + rng() % 20;
  const auto store = store_from_histogram(hist, 1800);
  std::vector<int> previous;
  for (std::uint64_t train = 5; train < 150; train += 7) {
    SlicePlanRequest req;
    req.n_slices = 4;
    req.budgets = {train, 3, 3};
    req.range = {1800, 1829};
    const auto b = slice_boundaries(plan_slices(store, req));
    if (!previous.empty()) {
      for (std::size_t i = 0; i < b.size(); ++i) EXPECT_GE(b[i], previous[i]);
    }
    previous = b;
  }
}

TEST(PlanSlices, RejectsDegenerateRequests) {
  const auto store = store_from_histogram({5}, 1800);
  SlicePlanRequest req;
  req.range = {1800, 1800};
  req.n_slices = 0;
  EXPECT_THROW(plan_slices(store, req), InvalidArgument);
  req.n_slices = 1;
  EXPECT_THROW(plan_slices(CorpusStore{}, req), InvalidArgument);
}

SlicePlan ten_document_plan(CorpusStore& store, std::uint64_t test, std::uint64_t val) {
  for (int i = 0; i < 10; ++i) store.add(doc("doc" + std::to_string(i), 1800 + i, words_of_length(100)));
  SlicePlanRequest req;
  req.n_slices = 1;
  req.budgets = {100, val, test};
  req.range = {1800, 1809};
  return plan_slices(store, req);
}

TEST(SplitSlice, ExactDivision) {
  CorpusStore store;
  const auto plan = ten_document_plan(store, 200, 100);
  const auto r = split_slice(store, plan, plan.slices[0].label, 7);
  ASSERT_TRUE(r.feasible());
  EXPECT_EQ(r.split->test.size(), 2u);
  EXPECT_EQ(r.split->val.size(), 1u);
  EXPECT_EQ(r.split->train.size(), 7u);
  EXPECT_EQ(r.split->test_tokens, 200u);
  std::vector<std::string> all = r.split->train;
  all.insert(all.end(), r.split->val.begin(), r.split->val.end());
  all.insert(all.end(), r.split->test.begin(), r.split->test.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  EXPECT_EQ(all.size(), 10u);
}

TEST(SplitSlice, DeterministicBySeed) {
  CorpusStore store;
  const auto plan = ten_document_plan(store, 200, 100);
  const auto a = split_slice(store, plan, plan.slices[0].label, 3);
  const auto b = split_slice(store, plan, plan.slices[0].label, 3);
  EXPECT_EQ(to_json(*a.split), to_json(*b.split));
  bool differs = false;
  for (std::uint64_t seed = 4; seed < 20 && !differs; ++seed) {
    differs = split_slice(store, plan, plan.slices[0].label, seed).split->test != a.split->test;
  }
  EXPECT_TRUE(differs);
}

TEST(SplitSlice, ShortfallNamesTheSlice) {
  CorpusStore store;
  const auto plan = ten_document_plan(store, 900, 200);
  const auto r = split_slice(store, plan, plan.slices[0].label, 0);
  ASSERT_FALSE(r.feasible());
  EXPECT_EQ(r.shortfall->label, plan.slices[0].label);
  EXPECT_EQ(r.shortfall->available, 1000u);
  EXPECT_EQ(r.shortfall->required, 1100u);
  EXPECT_THROW(split_slice(store, plan, "nope", 0), InvalidArgument);
}

TEST(WordCounts, HandCount) {
  CorpusStore store;
  store.add(doc("a", 1800, "The cat saw the cat."));
  const std::vector<std::string> ids = {"a"};
  const auto c = word_counts(store, ids, "s/train");
  EXPECT_EQ(c.counts, (std::map<std::string, std::uint64_t>{{"the", 2}, {"cat", 2}, {"saw", 1}}));
  EXPECT_EQ(c.total(), 5u);
  EXPECT_EQ(c.source, "s/train");
  EXPECT_EQ(c.word_rule, std::string(text::kWordRule));
  EXPECT_TRUE(word_counts_of_texts({}).counts.empty());
}

// Independent tally: a regular expression over ASCII prose.
std::map<std::string, std::uint64_t> regex_tally(const std::string& text) {
  std::map<std::string, std::uint64_t> out;
  const std::regex word("[A-Za-z]+(?:'[A-Za-z]+)*");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), word); it != std::sregex_iterator(); ++it) {
    std::string w = it->str();
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    ++out[w];
  }
  return out;
}

const char* kChapter =
    "It was late in the autumn when the carrier's cart came down the lane. Nobody in the village "
    "had expected it; the roads were deep in mud, and the river had twice risen over the ford. "
    "'Tis a poor season for travel,' said old Mrs. Hale, who kept the shop by the green. "
    "The carter didn't answer her. He unloaded three crates, a trunk bound in brass, and a bundle "
    "of letters tied with string -- forty-two of them, by the clerk's count. Then he turned his "
    "horse about and went back the way he had come, whistling a tune none of them knew.";

TEST(WordCounts, ChapterMatchesIndependentTally) {
  CorpusStore store;
  store.add(doc("ch", 1850, kChapter));
  const std::vector<std::string> ids = {"ch"};
  EXPECT_EQ(word_counts(store, ids).counts, regex_tally(kChapter));
}

TEST(WordCounts, AdditiveOverDisjointUnions) {
  const std::vector<std::string> a = testing::toy_texts(30, 1);
  const std::vector<std::string> b = testing::toy_texts(40, 2);
  std::vector<std::string> both = a;
  both.insert(both.end(), b.begin(), b.end());
  WordCounts sum = word_counts_of_texts(a);
  sum += word_counts_of_texts(b);
  EXPECT_EQ(sum.counts, word_counts_of_texts(both).counts);
}

bool oracle_keep(const FilterItem& item, const std::vector<WordCounts>& vocabs, std::uint64_t min_count) {
  for (const auto& [w, n] : regex_tally(item.text)) {
    (void)n;
    for (const auto& v : vocabs) {
      const auto it = v.counts.find(w);
      if ((it == v.counts.end() ? 0 : it->second) < min_count) return false;
    }
  }
  return true;
}

TEST(FilterInVocab, MatchesPerWordLookup) {
  const std::vector<std::string> corpus_a = {"the cat sat on the mat", "a dog ran to the cat", "tea at noon"};
  const std::vector<std::string> corpus_b = {"the dog sat", "the cat ran to a mat", "the dog ran", "tea tea"};
  const std::vector<WordCounts> vocabs = {word_counts_of_texts(corpus_a), word_counts_of_texts(corpus_b)};
  std::mt19937_64 rng(3);
  const std::vector<std::string> pool = {"the", "cat", "sat", "dog", "ran", "mat", "tea", "a", "to", "noon", "on"};
  std::vector<FilterItem> items;
  for (int i = 0; i < 20; ++i) {
    std::string t;
    for (std::size_t j = 0; j < 1 + rng() % 3; ++j) t += (j ? " " : "") + pool[rng() % pool.size()];
    items.push_back({i % 2 ? "odd" : "even", t});
  }
  for (std::uint64_t min_count : {1u, 2u, 3u}) {
    const auto r = filter_in_vocab(items, vocabs, min_count);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (oracle_keep(items[i], vocabs, min_count)) expected.push_back(i);
    }
    EXPECT_EQ(r.retained, expected) << "min_count " << min_count;
    EXPECT_EQ(r.by_group.at("odd").total + r.by_group.at("even").total, 20u);
    EXPECT_EQ(r.by_group.at("odd").retained + r.by_group.at("even").retained, expected.size());
  }
}

TEST(FilterInVocab, MinCountBoundary) {
  const std::vector<WordCounts> vocabs = {word_counts_of_texts(std::vector<std::string>{"once twice twice"})};
  const std::vector<FilterItem> items = {{"g", "once"}, {"g", "twice"}};
  const auto r = filter_in_vocab(items, vocabs, 2);
  EXPECT_EQ(r.retained, (std::vector<std::size_t>{1}));
  EXPECT_EQ(r.by_group.at("g").retained, 1u);
  EXPECT_EQ(r.by_group.at("g").total, 2u);
}

TEST(FilterInVocab, ZeroMinCountIsIdentityAndEmptyVocabulariesThrow) {
  const std::vector<WordCounts> vocabs = {word_counts_of_texts(std::vector<std::string>{"x"})};
  const std::vector<FilterItem> items = {{"g", "unknown words"}, {"g", "x"}, {"h", ""}};
  EXPECT_EQ(filter_in_vocab(items, vocabs, 0).retained, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(filter_in_vocab(items, std::span<const WordCounts>{}, 2), InvalidArgument);
}

TEST(FilterInVocab, WordsAppearingFiveTimesEverywhereAreRetained) {
  const std::string five = "alpha beta alpha beta alpha beta alpha beta alpha beta";
  const std::vector<WordCounts> vocabs = {word_counts_of_texts(std::vector<std::string>{five}),
                                          word_counts_of_texts(std::vector<std::string>{five + " gamma"})};
  const std::vector<FilterItem> items = {{"g", "Alpha, beta!"}};
  EXPECT_EQ(filter_in_vocab(items, vocabs).retained.size(), 1u);
}

TEST(Persistence, ArtifactsRoundTrip) {
  std::vector<std::size_t> hist = {10, 3, 8, 0, 12, 7};
  const auto store = store_from_histogram(hist, 1850);
  SlicePlanRequest req;
  req.n_slices = 2;
  req.budgets = {10, 2, 2};
  req.range = {1850, 1855};
  const auto plan = plan_slices(store, req);
  EXPECT_EQ(to_json(slice_plan_from_json(to_json(plan))), to_json(plan));
  const auto split = split_slice(store, plan, plan.slices[0].label, 1);
  EXPECT_EQ(to_json(split_set_from_json(to_json(*split.split))), to_json(*split.split));
  const auto counts = word_counts(store, split.split->train, "x");
  EXPECT_EQ(word_counts_from_json(to_json(counts)).counts, counts.counts);
}

}  // namespace
}  // namespace chronolm
