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
#include <cmath>
#include <random>
#include <regex>

#include "chronolm/evaluation.hpp"
#include "chronolm/scoring.hpp"
#include "chronolm/text.hpp"
#include "test_support.hpp"

namespace chronolm {
namespace {

SenseRecord sense(std::string word, std::string id, std::optional<int> year, std::vector<std::string> examples,
                  std::optional<double> freq) {
  SenseRecord r;
  r.word = std::move(word);
  r.sense_id = std::move(id);
  r.year = year;
  r.examples = std::move(examples);
  r.frequency_per_million = freq;
  return r;
}

TEST(ClozeBuild, TelephoneExample) {
  const std::vector<SenseRecord> recs = {
      sense("dead", "dead-3", 1882, {"After the storm had passed over the valley in the night, the phone was dead."},
            50.0)};
  const auto r = build_cloze_set(recs, {});
  ASSERT_EQ(r.tasks.size(), 1u);
  const auto& t = r.tasks[0];
  EXPECT_EQ(t.target, "dead");
  EXPECT_EQ(t.sense_year, 1882);
  EXPECT_EQ(t.id, "dead-3#0");
  EXPECT_TRUE(t.prefix.ends_with("the phone was "));
  EXPECT_EQ(t.prefix + "dead.", t.sentence);
  EXPECT_FALSE(r.vocabulary_filter_applied);
}

TEST(ClozeBuild, TargetAtStartOfHundredCharacterSentenceIsRejected) {
  const std::string s = "dead" + std::string(96, '!');
  ASSERT_EQ(s.size(), 100u);
  const std::vector<SenseRecord> recs = {sense("dead", "d", 1882, {s}, 50.0)};
  const auto r = build_cloze_set(recs, {});
  EXPECT_TRUE(r.tasks.empty());
  ASSERT_EQ(r.skipped.size(), 1u);
  EXPECT_EQ(r.skipped[0].reason, "target starts before the tail");
}

TEST(ClozeBuild, TailBoundaryCountsCharactersNotBytes) {
  // 36 two-byte characters then " dead": 41 characters, target at 37 >= 36.9.
  std::string prefix;
  for (int i = 0; i < 36; ++i) prefix += "\xc3\xa9";
  const std::vector<SenseRecord> recs = {sense("dead", "d", 1882, {prefix + " dead"}, 50.0)};
  EXPECT_EQ(build_cloze_set(recs, {}).tasks.size(), 1u);
  EXPECT_EQ(char_offset(prefix, prefix.size()), 36u);
}

TEST(ClozeBuild, MissingFieldsAreReported) {
  const std::vector<SenseRecord> recs = {
      sense("a", "no-year", std::nullopt, {"x a"}, 5.0), sense("b", "no-example", 1900, {}, 5.0),
      sense("c", "no-freq", 1900, {"x c"}, std::nullopt), sense("d", "rare", 1900, {"x d"}, 0.5)};
  const auto r = build_cloze_set(recs, {});
  ASSERT_EQ(r.skipped.size(), 4u);
  EXPECT_EQ(r.skipped[0].reason, "missing sense year");
  EXPECT_EQ(r.skipped[1].reason, "no example sentence");
  EXPECT_EQ(r.skipped[2].reason, "missing frequency");
  EXPECT_EQ(r.skipped[3].reason, "frequency outside band");
}

// Independent re-check of every rule on ASCII records.
TEST(ClozeBuild, FiftyRecordsMatchRuleByRuleOracle) {
  const std::vector<std::string> lexicon = {"the", "old", "lamp", "was", "bright", "ship", "sailed", "far",
                                            "away", "rain", "fell", "cold", "and", "grey"};
  std::mt19937_64 rng(21);
  auto pick = [&] { return lexicon[rng() % lexicon.size()]; };
  std::vector<SenseRecord> recs;
  for (int i = 0; i < 50; ++i) {
    const std::string target = pick();
    std::vector<std::string> examples;
    const int n_ex = static_cast<int>(rng() % 3);
    for (int e = 0; e < n_ex; ++e) {
      std::string s;
      const int len = rng() % 4 == 0 ? 1 + static_cast<int>(rng() % 4) : 10 + static_cast<int>(rng() % 10);
      for (int w = 0; w < len; ++w) s += (w ? " " : "") + pick();
      if (rng() % 3 != 0) s += " " + target;
      if (rng() % 2) s += ".";
      examples.push_back(s);
    }
    std::optional<int> year;
    if (rng() % 10 != 0) year = 1800 + static_cast<int>(rng() % 200);
    std::optional<double> freq;
    if (rng() % 10 != 0) freq = std::vector<double>{0.5, 1.0, 20.0, 1000.0, 1500.0}[rng() % 5];
    recs.push_back(sense(target, "s" + std::to_string(i), year, examples, freq));
  }
  std::vector<std::string> v1_texts, v2_texts;
  for (const auto& w : lexicon) {
    const std::size_t c1 = rng() % 14 == 0 ? 1 : 2 + rng() % 3;
    const std::size_t c2 = 2 + rng() % 3;
    for (std::size_t c = 0; c < c1; ++c) v1_texts.push_back(w);
    for (std::size_t c = 0; c < c2; ++c) v2_texts.push_back(w);
  }
  const std::vector<WordCounts> vocabs = {word_counts_of_texts(v1_texts), word_counts_of_texts(v2_texts)};

  const std::regex word_re("[A-Za-z]+('[A-Za-z]+)*");
  std::vector<std::string> expected;
  for (const auto& r : recs) {
    if (!r.year || r.examples.empty() || !r.frequency_per_million) continue;
    if (*r.frequency_per_million < 1.0 || *r.frequency_per_million > 1000.0) continue;
    for (std::size_t i = 0; i < r.examples.size(); ++i) {
      const std::string& s = r.examples[i];
      std::vector<std::pair<std::size_t, std::string>> words;
      for (auto it = std::sregex_iterator(s.begin(), s.end(), word_re); it != std::sregex_iterator(); ++it) {
        words.emplace_back(static_cast<std::size_t>(it->position()), it->str());
      }
      if (words.empty() || words.back().second != r.word) continue;
      if (static_cast<double>(words.back().first) < 0.9 * static_cast<double>(s.size())) continue;
      if (words.back().first == 0) continue;
      bool known = true;
      for (const auto& [pos, w] : words) {
        for (const auto& v : vocabs) {
          auto it = v.counts.find(w);
          if (it == v.counts.end() || it->second < 2) known = false;
        }
      }
      if (known) expected.push_back(r.sense_id + "#" + std::to_string(i));
    }
  }
  const auto built = build_cloze_set(recs, vocabs);
  std::vector<std::string> got;
  for (const auto& t : built.tasks) got.push_back(t.id);
  EXPECT_EQ(got, expected);
  EXPECT_TRUE(built.vocabulary_filter_applied);
  EXPECT_GT(expected.size(), 0u);
  EXPECT_LT(expected.size(), built.candidates);
}

TEST(SenseRecord, JsonRoundTrip) {
  const auto r = sense("Dead", "dead-3", 1882, {"the phone was dead"}, 12.5);
  const auto back = parse_sense_record(to_json_line(r));
  EXPECT_EQ(back.word, "Dead");
  EXPECT_EQ(back.year, 1882);
  EXPECT_EQ(back.examples, r.examples);
  EXPECT_EQ(back.frequency_per_million, 12.5);
  const auto single = parse_sense_record(R"({"word":"w","year":"1901","examples":"one sentence"})");
  EXPECT_EQ(single.sense_id, "w");
  EXPECT_EQ(single.year, 1901);
  EXPECT_EQ(single.examples.size(), 1u);
  EXPECT_THROW(parse_sense_record("{\"year\":1}"), FormatError);
  EXPECT_THROW(parse_sense_record("not json"), FormatError);
}

DecodeResult decoded(std::vector<std::string> words) {
  DecodeResult r;
  for (std::size_t i = 0; i < words.size(); ++i) r.completions.push_back({words[i], -1.0 * double(i), i, {}});
  return r;
}

TEST(RankOf, PositionOrSentinel) {
  const auto r = decoded({"Dead", "gone", "quiet"});
  EXPECT_EQ(rank_of(r, "dead", 100), 0u);
  EXPECT_EQ(rank_of(r, "QUIET", 100), 2u);
  EXPECT_EQ(rank_of(r, "ringing", 100), 101u);
  EXPECT_EQ(rank_of(r, "quiet", 2), 3u);
}

ClozeTask task(std::string id, int year) {
  ClozeTask t;
  t.id = std::move(id);
  t.sense_year = year;
  return t;
}

ClozeRanking ranking(std::string id, std::size_t rank, std::size_t k = 10) { return {std::move(id), "m", rank, k}; }

TEST(Leakage, WorkedRatios) {
  std::vector<ClozeTask> tasks;
  std::vector<ClozeRanking> rankings;
  for (int i = 0; i < 10; ++i) {
    tasks.push_back(task("t" + std::to_string(i), 1850));
    rankings.push_back(ranking("t" + std::to_string(i), i < 5 ? 0 : 11));
  }
  for (int i = 0; i < 4; ++i) {
    tasks.push_back(task("f" + std::to_string(i), 1950));
    rankings.push_back(ranking("f" + std::to_string(i), i == 0 ? 3 : 11));
  }
  const auto r = leakage_report(rankings, tasks, 1900, 10);
  EXPECT_EQ(r.n_future, 4u);
  EXPECT_EQ(r.hits_future, 1u);
  EXPECT_EQ(r.leakage, 0.25);
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_EQ(r.rnl, 0.5);
}

TEST(Leakage, SaturationAndUndefinedFlags) {
  const std::vector<ClozeTask> tasks = {task("a", 1800), task("b", 1950)};
  const auto all = leakage_report(std::vector<ClozeRanking>{ranking("a", 0), ranking("b", 9)}, tasks, 1900, 10);
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_EQ(all.leakage, 1.0);
  EXPECT_EQ(all.rnl, 1.0);
  const auto none = leakage_report(std::vector<ClozeRanking>{ranking("a", 11), ranking("b", 0)}, tasks, 1900, 10);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_FALSE(none.rnl.has_value());
  const auto past_only = leakage_report(std::vector<ClozeRanking>{ranking("a", 0)}, tasks, 1900, 10);
  EXPECT_FALSE(past_only.leakage.has_value());
  EXPECT_FALSE(past_only.rnl.has_value());
  EXPECT_THROW(leakage_report(std::vector<ClozeRanking>{ranking("zz", 0)}, tasks, 1900, 10), InvalidArgument);
}

TEST(Leakage, RatiosAndMonotonicityInK) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClozeTask> tasks;
    std::vector<ClozeRanking> rankings;
    const int n = 1 + static_cast<int>(rng() % 15);
    for (int i = 0; i < n; ++i) {
      tasks.push_back(task(std::to_string(i), 1800 + static_cast<int>(rng() % 200)));
      rankings.push_back(ranking(std::to_string(i), rng() % 22, 20));
    }
    std::optional<double> prev_r, prev_l;
    for (std::size_t k = 1; k <= 20; ++k) {
      const auto rep = leakage_report(rankings, tasks, 1900, k);
      std::size_t t = 0, f = 0, ht = 0, hf = 0;
      for (int i = 0; i < n; ++i) {
        const bool hit = rankings[i].rank < k;
        if (tasks[i].sense_year <= 1900) {
          ++t;
          ht += hit;
        } else {
          ++f;
          hf += hit;
        }
      }
      ASSERT_EQ(rep.n_true, t);
      ASSERT_EQ(rep.hits_future, hf);
      if (t > 0) {
        ASSERT_EQ(*rep.recall, double(ht) / double(t));
      }
      if (f > 0) {
        ASSERT_EQ(*rep.leakage, double(hf) / double(f));
      }
      if (prev_r) {
        ASSERT_GE(*rep.recall, *prev_r);
      }
      if (prev_l) {
        ASSERT_GE(*rep.leakage, *prev_l);
      }
      prev_r = rep.recall;
      prev_l = rep.leakage;
    }
  }
}

TEST(Mrr, WorkedExamples) {
  EXPECT_DOUBLE_EQ(mrr(std::vector<ClozeRanking>{ranking("a", 0, 100), ranking("b", 1, 100), ranking("c", 101, 100)}),
                   0.5);
  EXPECT_EQ(mrr(std::vector<ClozeRanking>{ranking("a", 101, 100), ranking("b", 101, 100)}), 0.0);
  EXPECT_THROW(mrr(std::vector<ClozeRanking>{}), InvalidArgument);
}

TimeSlice group(std::string label, int a, int b) {
  TimeSlice s;
  s.label = std::move(label);
  s.start_year = a;
  s.end_year = b;
  return s;
}

TEST(Metrics, TwentyItemHandTally) {
  const std::vector<std::pair<int, std::size_t>> items = {
      {1810, 0},  {1820, 3},  {1830, 11}, {1845, 9},  {1849, 11}, {1850, 1},  {1860, 11},
      {1870, 11}, {1899, 4},  {1880, 11}, {1900, 0},  {1910, 11}, {1920, 11}, {1930, 11},
      {1949, 11}, {1950, 11}, {1960, 2},  {1970, 11}, {1980, 11}, {1999, 11}};
  std::vector<ClozeTask> tasks;
  std::vector<ClozeRanking> rankings;
  for (std::size_t i = 0; i < items.size(); ++i) {
    tasks.push_back(task("t" + std::to_string(i), items[i].first));
    rankings.push_back(ranking("t" + std::to_string(i), items[i].second));
  }
  const auto rep = leakage_report(rankings, tasks, 1899, 10);
  EXPECT_EQ(rep.n_true, 10u);
  EXPECT_EQ(rep.hits_true, 5u);
  EXPECT_EQ(rep.n_future, 10u);
  EXPECT_EQ(rep.hits_future, 2u);
  EXPECT_EQ(rep.recall, 0.5);
  EXPECT_EQ(rep.leakage, 0.2);
  EXPECT_EQ(rep.rnl, 0.4);
  EXPECT_NEAR(mrr(rankings), (1.0 + 0.25 + 0.1 + 0.5 + 0.2 + 1.0 + 1.0 / 3.0) / 20.0, 1e-15);

  const std::vector<TimeSlice> groups = {group("A", 1800, 1849), group("B", 1850, 1899), group("C", 1900, 1949),
                                         group("D", 1950, 1999), group("E", 2000, 2049)};
  const auto g = grouped_accuracy(rankings, tasks, groups);
  ASSERT_EQ(g.groups.size(), 4u);
  EXPECT_EQ(g.groups[0].accuracy, 0.6);
  EXPECT_EQ(g.groups[1].accuracy, 0.4);
  EXPECT_EQ(g.groups[2].accuracy, 0.2);
  EXPECT_EQ(g.groups[3].accuracy, 0.2);
  EXPECT_EQ(g.notes, (std::vector<std::string>{"group E has no tasks"}));
  EXPECT_EQ(g.ungrouped, 0u);
  std::size_t hits = 0;
  for (const auto& x : g.groups) hits += x.hits;
  EXPECT_EQ(hits, 7u);
}

TEST(Metrics, ZeroRecallRaisesUndefinedFlag) {
  const std::vector<ClozeTask> tasks = {task("a", 1800), task("b", 1810), task("c", 1950)};
  const auto r = leakage_report(
      std::vector<ClozeRanking>{ranking("a", 11), ranking("b", 11), ranking("c", 0)}, tasks, 1900, 10);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.leakage, 1.0);
  EXPECT_FALSE(r.rnl.has_value());
}

TEST(RankCloze, ThreeModelsFourTasksMatchDirectDecoding) {
  const auto tok = testing::toy_tokenizer(40);
  std::vector<Transformer> models;
  for (std::uint64_t s = 0; s < 3; ++s) models.emplace_back(testing::toy_config(tok.vocab_size(), 32, s));
  DecodeOptions o;
  o.k = 5;
  o.max_word_tokens = 3;
  std::vector<ClozeTask> tasks;
  const std::vector<std::string> prefixes = {"the cat sat on ", "a dog ran to ", "the son ", "tea at "};
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    ClozeTask t = task("q" + std::to_string(i), 1850);
    t.prefix = prefixes[i];
    t.target = i == 0 ? text::to_lower(top_k_single_words(models[0], tok, prefixes[0], o).completions[0].word)
                      : std::vector<std::string>{"mat", "toad", "sat"}[i - 1];
    tasks.push_back(t);
  }
  std::vector<BatteryMember> battery;
  for (std::size_t m = 0; m < 3; ++m) battery.push_back({"m" + std::to_string(m), &models[m], &tok});
  const auto r = rank_cloze(battery, tasks, o);
  ASSERT_EQ(r.rankings.size(), 12u);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_EQ(r.rankings[0].rank, 0u);
  for (const auto& rk : r.rankings) {
    const auto& m = models[static_cast<std::size_t>(rk.model_id[1] - '0')];
    const auto& t = *std::find_if(tasks.begin(), tasks.end(), [&](const ClozeTask& x) { return x.id == rk.task_id; });
    const auto d = top_k_single_words(m, tok, t.prefix, o);
    std::size_t expected = o.k + 1;
    for (std::size_t i = 0; i < d.completions.size(); ++i) {
      std::string w = d.completions[i].word;
      std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
      if (w == t.target) {
        expected = i;
        break;
      }
    }
    EXPECT_EQ(rk.rank, expected) << rk.model_id << " " << rk.task_id;
    EXPECT_EQ(rk.k, 5u);
  }
}

TEST(RankCloze, DecodingFailuresAreRecorded) {
  const auto tok = testing::toy_tokenizer(40);
  const Transformer m(testing::toy_config(tok.vocab_size(), 4));
  ClozeTask t = task("long", 1850);
  t.prefix = "the cat sat on the mat and the dog ran to ";
  t.target = "tea";
  ClozeTask ok = task("short", 1850);
  ok.prefix = "a ";
  ok.target = "cat";
  const std::vector<BatteryMember> battery = {{"m", &m, &tok}};
  DecodeOptions o;
  o.k = 3;
  o.max_word_tokens = 2;
  const auto r = rank_cloze(battery, std::vector<ClozeTask>{t, ok}, o);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].task_id, "long");
  EXPECT_EQ(r.rankings.size(), 1u);
}

double chain_log_prob(const Matrix& table, const BpeTokenizer& tok, const std::string& s) {
  double lp = 0.0;
  TokenId prev = tok.bos();
  for (TokenId id : tok.encode(s)) {
    lp += table(prev, id);
    prev = id;
  }
  return lp;
}

TEST(MinimalPairs, BigramModelMatchesChainProbabilities) {
  const auto tok = testing::toy_tokenizer(40);
  const Matrix table = testing::random_bigram_table(tok.vocab_size(), 31);
  const auto m = make_bigram_transformer(table, 64);
  const auto texts = testing::toy_texts(20, 77);
  std::vector<MinimalPair> pairs;
  for (std::size_t i = 0; i < 10; ++i) {
    pairs.push_back({texts[2 * i], texts[2 * i + 1], i % 2 ? "odd" : "even"});
  }
  std::size_t correct = 0, correct_odd = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double g = chain_log_prob(table, tok, pairs[i].good);
    const double b = chain_log_prob(table, tok, pairs[i].bad);
    EXPECT_NEAR(sentence_log_prob(m, tok, pairs[i].good), g, 1e-9);
    if (g > b) {
      ++correct;
      correct_odd += i % 2;
    }
  }
  const auto acc = minimal_pair_accuracy(m, tok, pairs);
  EXPECT_EQ(acc.overall.n, 10u);
  EXPECT_EQ(acc.overall.correct, correct);
  EXPECT_EQ(acc.by_subtask.at("odd").correct, correct_odd);
  EXPECT_EQ(acc.by_subtask.at("odd").n, 5u);
  EXPECT_GT(correct, 0u);
  EXPECT_LT(correct, 10u);

  auto shuffled = pairs;
  std::mt19937_64 rng(1);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  EXPECT_EQ(minimal_pair_accuracy(m, tok, shuffled).overall.correct, correct);
}

TEST(MinimalPairs, TiesCountAsIncorrect) {
  const auto tok = testing::toy_tokenizer(40);
  const auto m = make_bigram_transformer(testing::random_bigram_table(tok.vocab_size(), 2), 64);
  std::vector<MinimalPair> pairs;
  for (const auto& s : testing::toy_texts(8, 3)) pairs.push_back({s, s, "same"});
  const auto acc = minimal_pair_accuracy(m, tok, pairs);
  EXPECT_EQ(acc.overall.correct, 0u);
  EXPECT_EQ(acc.overall.accuracy, 0.0);
  EXPECT_FALSE(minimal_pair_accuracy(m, tok, std::vector<MinimalPair>{}).overall.accuracy.has_value());
}

TEST(MinimalPairs, ImplausibleBadSentenceLoses) {
  const auto tok = testing::toy_tokenizer(40);
  Matrix logits = Matrix::Zero(static_cast<Eigen::Index>(tok.vocab_size()), static_cast<Eigen::Index>(tok.vocab_size()));
  const auto good = tok.encode("the cat sat");
  for (TokenId id : tok.encode("the toad sat")) {
    if (std::find(good.begin(), good.end(), id) == good.end()) logits.col(id).array() -= 100.0;
  }
  const auto m = make_bigram_transformer(log_softmax_rows(logits), 64);
  const auto acc = minimal_pair_accuracy(m, tok, std::vector<MinimalPair>{{"the cat sat", "the toad sat", "x"}});
  EXPECT_EQ(acc.overall.correct, 1u);
}

TEST(MinimalPairs, ParseRecord) {
  const auto p = parse_minimal_pair(R"({"good":"a cat","bad":"a cats","subtask":"agreement"})");
  EXPECT_EQ(p.subtask, "agreement");
  EXPECT_THROW(parse_minimal_pair(R"({"good":"a cat"})"), FormatError);
}

TEST(CrossTime, IdenticalModelsGiveConstantColumnsAndMatchPerplexity) {
  const auto tok = testing::toy_tokenizer(40);
  const Transformer m(testing::toy_config(tok.vocab_size(), 16, 5));
  const std::vector<BatteryMember> battery = {{"a", &m, &tok}, {"b", &m, &tok}, {"c", &m, &tok}};
  const std::vector<TestSet> sets = {
      {"a", testing::toy_texts(10, 1)}, {"b", testing::toy_texts(10, 2)}, {"c", testing::toy_texts(10, 3)}};
  const auto mat = cross_time_matrix(battery, sets);
  ASSERT_EQ(mat.values.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(mat.values[0][j], mat.values[1][j]);
    EXPECT_EQ(mat.values[1][j], mat.values[2][j]);
    EXPECT_EQ(mat.values[0][j], perplexity(m, tok, sets[j].texts).perplexity);
    EXPECT_GE(mat.values[0][j], 1.0);
  }
  EXPECT_EQ(mat.row_labels, (std::vector<std::string>{"a", "b", "c"}));
  const auto csv = mat.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,test_set,perplexity");
}

TEST(CrossTime, MissingSliceIsAnError) {
  const auto tok = testing::toy_tokenizer(40);
  const Transformer m(testing::toy_config(tok.vocab_size(), 16, 5));
  const std::vector<BatteryMember> battery = {{"a", &m, &tok}, {"z", &m, &tok}};
  const std::vector<TestSet> sets = {{"a", testing::toy_texts(3, 1)}};
  EXPECT_THROW(cross_time_matrix(battery, sets), InvalidArgument);
}

}  // namespace
}  // namespace chronolm
