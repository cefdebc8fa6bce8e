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

#include "chronolm/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "chronolm/text.hpp"

namespace chronolm {
namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  template <class T>
  const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

 private:
  std::mt19937_64 engine_;
};

const std::vector<std::string> kFunctionWords = {
    "the", "a", "and", "was", "of", "to", "in", "that", "said", "with",
    "then", "they", "he", "she", "it", "on", "by", "very"};

// Pronounceable pseudo-words, unique across every call on one generator.
class Lexicon {
 public:
  explicit Lexicon(std::uint64_t seed) : rng_(seed) {
    used_.insert(kFunctionWords.begin(), kFunctionWords.end());
  }

  std::vector<std::string> words(std::size_t n) {
    static const std::string kOnsets = "bdfgklmnprstvz";
    static const std::string kVowels = "aeiou";
    std::vector<std::string> out;
    while (out.size() < n) {
      const std::size_t syllables = 2 + rng_.below(2);
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kOnsets[rng_.below(kOnsets.size())];
        w += kVowels[rng_.below(kVowels.size())];
      }
      if (rng_.below(3) == 0) w += kOnsets[rng_.below(kOnsets.size())];
      if (used_.insert(w).second) out.push_back(w);
    }
    return out;
  }

 private:
  Rng rng_;
  std::set<std::string> used_;
};

struct Grammar {
  std::vector<std::string> nouns, verbs, adjs;
  std::vector<std::string> stable_nouns, stable_verbs, stable_adjs, names, predicates;
  std::vector<std::pair<std::string, std::string>> past_cues, future_cues;
  std::vector<std::string> past_targets, future_targets;
};

std::vector<std::string> window(const std::vector<std::string>& pool, std::size_t slice,
                                std::size_t width, std::size_t shift) {
  const std::size_t b = slice * shift;
  return {pool.begin() + static_cast<std::ptrdiff_t>(b), pool.begin() + static_cast<std::ptrdiff_t>(b + width)};
}

class SentenceSource {
 public:
  SentenceSource(const Grammar& g, const SyntheticConfig& c, std::size_t slice, Rng& rng)
      : g_(g), c_(c), rng_(rng) {
    nouns_ = window(g.nouns, slice, c.noun_window, c.noun_shift);
    verbs_ = window(g.verbs, slice, c.verb_window, c.verb_shift);
    adjs_ = window(g.adjs, slice, c.adj_window, c.adj_shift);
    future_rate_ = slice < c.future_rate.size() ? c.future_rate[slice] : 0.0;
  }

  std::string noun() { return rng_.unit() < c_.stable_share ? rng_.pick(g_.stable_nouns) : rng_.pick(nouns_); }
  std::string verb() { return rng_.unit() < c_.stable_share ? rng_.pick(g_.stable_verbs) : rng_.pick(verbs_); }
  std::string adj() { return rng_.unit() < c_.stable_share ? rng_.pick(g_.stable_adjs) : rng_.pick(adjs_); }

  std::vector<std::string> sentence() {
    const double u = rng_.unit();
    if (u < 0.27) return {"the", adj(), noun(), verb(), "the", noun()};
    if (u < 0.42) return {rng_.pick(g_.names), verb(), "a", noun(), "in", "the", noun()};
    if (u < 0.57) {
      const bool future = !g_.future_targets.empty() && rng_.unit() < 0.085;
      return {"the", noun(), "was", future ? rng_.pick(g_.future_targets) : rng_.pick(g_.predicates)};
    }
    if (u < 0.77) return {"he", "said", "that", "the", noun(), verb(), "with", "the", adj(), noun()};
    if (u < 0.92) return {"they", verb(), "the", noun(), "and", "then", verb(), "a", noun()};
    if (u < 0.96 && !g_.past_cues.empty()) {
      const std::size_t i = rng_.below(g_.past_cues.size());
      return {"the", noun(), verb(), g_.past_cues[i].first, g_.past_cues[i].second, g_.past_targets[i]};
    }
    if (!g_.future_cues.empty()) {
      const std::size_t i = rng_.below(g_.future_cues.size());
      const std::string object = rng_.unit() < future_rate_ ? g_.future_targets[i] : noun();
      return {"the", noun(), verb(), g_.future_cues[i].first, g_.future_cues[i].second, object};
    }
    return {"the", adj(), noun(), verb(), "the", noun()};
  }

 private:
  const Grammar& g_;
  const SyntheticConfig& c_;
  Rng& rng_;
  std::vector<std::string> nouns_, verbs_, adjs_;
  double future_rate_ = 0.0;
};

std::string join_sentence(const std::vector<std::string>& words) {
  std::string s;
  for (const auto& w : words) {
    if (!s.empty()) s += ' ';
    s += w;
  }
  return s + ".";
}

// A sentence of stable words ending with cue + target whose target starts in
// the last tenth of the characters.
std::string example_sentence(const Grammar& g, Rng& rng, const std::pair<std::string, std::string>& cue,
                             const std::string& target) {
  std::vector<std::string> words = {rng.pick(g.names), "said", "that"};
  for (;;) {
    std::vector<std::string> tail = {"the", rng.pick(g.stable_nouns), rng.pick(g.stable_verbs), cue.first,
                                     cue.second, target};
    std::vector<std::string> all = words;
    all.insert(all.end(), tail.begin(), tail.end());
    const std::string s = join_sentence(all);
    const std::size_t start = s.size() - 1 - target.size();
    if (static_cast<double>(start) >= 0.9 * static_cast<double>(s.size())) return s;
    for (const char* w : {"the", "", "", "and"}) words.push_back(w);
    words[words.size() - 3] = rng.pick(g.stable_adjs);
    words[words.size() - 2] = rng.pick(g.stable_nouns);
  }
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& c) {
  if (c.n_slices == 0 || c.years_per_slice <= 0) throw InvalidArgument("synthetic corpus needs slices and years");
  if (c.noun_window + (c.n_slices - 1) * c.noun_shift == 0) throw InvalidArgument("empty noun pool");
  Lexicon lex(c.seed ^ 0x5eedULL);
  Grammar g;
  g.nouns = lex.words(c.noun_window + (c.n_slices - 1) * c.noun_shift);
  g.verbs = lex.words(c.verb_window + (c.n_slices - 1) * c.verb_shift);
  g.adjs = lex.words(c.adj_window + (c.n_slices - 1) * c.adj_shift);
  g.stable_nouns = lex.words(40);
  g.stable_verbs = lex.words(15);
  g.stable_adjs = lex.words(10);
  g.names = lex.words(10);
  g.predicates = lex.words(10);
  g.past_targets = lex.words(c.n_past_senses);
  g.future_targets = lex.words(c.n_future_senses);
  for (std::size_t i = 0; i < c.n_past_senses; ++i) {
    const auto w = lex.words(2);
    g.past_cues.emplace_back(w[0], w[1]);
  }
  for (std::size_t i = 0; i < c.n_future_senses; ++i) {
    const auto w = lex.words(2);
    g.future_cues.emplace_back(w[0], w[1]);
  }

  SyntheticCorpus out;
  out.cutoff_year = c.first_year + c.years_per_slice - 1;
  Rng rng(c.seed);
  const std::size_t per_year = std::max<std::size_t>(1, c.tokens_per_slice / static_cast<std::size_t>(c.years_per_slice));
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total_tokens = 0;
  for (std::size_t s = 0; s < c.n_slices; ++s) {
    const int y0 = c.first_year + static_cast<int>(s) * c.years_per_slice;
    out.slice_years.push_back({y0, y0 + c.years_per_slice - 1});
    SentenceSource source(g, c, s, rng);
    std::uint64_t slice_tokens = 0;
    for (int y = y0; y < y0 + c.years_per_slice; ++y) {
      std::size_t year_tokens = 0;
      for (std::size_t d = 0; year_tokens < per_year; ++d) {
        std::string body;
        for (std::size_t k = 0; k < c.doc_sentences; ++k) {
          const auto words = source.sentence();
          for (const auto& w : words) ++counts[w];
          year_tokens += words.size();
          if (!body.empty()) body += ' ';
          body += join_sentence(words);
        }
        out.documents.push_back({"doc-" + std::to_string(y) + "-" + std::to_string(d), std::nullopt,
                                 std::nullopt, y, std::move(body)});
      }
      slice_tokens += year_tokens;
    }
    out.slice_tokens.push_back(slice_tokens);
    total_tokens += slice_tokens;
  }

  const auto per_million = [&](const std::string& w) {
    return static_cast<double>(counts[w]) * 1e6 / static_cast<double>(total_tokens);
  };
  int future_year = out.slice_years.back().first;
  for (std::size_t s = 0; s < c.n_slices && s < c.future_rate.size(); ++s) {
    if (c.future_rate[s] > 0.0) {
      future_year = out.slice_years[s].first;
      break;
    }
  }
  const int past_year = c.first_year + 10;

  Rng erng(c.seed ^ 0xc10e5ULL);
  const auto add_sense = [&](const std::string& word, const std::string& id, int year,
                             const std::pair<std::string, std::string>& cue, const char* definition) {
    SenseRecord r{word, id, year, definition, {}, per_million(word)};
    for (std::size_t e = 0; e < c.examples_per_sense; ++e) r.examples.push_back(example_sentence(g, erng, cue, word));
    out.senses.push_back(std::move(r));
  };
  for (std::size_t i = 0; i < c.n_past_senses; ++i) {
    add_sense(g.past_targets[i], "past-" + std::to_string(i), past_year, g.past_cues[i], "established collocation");
    out.past_targets.push_back(g.past_targets[i]);
    out.past_years.push_back(past_year);
  }
  for (std::size_t i = 0; i < c.n_future_senses; ++i) {
    add_sense(g.future_targets[i], "future-" + std::to_string(i), future_year, g.future_cues[i],
              "emerging collocation");
    out.future_targets.push_back(g.future_targets[i]);
    out.future_years.push_back(future_year);
  }
  // Records that the cloze builder must reject, one per rule.
  if (!g.past_cues.empty()) {
    const auto& cue = g.past_cues[0];
    const std::string& w = g.past_targets[0];
    out.senses.push_back({w, "reject-no-year", std::nullopt, "", {example_sentence(g, erng, cue, w)}, per_million(w)});
    out.senses.push_back({"the", "reject-frequency", past_year, "", {example_sentence(g, erng, cue, "the")},
                          per_million("the")});
    out.senses.push_back({w, "reject-not-final", past_year, "", {example_sentence(g, erng, cue, w) + " the end."},
                          per_million(w)});
    out.senses.push_back({w, "reject-tail", past_year, "", {join_sentence({g.names[0], "said", w})},
                          per_million(w)});
    if (c.n_slices > 1 && c.noun_shift >= 1) {
      const std::string& early = g.nouns.front();  // absent from later slices
      out.senses.push_back({early, "reject-vocabulary", past_year, "", {example_sentence(g, erng, cue, early)},
                            std::max(1.0, per_million(early))});
    }
  }

  Rng prng(c.seed ^ 0xa115ULL);
  for (std::size_t i = 0; i < c.pairs_per_subtask; ++i) {
    const std::string a = prng.pick(g.stable_adjs), n1 = prng.pick(g.stable_nouns), v = prng.pick(g.stable_verbs),
                      n2 = prng.pick(g.stable_nouns);
    out.pairs.push_back({join_sentence({"the", a, n1, v, "the", n2}), join_sentence({"the", n1, a, v, "the", n2}),
                         "adjective_order"});
  }
  for (std::size_t i = 0; i < c.pairs_per_subtask; ++i) {
    const std::string n = prng.pick(g.stable_nouns), p = prng.pick(g.predicates);
    out.pairs.push_back({join_sentence({"the", n, "was", p}), join_sentence({"the", "was", n, p}), "predicate_order"});
  }
  return out;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_documents(dir / "corpus.jsonl", corpus.documents);
  {
    std::ofstream out(dir / "senses.jsonl", std::ios::binary);
    for (const auto& r : corpus.senses) out << to_json_line(r) << '\n';
    if (!out) throw Error("cannot write " + (dir / "senses.jsonl").string());
  }
  std::ofstream out(dir / "pairs.jsonl", std::ios::binary);
  for (const auto& p : corpus.pairs) {
    out << nlohmann::json{{"good", p.good}, {"bad", p.bad}, {"subtask", p.subtask}}.dump() << '\n';
  }
  if (!out) throw Error("cannot write " + (dir / "pairs.jsonl").string());
}

}  // namespace chronolm
