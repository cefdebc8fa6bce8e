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

#include "chronolm/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "chronolm/text.hpp"

namespace chronolm {
namespace {

struct Hypothesis {
  std::vector<TokenId> path;
  double score = 0.0;
};

bool better(double sa, const std::vector<TokenId>& pa, double sb, const std::vector<TokenId>& pb) {
  if (sa != sb) return sa > sb;
  return pa < pb;
}

// Token classes and the encoded prefix shared by beam and oracle.
struct Setup {
  std::vector<TokenId> context;
  std::vector<TokenId> first;         // admissible first tokens
  std::vector<TokenId> continuation;  // admissible later tokens
  std::vector<TokenId> terminators;   // word-initiating tokens and <eos>
  std::size_t max_depth = 0;
};

Setup prepare(const LanguageModel& model, const BpeTokenizer& tokenizer, std::string_view prefix,
              const DecodeOptions& o) {
  if (o.k == 0) throw InvalidArgument("k must be at least 1");
  if (o.max_word_tokens == 0) throw InvalidArgument("max_word_tokens must be at least 1");
  if (tokenizer.vocab_size() != model.vocab_size()) {
    throw InvalidArgument("tokenizer and model vocabulary sizes differ");
  }
  Setup s;
  const auto ids = tokenizer.encode(text::rtrim(prefix));
  if (ids.empty()) throw InvalidArgument("prefix is empty after tokenization");
  s.context.push_back(tokenizer.bos());
  s.context.insert(s.context.end(), ids.begin(), ids.end());
  if (s.context.size() >= model.context_length()) {
    throw InvalidArgument("prefix of " + std::to_string(s.context.size()) +
                          " tokens does not fit the model context of " +
                          std::to_string(model.context_length()));
  }
  s.max_depth = std::min(o.max_word_tokens, model.context_length() - s.context.size());
  for (std::size_t i = 0; i < tokenizer.vocab_size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    switch (tokenizer.kind(id)) {
      case TokenKind::kWordStart:
        s.first.push_back(id);
        s.terminators.push_back(id);
        break;
      case TokenKind::kPunctuation:
        s.terminators.push_back(id);
        if (o.allow_punctuation_first || (o.allow_bare_space && tokenizer.token_bytes(id) == " ")) {
          s.first.push_back(id);
        }
        break;
      case TokenKind::kContinuation:
        s.continuation.push_back(id);
        break;
      case TokenKind::kSpecial:
        if (id == tokenizer.eos()) s.terminators.push_back(id);
        break;
    }
  }
  return s;
}

std::string surface(const BpeTokenizer& tokenizer, const std::vector<TokenId>& path) {
  std::string w = tokenizer.decode(path);
  if (!w.empty() && w.front() == ' ') w.erase(0, 1);
  return w;
}

double log_sum(const Vector& lp, const std::vector<TokenId>& ids) {
  double m = -std::numeric_limits<double>::infinity();
  for (TokenId id : ids) m = std::max(m, lp(id));
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (TokenId id : ids) s += std::exp(lp(id) - m);
  return m + std::log(s);
}

// Log next-token distributions for context + each path.
std::vector<Vector> next_distributions(const LanguageModel& model, const Setup& s,
                                       const std::vector<const std::vector<TokenId>*>& paths) {
  std::vector<std::vector<TokenId>> seqs;
  seqs.reserve(paths.size());
  for (const auto* p : paths) {
    auto seq = s.context;
    seq.insert(seq.end(), p->begin(), p->end());
    seqs.push_back(std::move(seq));
  }
  const Matrix logits = model.next_logits(seqs);
  std::vector<Vector> out;
  out.reserve(paths.size());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.push_back(log_softmax(logits.row(r).transpose()));
  return out;
}

// Keeps the best path per lowercased word, ranks, truncates to k.
DecodeResult finalize(const BpeTokenizer& tokenizer, std::vector<Hypothesis> finished,
                      std::size_t k, std::size_t evaluations) {
  std::unordered_map<std::string, Completion> best;
  for (auto& h : finished) {
    std::string word = surface(tokenizer, h.path);
    if (word.empty()) continue;
    std::string key = text::to_lower(word);
    auto it = best.find(key);
    if (it == best.end()) {
      best.emplace(std::move(key), Completion{std::move(word), h.score, 0, std::move(h.path)});
    } else if (better(h.score, h.path, it->second.score, it->second.path)) {
      it->second = Completion{std::move(word), h.score, 0, std::move(h.path)};
    }
  }
  DecodeResult r;
  r.completions.reserve(best.size());
  for (auto& [key, c] : best) r.completions.push_back(std::move(c));
  std::sort(r.completions.begin(), r.completions.end(), [](const Completion& a, const Completion& b) {
    return better(a.score, a.path, b.score, b.path);
  });
  if (r.completions.size() > k) r.completions.resize(k);
  for (std::size_t i = 0; i < r.completions.size(); ++i) r.completions[i].rank = i;
  r.complete = r.completions.size() == k;
  r.evaluations = evaluations;
  return r;
}

// Score of the k-th distinct word among finished hypotheses, or -inf.
double kth_unique_score(const BpeTokenizer& tokenizer, const std::vector<Hypothesis>& finished,
                        std::size_t k) {
  std::unordered_map<std::string, double> best;
  for (const auto& h : finished) {
    const std::string key = text::to_lower(surface(tokenizer, h.path));
    if (key.empty()) continue;
    auto [it, inserted] = best.emplace(key, h.score);
    if (!inserted) it->second = std::max(it->second, h.score);
  }
  if (best.size() < k) return -std::numeric_limits<double>::infinity();
  std::vector<double> scores;
  scores.reserve(best.size());
  for (const auto& [w, sc] : best) scores.push_back(sc);
  std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(k - 1), scores.end(),
                   std::greater<>());
  return scores[k - 1];
}

}  // namespace

SearchBudgetExceeded::SearchBudgetExceeded(double e, double budget)
    : Error("exhaustive search would enumerate about " + std::to_string(static_cast<long long>(e)) +
            " paths, over the budget of " + std::to_string(static_cast<long long>(budget))),
      estimate(e) {}

DecodeResult top_k_single_words(const LanguageModel& model, const BpeTokenizer& tokenizer,
                                std::string_view prefix, const DecodeOptions& options) {
  const Setup s = prepare(model, tokenizer, prefix, options);
  const std::size_t width = options.beam_width == 0 ? 4 * options.k : options.beam_width;
  if (width < options.k) throw InvalidArgument("beam_width must be at least k");

  std::size_t evaluations = 1;
  const std::vector<TokenId> empty;
  const Vector lp0 = next_distributions(model, s, {&empty}).front();
  std::vector<Hypothesis> live;
  for (TokenId id : s.first) live.push_back({{id}, lp0(id)});

  std::vector<Hypothesis> finished;
  for (std::size_t depth = 1; depth <= s.max_depth && !live.empty(); ++depth) {
    const auto by_rank = [](const Hypothesis& a, const Hypothesis& b) {
      return better(a.score, a.path, b.score, b.path);
    };
    if (live.size() > width) {
      std::partial_sort(live.begin(), live.begin() + static_cast<std::ptrdiff_t>(width), live.end(),
                        by_rank);
      live.resize(width);
    }
    double best_live = -std::numeric_limits<double>::infinity();
    for (const auto& h : live) best_live = std::max(best_live, h.score);
    if (kth_unique_score(tokenizer, finished, options.k) > best_live) break;

    std::vector<const std::vector<TokenId>*> paths;
    for (const auto& h : live) paths.push_back(&h.path);
    const auto dists = next_distributions(model, s, paths);
    evaluations += live.size();

    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const Hypothesis& h = live[i];
      finished.push_back({h.path, h.score + log_sum(dists[i], s.terminators)});
      if (depth == s.max_depth) continue;
      for (TokenId c : s.continuation) {
        Hypothesis e{h.path, h.score + dists[i](c)};
        e.path.push_back(c);
        next.push_back(std::move(e));
      }
    }
    live = std::move(next);
  }
  return finalize(tokenizer, std::move(finished), options.k, evaluations);
}

std::vector<Completion> enumerate_single_word_paths(const LanguageModel& model,
                                                    const BpeTokenizer& tokenizer,
                                                    std::string_view prefix,
                                                    const DecodeOptions& options) {
  const Setup s = prepare(model, tokenizer, prefix, options);
  double estimate = 0.0;
  double level = static_cast<double>(s.first.size());
  for (std::size_t d = 1; d <= s.max_depth; ++d) {
    estimate += level;
    level *= static_cast<double>(s.continuation.size());
  }
  if (estimate > options.oracle_budget) throw SearchBudgetExceeded(estimate, options.oracle_budget);

  std::vector<Completion> out;
  const std::vector<TokenId> empty;
  const Vector lp0 = next_distributions(model, s, {&empty}).front();
  std::vector<Hypothesis> frontier;
  for (TokenId id : s.first) frontier.push_back({{id}, lp0(id)});
  constexpr std::size_t kChunk = 256;
  for (std::size_t depth = 1; depth <= s.max_depth && !frontier.empty(); ++depth) {
    std::vector<Hypothesis> next;
    for (std::size_t c0 = 0; c0 < frontier.size(); c0 += kChunk) {
      const std::size_t c1 = std::min(frontier.size(), c0 + kChunk);
      std::vector<const std::vector<TokenId>*> paths;
      for (std::size_t i = c0; i < c1; ++i) paths.push_back(&frontier[i].path);
      const auto dists = next_distributions(model, s, paths);
      for (std::size_t i = c0; i < c1; ++i) {
        const Hypothesis& h = frontier[i];
        const Vector& lp = dists[i - c0];
        std::string word = surface(tokenizer, h.path);
        if (!word.empty()) {
          out.push_back({std::move(word), h.score + log_sum(lp, s.terminators), 0, h.path});
        }
        if (depth == s.max_depth) continue;
        for (TokenId c : s.continuation) {
          Hypothesis e{h.path, h.score + lp(c)};
          e.path.push_back(c);
          next.push_back(std::move(e));
        }
      }
    }
    frontier = std::move(next);
  }
  return out;
}

DecodeResult brute_force_single_words(const LanguageModel& model, const BpeTokenizer& tokenizer,
                                      std::string_view prefix, const DecodeOptions& options) {
  auto paths = enumerate_single_word_paths(model, tokenizer, prefix, options);
  std::vector<Hypothesis> finished;
  finished.reserve(paths.size());
  for (auto& c : paths) finished.push_back({std::move(c.path), c.score});
  const std::size_t evaluations = finished.size();
  return finalize(tokenizer, std::move(finished), options.k, evaluations);
}

}  // namespace chronolm
