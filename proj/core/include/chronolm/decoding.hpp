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
#include <string>
#include <string_view>
#include <vector>

#include "chronolm/model.hpp"
#include "chronolm/tokenizer.hpp"

namespace chronolm {

struct DecodeOptions {
  std::size_t k = 100;
  /// Live hypotheses kept per step; 0 means 4 * k.
  std::size_t beam_width = 0;
  /// Longest token path considered for one word.
  std::size_t max_word_tokens = 8;
  /// Admit pure punctuation tokens as the first token of a word.
  bool allow_punctuation_first = false;
  /// Admit a lone boundary space as the first token, to be followed by
  /// continuation tokens (words whose space did not merge with them).
  bool allow_bare_space = true;
  /// Upper bound on paths the exhaustive oracle will enumerate.
  double oracle_budget = 5e6;
};

struct Completion {
  std::string word;  // decoded surface without the boundary space
  double score = 0.0;  // log p(path) + log p(terminate after path)
  std::size_t rank = 0;
  std::vector<TokenId> path;
};

struct DecodeResult {
  std::vector<Completion> completions;
  /// False when fewer than k distinct words could be produced.
  bool complete = false;
  /// Number of model evaluations (sequences scored).
  std::size_t evaluations = 0;
};

/// Raised by the oracle when enumeration would exceed its budget.
class SearchBudgetExceeded : public Error {
 public:
  SearchBudgetExceeded(double estimate, double budget);
  double estimate;
};

/// Beam search for the k most probable single-word continuations of prefix.
/// After the first token, every step may close the word; the closing event
/// carries the probability of all word-initiating tokens plus <eos>.
/// Results are deduplicated case-insensitively and ordered by score, then
/// by token path.
DecodeResult top_k_single_words(const LanguageModel& model, const BpeTokenizer& tokenizer,
                                std::string_view prefix, const DecodeOptions& options);

/// Exact top-k by exhaustive enumeration of all paths up to max_word_tokens.
DecodeResult brute_force_single_words(const LanguageModel& model, const BpeTokenizer& tokenizer,
                                      std::string_view prefix, const DecodeOptions& options);

/// Every single-word path with its score, unranked and not deduplicated.
std::vector<Completion> enumerate_single_word_paths(const LanguageModel& model,
                                                    const BpeTokenizer& tokenizer,
                                                    std::string_view prefix,
                                                    const DecodeOptions& options);

}  // namespace chronolm
