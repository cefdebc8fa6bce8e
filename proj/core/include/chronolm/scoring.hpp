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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronolm/model.hpp"
#include "chronolm/tokenizer.hpp"

namespace chronolm {

/// Element i is -log p(tokens[i+1] | tokens[0..i]). Requires
/// 2 <= tokens.size() <= context length.
std::vector<double> nll(const LanguageModel& model, std::span<const TokenId> tokens);

/// Same quantity for sequences of any length. Targets are scored exactly
/// once, in chunks of `stride`; each chunk is scored inside a window that
/// ends at the chunk and reaches back at most context_length tokens, so
/// every target sees at least context_length - stride tokens of history.
/// stride == 0 picks context_length / 2.
std::vector<double> windowed_nll(const LanguageModel& model, std::span<const TokenId> tokens,
                                 std::size_t stride = 0);

/// <bos> text_1 <eos> text_2 <eos> ... ; the layout used for perplexity.
std::vector<TokenId> token_stream(const BpeTokenizer& tokenizer, std::span<const std::string> texts);

struct PerplexityResult {
  double perplexity = 0.0;
  double total_nll = 0.0;
  std::size_t n_tokens = 0;
};

/// exp(mean NLL) over every scored target of the stream.
PerplexityResult perplexity(const LanguageModel& model, const BpeTokenizer& tokenizer,
                            std::span<const std::string> texts, std::size_t stride = 0);
PerplexityResult stream_perplexity(const LanguageModel& model, std::span<const TokenId> stream,
                                   std::size_t stride = 0);

struct WordSurprisal {
  std::string word;  // lowercased
  std::size_t begin = 0;
  std::size_t end = 0;
  double value = 0.0;  // mean NLL of the word's subword tokens
  std::size_t n_tokens = 0;
};

/// One entry per word of the sentence, in order. The sentence is scored
/// after <bos>; tokens carrying no word bytes (punctuation, digits) are not
/// attributed to any word.
std::vector<WordSurprisal> per_word_surprisal(const LanguageModel& model,
                                              const BpeTokenizer& tokenizer,
                                              std::string_view sentence);

/// Min-max scaling to [0, 1]; a constant (or single-value) row maps to zeros.
std::vector<double> min_max_normalize(std::span<const double> values);

struct SurprisalProfile {
  std::string sentence;
  std::vector<std::string> words;
  std::vector<std::string> row_labels;  // one per model
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> normalized;
};

/// Rows must all have one value per word.
SurprisalProfile normalize_profile(std::string sentence, std::vector<std::string> words,
                                   std::vector<std::string> row_labels,
                                   std::vector<std::vector<double>> raw_rows);

}  // namespace chronolm
