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

namespace chronolm::text {

/// Identifier of the word-segmentation rule below; recorded in WordCounts.
inline constexpr std::string_view kWordRule = "lower-alpha-runs/v1";

struct WordSpan {
  std::size_t begin = 0;  // byte offset into the source text
  std::size_t end = 0;    // one past the last byte
};

/// Letters are ASCII A-Z/a-z plus every byte >= 0x80, so UTF-8 letters
/// stay inside words.
bool is_word_byte(unsigned char c) noexcept;

/// Maximal alphabetic runs. An apostrophe is kept when it sits between two
/// word bytes ("don't" is one word, "'tis" is "tis").
std::vector<WordSpan> word_spans(std::string_view text);

/// Lowercased words in text order, following word_spans().
std::vector<std::string> words(std::string_view text);

std::string to_lower(std::string_view s);

std::string_view trim(std::string_view s) noexcept;
std::string_view rtrim(std::string_view s) noexcept;

/// Whitespace-delimited token count; used for slice budgets before any
/// subword tokenizer exists.
std::size_t whitespace_token_count(std::string_view s) noexcept;

/// Fixed, locale-independent rendering used in every report ("%.10g").
std::string format_number(double v);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view s);

}  // namespace chronolm::text
