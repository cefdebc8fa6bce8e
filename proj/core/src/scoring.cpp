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

#include "chronolm/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "chronolm/text.hpp"

namespace chronolm {

std::vector<double> nll(const LanguageModel& model, std::span<const TokenId> tokens) {
  if (tokens.size() < 2) throw InvalidArgument("nll needs at least two tokens");
  if (tokens.size() > model.context_length()) {
    throw InvalidArgument("sequence longer than the context; use windowed_nll");
  }
  const Matrix lp = log_softmax_rows(model.logits(tokens));
  std::vector<double> out(tokens.size() - 1);
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    out[t] = -lp(static_cast<Eigen::Index>(t), tokens[t + 1]);
  }
  return out;
}

std::vector<double> windowed_nll(const LanguageModel& model, std::span<const TokenId> tokens,
                                 std::size_t stride) {
  const std::size_t n = tokens.size();
  const std::size_t ctx = model.context_length();
  if (n < 2) throw InvalidArgument("windowed_nll needs at least two tokens");
  if (n <= ctx) return nll(model, tokens);
  if (stride == 0) stride = std::max<std::size_t>(1, ctx / 2);
  if (stride >= ctx) throw InvalidArgument("stride must be smaller than the context length");

  std::vector<double> out;
  out.reserve(n - 1);
  std::size_t next = 1;  // first unscored target position
  while (next < n) {
    const std::size_t end = std::min(next + stride, n);
    const std::size_t begin = end > ctx ? end - ctx : 0;
    const Matrix lp = log_softmax_rows(model.logits(tokens.subspan(begin, end - begin)));
    for (std::size_t t = next; t < end; ++t) {
      out.push_back(-lp(static_cast<Eigen::Index>(t - 1 - begin), tokens[t]));
    }
    next = end;
  }
  return out;
}

std::vector<TokenId> token_stream(const BpeTokenizer& tokenizer, std::span<const std::string> texts) {
  std::vector<TokenId> stream{tokenizer.bos()};
  for (const auto& t : texts) {
    const auto ids = tokenizer.encode(t);
    stream.insert(stream.end(), ids.begin(), ids.end());
    stream.push_back(tokenizer.eos());
  }
  return stream;
}

PerplexityResult stream_perplexity(const LanguageModel& model, std::span<const TokenId> stream,
                                   std::size_t stride) {
  const auto values = windowed_nll(model, stream, stride);
  PerplexityResult r;
  for (double v : values) r.total_nll += v;
  r.n_tokens = values.size();
  r.perplexity = std::exp(r.total_nll / static_cast<double>(r.n_tokens));
  return r;
}

PerplexityResult perplexity(const LanguageModel& model, const BpeTokenizer& tokenizer,
                            std::span<const std::string> texts, std::size_t stride) {
  if (texts.empty()) throw InvalidArgument("perplexity needs at least one text");
  const auto stream = token_stream(tokenizer, texts);
  if (stream.size() == 1 + texts.size()) throw InvalidArgument("texts are empty after tokenization");
  return stream_perplexity(model, stream, stride);
}

std::vector<WordSurprisal> per_word_surprisal(const LanguageModel& model,
                                              const BpeTokenizer& tokenizer,
                                              std::string_view sentence) {
  const auto spans = text::word_spans(sentence);
  std::vector<WordSurprisal> out;
  out.reserve(spans.size());
  for (const auto& s : spans) {
    out.push_back({text::to_lower(sentence.substr(s.begin, s.end - s.begin)), s.begin, s.end, 0.0, 0});
  }
  if (spans.empty()) return out;

  const auto tokens = tokenizer.encode_with_offsets(sentence);
  std::vector<TokenId> ids{tokenizer.bos()};
  for (const auto& t : tokens) ids.push_back(t.id);
  const auto values = windowed_nll(model, ids);

  std::size_t w = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::size_t b = tokens[i].begin;
    while (b < tokens[i].end && !text::is_word_byte(static_cast<unsigned char>(sentence[b])) &&
           sentence[b] != '\'') {
      ++b;
    }
    if (b >= tokens[i].end) continue;
    while (w < spans.size() && spans[w].end <= b) ++w;
    if (w == spans.size() || spans[w].begin > b) continue;  // digits and other non-word bytes
    out[w].value += values[i];
    ++out[w].n_tokens;
  }
  for (auto& ws : out) {
    if (ws.n_tokens > 0) ws.value /= static_cast<double>(ws.n_tokens);
  }
  return out;
}

std::vector<double> min_max_normalize(std::span<const double> values) {
  std::vector<double> out(values.size(), 0.0);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / range;
  return out;
}

SurprisalProfile normalize_profile(std::string sentence, std::vector<std::string> words,
                                   std::vector<std::string> row_labels,
                                   std::vector<std::vector<double>> raw_rows) {
  if (row_labels.size() != raw_rows.size()) throw InvalidArgument("one label per surprisal row required");
  SurprisalProfile p{std::move(sentence), std::move(words), std::move(row_labels), std::move(raw_rows), {}};
  for (const auto& row : p.raw) {
    if (row.size() != p.words.size()) throw InvalidArgument("surprisal row length differs from word count");
    p.normalized.push_back(min_max_normalize(row));
  }
  return p;
}

}  // namespace chronolm
