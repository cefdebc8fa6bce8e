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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronolm/common.hpp"
#include "chronolm/corpus.hpp"

namespace chronolm {

enum class AuthorSource { kAuthority, kCatalog };

struct AuthorRecord {
  std::string id;
  std::string name;
  std::optional<int> birth_year;
  std::optional<int> death_year;
  AuthorSource source = AuthorSource::kCatalog;
};

/// Splits a display string such as "Twain, Mark (1835-1910)" or
/// "Mark Twain, b.1835 d.1910" into a name and life dates.
AuthorRecord parse_author_string(std::string_view display, AuthorSource source, std::string id = {});

/// Lowercase ASCII form: diacritics folded, parenthesized text, digits and
/// date markers removed, punctuation dropped, "Last, First" reordered.
std::string canonical_name(std::string_view name);

std::size_t levenshtein(std::string_view a, std::string_view b);
/// Edit distance of the canonical names over the longer length, in [0, 1].
double name_distance(std::string_view a, std::string_view b);

enum class DateRelation {
  kUnknown,   // no life date present on both sides
  kAgree,     // every shared date within one year
  kConflict,  // some shared date differs by more than one year
};
DateRelation compare_dates(const AuthorRecord& a, const AuthorRecord& b);

struct AuthorMatch {
  std::string authority_id;
  std::string catalog_id;
  int pass = 1;
  double name_distance = 0.0;
  bool date_agreement = false;
};

struct MatchResult {
  std::vector<AuthorMatch> matches;     // in catalog input order
  std::vector<std::string> unmatched;   // catalog ids
};

struct MatchThresholds {
  double pass1 = 0.25;
  double pass2 = 0.10;
};

/// Pass 1 accepts a pair within pass1 whose life dates agree; pass 2 runs
/// over the catalog authors still unmatched and accepts pairs within pass2
/// whose dates do not conflict. Each catalog author takes its closest
/// admissible authority record (ties by authority id); authority records
/// may match several catalog authors.
MatchResult match_authors(std::span<const AuthorRecord> authority, std::span<const AuthorRecord> catalog,
                          const MatchThresholds& thresholds = {});

/// "When was the work {title} by {author} written? Answer just with the year."
std::string attribution_prompt(std::string_view title, std::string_view author);

/// First standalone 3-4 digit integer inside `plausible`.
std::optional<int> extract_year(std::string_view response, YearRange plausible = {1000, 2100});

/// A text-generation backend. Implementations must be safe to call from
/// several threads and throw Error on transport failures.
class TextGenerationClient {
 public:
  virtual ~TextGenerationClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct HttpClientConfig {
  /// Chat-completions endpoint, e.g. https://host/v1/chat/completions.
  std::string url;
  std::string model;
  /// Environment variable holding a bearer token; empty sends none.
  std::string api_key_env = "CHRONOLM_API_KEY";
  double temperature = 0.0;
  int timeout_seconds = 60;
};

/// OpenAI-compatible chat-completions client.
class HttpChatClient : public TextGenerationClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  std::string complete(const std::string& prompt) override;

 private:
  HttpClientConfig config_;
  std::string origin_;
  std::string path_;
};

struct Work {
  std::string id;
  std::string title;
  std::string author;
  std::vector<int> gold_years;  // any of them counts as correct
};

std::vector<Work> read_works(const std::filesystem::path& path);
std::vector<AuthorRecord> read_author_records(const std::filesystem::path& path, AuthorSource source);

enum class AttributionStatus { kParsed, kUnparseable, kFailed };

struct DateAttribution {
  std::string work_id;
  std::optional<int> predicted_year;
  std::vector<int> gold_years;
  std::string raw_response;
  AttributionStatus status = AttributionStatus::kFailed;
  std::size_t attempts = 0;
  std::string error;
};

std::string to_json_line(const DateAttribution& a);
DateAttribution attribution_from_json(std::string_view line);

struct AttributeOptions {
  std::size_t max_retries = 3;
  double backoff_seconds = 1.0;  // doubled after every failed attempt
  std::size_t max_in_flight = 4;
  double requests_per_second = 0.0;  // 0 disables rate limiting
  YearRange plausible{1000, 2100};
  /// Append-only record file; works already present (and not failed) are
  /// reused instead of queried again.
  std::optional<std::filesystem::path> cache_path;
  std::function<void(double seconds)> sleep;  // defaults to a real sleep
};

/// Results sorted by work id.
std::vector<DateAttribution> attribute_dates(std::span<const Work> works, TextGenerationClient& client,
                                             const AttributeOptions& options = {});

struct AttributionScore {
  int tolerance = 0;
  std::optional<int> dq_delta;
  double accuracy = 0.0;
  std::size_t n_scored = 0;
  std::size_t n_disqualified = 0;
  std::size_t n_hits = 0;
  std::size_t n_unparsed = 0;  // scored as misses
};

/// Only items with gold years count. A prediction further than dq_delta
/// from every gold year is excluded from the denominator.
AttributionScore evaluate_attribution(std::span<const DateAttribution> attributions, int tolerance,
                                      std::optional<int> dq_delta = std::nullopt);

}  // namespace chronolm
