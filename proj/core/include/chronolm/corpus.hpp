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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chronolm {

struct Document {
  std::string id;
  std::optional<std::string> title;
  std::optional<std::string> author;
  int year = 0;
  std::string text;
};

/// Inclusive calendar-year interval.
struct YearRange {
  int first = 0;
  int last = 0;

  bool contains(int year) const noexcept { return year >= first && year <= last; }
};

/// Field names used to pull a Document out of one JSON record.
struct RecordSchema {
  std::string id = "id";
  std::string title = "title";
  std::string author = "author";
  std::string year = "year";
  std::string text = "text";
};

/// Immutable-after-build collection of documents with unique ids.
class CorpusStore {
 public:
  /// Returns false (and leaves the store unchanged) if the id is taken.
  bool add(Document doc);

  const Document* find(std::string_view id) const;
  const Document& at(std::string_view id) const;
  std::span<const Document> documents() const noexcept { return docs_; }
  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Rejection {
  std::string source;  // file path
  std::size_t line = 0;  // 1-based
  std::string id;      // may be empty when the record had none
  std::string reason;
};

struct IngestResult {
  CorpusStore store;
  std::vector<Rejection> rejections;
};

/// Reads newline-delimited JSON records. An unreadable file throws; every
/// bad record lands in the rejection list instead of being dropped.
IngestResult ingest(std::span<const std::filesystem::path> paths,
                    const RecordSchema& schema, YearRange range);

/// Parses one record; used by ingest and exposed for tooling.
Document parse_document(std::string_view json_line, const RecordSchema& schema);

void write_documents(const std::filesystem::path& path,
                     std::span<const Document> docs);
void write_rejections(const std::filesystem::path& path,
                      std::span<const Rejection> rejections);

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Default counter for budgets: whitespace-delimited tokens.
std::size_t count_whitespace_tokens(std::string_view text);

struct SplitBudgets {
  std::uint64_t train = 0;
  std::uint64_t val = 0;
  std::uint64_t test = 0;

  std::uint64_t total() const noexcept { return train + val + test; }
};

struct TimeSlice {
  std::string label;
  int start_year = 0;
  int end_year = 0;  // inclusive
  std::uint64_t train_budget = 0;
  std::uint64_t val_budget = 0;
  std::uint64_t test_budget = 0;

  bool contains(int year) const noexcept {
    return year >= start_year && year <= end_year;
  }
};

struct SliceShortfall {
  std::string label;
  std::uint64_t available = 0;
  std::uint64_t required = 0;
};

/// Slices partition the range: [start, boundary) for every slice but the
/// last, which is closed. Labels follow "start-boundary", so adjacent labels
/// share the boundary year ("1750-1820", "1820-1850").
struct SlicePlan {
  std::vector<TimeSlice> slices;
  std::map<std::string, std::string> assignment;  // document id -> slice label
  std::vector<std::string> unassigned;
  std::map<std::string, std::uint64_t> slice_tokens;
  bool feasible = true;
  std::vector<SliceShortfall> shortfalls;

  const TimeSlice* find(std::string_view label) const;
  std::vector<std::string> labels() const;
  /// Ids assigned to a slice, sorted.
  std::vector<std::string> documents_in(std::string_view label) const;
};

struct SlicePlanRequest {
  std::size_t n_slices = 5;
  SplitBudgets budgets;
  YearRange range;
  TokenCounter token_counter = count_whitespace_tokens;
};

/// Greedy left-to-right planning: each slice closes at the smallest year
/// boundary where its summed budget is met, and the final slice takes the
/// remaining years. Shortfalls make the plan infeasible; they never shrink a
/// slice silently.
SlicePlan plan_slices(const CorpusStore& store, const SlicePlanRequest& request);

/// Exclusive end boundaries of the first n-1 slices.
std::vector<int> slice_boundaries(const SlicePlan& plan);

struct SplitSet {
  std::string slice;
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t train_tokens = 0;
  std::uint64_t val_tokens = 0;
  std::uint64_t test_tokens = 0;
};

struct SplitResult {
  std::optional<SplitSet> split;
  std::optional<SliceShortfall> shortfall;  // set when infeasible

  bool feasible() const noexcept { return split.has_value(); }
};

/// Seeded shuffle of the slice's documents, then whole documents go to test
/// until its budget is met, then val, and the remainder is train.
SplitResult split_slice(const CorpusStore& store, const SlicePlan& plan,
                        std::string_view label, std::uint64_t seed,
                        const TokenCounter& counter = count_whitespace_tokens);

struct WordCounts {
  std::map<std::string, std::uint64_t> counts;
  std::string source;
  std::string word_rule;

  std::uint64_t total() const noexcept;
  std::uint64_t count(std::string_view word) const;
  WordCounts& operator+=(const WordCounts& other);
};

WordCounts word_counts(const CorpusStore& store, std::span<const std::string> ids,
                       std::string source = {});
WordCounts word_counts_of_texts(std::span<const std::string> texts,
                                std::string source = {});

/// Anything evaluated against training vocabularies: a group (subtask) and
/// the text whose words must all be known.
struct FilterItem {
  std::string group;
  std::string text;
};

struct GroupRetention {
  std::size_t retained = 0;
  std::size_t total = 0;
};

struct FilterResult {
  std::vector<std::size_t> retained;  // indices into the input, ascending
  std::map<std::string, GroupRetention> by_group;
};

/// Keeps an item iff every word in it occurs at least min_count times in
/// every vocabulary. Throws InvalidArgument on an empty vocabulary list.
FilterResult filter_in_vocab(std::span<const FilterItem> items,
                             std::span<const WordCounts> vocabularies,
                             std::uint64_t min_count = 2);

// Structured-text (JSON) persistence for pipeline artifacts.
std::string to_json(const SlicePlan& plan);
SlicePlan slice_plan_from_json(std::string_view json);
std::string to_json(const SplitSet& split);
SplitSet split_set_from_json(std::string_view json);
std::string to_json(const WordCounts& counts);
WordCounts word_counts_from_json(std::string_view json);

}  // namespace chronolm
