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

#include "chronolm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "chronolm/common.hpp"
#include "chronolm/text.hpp"
#include "json.hpp"

namespace chronolm {

using nlohmann::json;

bool CorpusStore::add(Document doc) {
  if (index_.contains(doc.id)) return false;
  index_.emplace(doc.id, docs_.size());
  docs_.push_back(std::move(doc));
  return true;
}

const Document* CorpusStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &docs_[it->second];
}

const Document& CorpusStore::at(std::string_view id) const {
  const Document* doc = find(id);
  if (doc == nullptr) throw InvalidArgument("unknown document id '" + std::string(id) + "'");
  return *doc;
}

namespace {

std::optional<std::string> optional_string(const json& record, const std::string& key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw FormatError("field '" + key + "' is not a string");
  return it->get<std::string>();
}

int parse_year(const json& value) {
  if (value.is_number_integer()) return value.get<int>();
  if (value.is_number_float()) {
    const double y = value.get<double>();
    if (y != static_cast<double>(static_cast<int>(y))) throw FormatError("year is not an integer");
    return static_cast<int>(y);
  }
  if (value.is_string()) {
    const auto s = value.get<std::string>();
    std::size_t pos = 0;
    int year = 0;
    try {
      year = std::stoi(s, &pos);
    } catch (const std::exception&) {
      throw FormatError("year '" + s + "' is not an integer");
    }
    if (pos != s.size()) throw FormatError("year '" + s + "' is not an integer");
    return year;
  }
  throw FormatError("year is not an integer");
}

}  // namespace

Document parse_document(std::string_view json_line, const RecordSchema& schema) {
  json record;
  try {
    record = json::parse(json_line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed record: ") + e.what());
  }
  if (!record.is_object()) throw FormatError("record is not an object");

  Document doc;
  auto id = record.find(schema.id);
  if (id == record.end() || id->is_null()) throw FormatError("missing id");
  doc.id = id->is_string() ? id->get<std::string>() : id->dump();
  if (doc.id.empty()) throw FormatError("empty id");

  doc.title = optional_string(record, schema.title);
  doc.author = optional_string(record, schema.author);

  auto year = record.find(schema.year);
  if (year == record.end() || year->is_null()) throw FormatError("missing year");
  doc.year = parse_year(*year);

  auto text = optional_string(record, schema.text);
  if (!text || text->empty()) throw FormatError("empty text");
  doc.text = std::move(*text);
  return doc;
}

IngestResult ingest(std::span<const std::filesystem::path> paths,
                    const RecordSchema& schema, YearRange range) {
  IngestResult result;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read corpus file " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      Rejection rejection{path.string(), line_no, {}, {}};
      try {
        Document doc = parse_document(line, schema);
        rejection.id = doc.id;
        if (!range.contains(doc.year)) {
          rejection.reason = "year " + std::to_string(doc.year) + " outside " +
                             std::to_string(range.first) + "-" + std::to_string(range.last);
        } else if (!result.store.add(std::move(doc))) {
          rejection.reason = "duplicate id";
        } else {
          continue;
        }
      } catch (const FormatError& e) {
        rejection.reason = e.what();
      }
      result.rejections.push_back(std::move(rejection));
    }
  }
  return result;
}

void write_documents(const std::filesystem::path& path, std::span<const Document> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& doc : docs) {
    json record = {{"id", doc.id}, {"year", doc.year}, {"text", doc.text}};
    if (doc.title) record["title"] = *doc.title;
    if (doc.author) record["author"] = *doc.author;
    out << record.dump() << '\n';
  }
}

void write_rejections(const std::filesystem::path& path,
                      std::span<const Rejection> rejections) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rejections) {
    out << json{{"source", r.source}, {"line", r.line}, {"id", r.id}, {"reason", r.reason}}.dump()
        << '\n';
  }
}

std::size_t count_whitespace_tokens(std::string_view text) {
  return text::whitespace_token_count(text);
}

const TimeSlice* SlicePlan::find(std::string_view label) const {
  for (const auto& s : slices) {
    if (s.label == label) return &s;
  }
  return nullptr;
}

std::vector<std::string> SlicePlan::labels() const {
  std::vector<std::string> out;
  for (const auto& s : slices) out.push_back(s.label);
  return out;
}

std::vector<std::string> SlicePlan::documents_in(std::string_view label) const {
  std::vector<std::string> ids;
  for (const auto& [id, slice] : assignment) {
    if (slice == label) ids.push_back(id);
  }
  return ids;  // std::map iteration is already sorted
}

SlicePlan plan_slices(const CorpusStore& store, const SlicePlanRequest& request) {
  if (request.n_slices == 0) throw InvalidArgument("n_slices must be >= 1");
  if (store.empty()) throw InvalidArgument("cannot plan slices over an empty store");
  const YearRange range = request.range;
  if (range.first > range.last) throw InvalidArgument("year range is empty");
  const auto n_years = static_cast<std::size_t>(range.last - range.first + 1);
  if (request.n_slices > n_years) {
    throw InvalidArgument("more slices than years in the range");
  }

  std::vector<std::uint64_t> per_year(n_years, 0);
  for (const auto& doc : store.documents()) {
    if (!range.contains(doc.year)) continue;
    per_year[static_cast<std::size_t>(doc.year - range.first)] += request.token_counter(doc.text);
  }

  const std::uint64_t need = request.budgets.total();
  SlicePlan plan;
  int start = range.first;
  for (std::size_t i = 0; i < request.n_slices; ++i) {
    const bool last = i + 1 == request.n_slices;
    // Leave at least one year for every slice still to come.
    const int max_boundary =
        range.last + 1 - static_cast<int>(request.n_slices - 1 - i);
    std::uint64_t acc = 0;
    int boundary = start;
    if (last) {
      for (int y = start; y <= range.last; ++y) acc += per_year[static_cast<std::size_t>(y - range.first)];
      boundary = range.last + 1;
    } else {
      while (boundary < max_boundary && acc < need) {
        acc += per_year[static_cast<std::size_t>(boundary - range.first)];
        ++boundary;
      }
      // A slice always spans at least one year.
      if (boundary == start) {
        acc += per_year[static_cast<std::size_t>(start - range.first)];
        ++boundary;
      }
    }
    TimeSlice slice;
    slice.start_year = start;
    slice.end_year = boundary - 1;
    slice.label = std::to_string(start) + "-" + std::to_string(last ? range.last : boundary);
    slice.train_budget = request.budgets.train;
    slice.val_budget = request.budgets.val;
    slice.test_budget = request.budgets.test;
    if (acc < need) {
      plan.feasible = false;
      plan.shortfalls.push_back({slice.label, acc, need});
    }
    plan.slice_tokens[slice.label] = acc;
    plan.slices.push_back(std::move(slice));
    start = boundary;
  }

  for (const auto& doc : store.documents()) {
    bool placed = false;
    for (const auto& slice : plan.slices) {
      if (slice.contains(doc.year)) {
        plan.assignment[doc.id] = slice.label;
        placed = true;
        break;
      }
    }
    if (!placed) plan.unassigned.push_back(doc.id);
  }
  std::sort(plan.unassigned.begin(), plan.unassigned.end());
  return plan;
}

std::vector<int> slice_boundaries(const SlicePlan& plan) {
  std::vector<int> out;
  for (std::size_t i = 0; i + 1 < plan.slices.size(); ++i) {
    out.push_back(plan.slices[i].end_year + 1);
  }
  return out;
}

SplitResult split_slice(const CorpusStore& store, const SlicePlan& plan,
                        std::string_view label, std::uint64_t seed,
                        const TokenCounter& counter) {
  const TimeSlice* slice = plan.find(label);
  if (slice == nullptr) throw InvalidArgument("no slice labelled '" + std::string(label) + "'");

  std::vector<std::string> ids = plan.documents_in(label);
  std::vector<std::uint64_t> tokens(ids.size());
  std::uint64_t available = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    tokens[i] = counter(store.at(ids[i]).text);
    available += tokens[i];
  }
  const std::uint64_t reserved = slice->val_budget + slice->test_budget;
  SplitResult result;
  if (available < reserved) {
    result.shortfall = SliceShortfall{slice->label, available, reserved};
    return result;
  }

  // Fisher-Yates on raw engine output: std::shuffle's draws are
  // implementation-defined, and splits must be identical across toolchains.
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }

  SplitSet split;
  split.slice = slice->label;
  split.seed = seed;
  for (std::size_t idx : order) {
    if (split.test_tokens < slice->test_budget) {
      split.test.push_back(ids[idx]);
      split.test_tokens += tokens[idx];
    } else if (split.val_tokens < slice->val_budget) {
      split.val.push_back(ids[idx]);
      split.val_tokens += tokens[idx];
    } else {
      split.train.push_back(ids[idx]);
      split.train_tokens += tokens[idx];
    }
  }
  result.split = std::move(split);
  return result;
}

std::uint64_t WordCounts::total() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& [word, n] : counts) sum += n;
  return sum;
}

std::uint64_t WordCounts::count(std::string_view word) const {
  auto it = counts.find(std::string(word));
  return it == counts.end() ? 0 : it->second;
}

WordCounts& WordCounts::operator+=(const WordCounts& other) {
  for (const auto& [word, n] : other.counts) counts[word] += n;
  return *this;
}

WordCounts word_counts_of_texts(std::span<const std::string> texts, std::string source) {
  WordCounts wc;
  wc.source = std::move(source);
  wc.word_rule = std::string(text::kWordRule);
  for (const auto& t : texts) {
    for (auto& w : text::words(t)) ++wc.counts[std::move(w)];
  }
  return wc;
}

WordCounts word_counts(const CorpusStore& store, std::span<const std::string> ids,
                       std::string source) {
  WordCounts wc;
  wc.source = std::move(source);
  wc.word_rule = std::string(text::kWordRule);
  for (const auto& id : ids) {
    for (auto& w : text::words(store.at(id).text)) ++wc.counts[std::move(w)];
  }
  return wc;
}

FilterResult filter_in_vocab(std::span<const FilterItem> items,
                             std::span<const WordCounts> vocabularies,
                             std::uint64_t min_count) {
  if (vocabularies.empty()) throw InvalidArgument("filter_in_vocab needs at least one vocabulary");
  FilterResult result;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& group = result.by_group[items[i].group];
    ++group.total;
    bool keep = true;
    if (min_count > 0) {
      for (const auto& word : text::words(items[i].text)) {
        for (const auto& vocab : vocabularies) {
          if (vocab.count(word) < min_count) {
            keep = false;
            break;
          }
        }
        if (!keep) break;
      }
    }
    if (keep) {
      ++group.retained;
      result.retained.push_back(i);
    }
  }
  return result;
}

std::string to_json(const SlicePlan& plan) {
  json j;
  j["feasible"] = plan.feasible;
  j["slices"] = json::array();
  for (const auto& s : plan.slices) {
    j["slices"].push_back({{"label", s.label},
                           {"start_year", s.start_year},
                           {"end_year", s.end_year},
                           {"train_budget", s.train_budget},
                           {"val_budget", s.val_budget},
                           {"test_budget", s.test_budget},
                           {"tokens", plan.slice_tokens.count(s.label) ? plan.slice_tokens.at(s.label) : 0}});
  }
  j["shortfalls"] = json::array();
  for (const auto& s : plan.shortfalls) {
    j["shortfalls"].push_back({{"label", s.label}, {"available", s.available}, {"required", s.required}});
  }
  j["assignment"] = plan.assignment;
  j["unassigned"] = plan.unassigned;
  return j.dump(2);
}

SlicePlan slice_plan_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    SlicePlan plan;
    plan.feasible = j.at("feasible").get<bool>();
    for (const auto& s : j.at("slices")) {
      TimeSlice slice;
      slice.label = s.at("label").get<std::string>();
      slice.start_year = s.at("start_year").get<int>();
      slice.end_year = s.at("end_year").get<int>();
      slice.train_budget = s.at("train_budget").get<std::uint64_t>();
      slice.val_budget = s.at("val_budget").get<std::uint64_t>();
      slice.test_budget = s.at("test_budget").get<std::uint64_t>();
      plan.slice_tokens[slice.label] = s.value("tokens", std::uint64_t{0});
      plan.slices.push_back(std::move(slice));
    }
    for (const auto& s : j.at("shortfalls")) {
      plan.shortfalls.push_back({s.at("label").get<std::string>(),
                                 s.at("available").get<std::uint64_t>(),
                                 s.at("required").get<std::uint64_t>()});
    }
    plan.assignment = j.at("assignment").get<std::map<std::string, std::string>>();
    plan.unassigned = j.at("unassigned").get<std::vector<std::string>>();
    return plan;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad slice plan: ") + e.what());
  }
}

std::string to_json(const SplitSet& split) {
  json j = {{"slice", split.slice},
            {"seed", split.seed},
            {"train", split.train},
            {"val", split.val},
            {"test", split.test},
            {"train_tokens", split.train_tokens},
            {"val_tokens", split.val_tokens},
            {"test_tokens", split.test_tokens}};
  return j.dump(2);
}

SplitSet split_set_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    SplitSet s;
    s.slice = j.at("slice").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.val = j.at("val").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    s.train_tokens = j.at("train_tokens").get<std::uint64_t>();
    s.val_tokens = j.at("val_tokens").get<std::uint64_t>();
    s.test_tokens = j.at("test_tokens").get<std::uint64_t>();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad split set: ") + e.what());
  }
}

std::string to_json(const WordCounts& counts) {
  json j = {{"source", counts.source}, {"word_rule", counts.word_rule}, {"counts", counts.counts}};
  return j.dump();
}

WordCounts word_counts_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    WordCounts wc;
    wc.source = j.at("source").get<std::string>();
    wc.word_rule = j.at("word_rule").get<std::string>();
    wc.counts = j.at("counts").get<std::map<std::string, std::uint64_t>>();
    return wc;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad word counts: ") + e.what());
  }
}

}  // namespace chronolm
