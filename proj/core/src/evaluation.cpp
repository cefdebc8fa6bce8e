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

#include "chronolm/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "chronolm/scoring.hpp"
#include "chronolm/text.hpp"

namespace chronolm {
namespace {

using nlohmann::json;

json parse_object(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("record is not an object");
  return j;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

const ClozeTask& task_of(const std::unordered_map<std::string, const ClozeTask*>& index,
                         const std::string& id) {
  auto it = index.find(id);
  if (it == index.end()) throw InvalidArgument("ranking refers to unknown task " + id);
  return *it->second;
}

std::unordered_map<std::string, const ClozeTask*> index_tasks(std::span<const ClozeTask> tasks) {
  std::unordered_map<std::string, const ClozeTask*> index;
  for (const auto& t : tasks) index.emplace(t.id, &t);
  return index;
}

}  // namespace

SenseRecord parse_sense_record(std::string_view json_line) {
  const json j = parse_object(json_line);
  SenseRecord r;
  if (!j.contains("word") || !j["word"].is_string()) throw FormatError("sense record lacks a word");
  r.word = j["word"].get<std::string>();
  if (j.contains("sense_id") && j["sense_id"].is_string()) r.sense_id = j["sense_id"].get<std::string>();
  if (r.sense_id.empty()) r.sense_id = r.word;
  if (j.contains("year")) {
    const auto& y = j["year"];
    if (y.is_number_integer()) {
      r.year = y.get<int>();
    } else if (y.is_string()) {
      try {
        std::size_t used = 0;
        const std::string s = y.get<std::string>();
        const int v = std::stoi(s, &used);
        if (used == s.size()) r.year = v;
      } catch (const std::exception&) {
      }
    }
  }
  if (j.contains("definition") && j["definition"].is_string()) r.definition = j["definition"].get<std::string>();
  if (j.contains("examples")) {
    const auto& e = j["examples"];
    if (e.is_string()) {
      r.examples.push_back(e.get<std::string>());
    } else if (e.is_array()) {
      for (const auto& x : e) {
        if (x.is_string()) r.examples.push_back(x.get<std::string>());
      }
    }
  }
  if (j.contains("frequency") && j["frequency"].is_number()) r.frequency_per_million = j["frequency"].get<double>();
  return r;
}

std::string to_json_line(const SenseRecord& r) {
  json j;
  j["word"] = r.word;
  j["sense_id"] = r.sense_id;
  if (r.year) j["year"] = *r.year;
  j["definition"] = r.definition;
  j["examples"] = r.examples;
  if (r.frequency_per_million) j["frequency"] = *r.frequency_per_million;
  return j.dump();
}

std::vector<SenseRecord> read_sense_inventory(const std::filesystem::path& path) {
  std::vector<SenseRecord> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_sense_record(line));
  return out;
}

std::size_t char_offset(std::string_view text, std::size_t byte_offset) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < byte_offset && i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) ++n;
  }
  return n;
}

ClozeBuildResult build_cloze_set(std::span<const SenseRecord> records,
                                 std::span<const WordCounts> vocabularies,
                                 const ClozeBuildOptions& o) {
  if (!(o.tail_fraction >= 0.0 && o.tail_fraction <= 1.0)) {
    throw InvalidArgument("tail_fraction must lie in [0, 1]");
  }
  ClozeBuildResult result;
  std::vector<ClozeTask> candidates;
  for (const auto& r : records) {
    if (!r.year) {
      result.skipped.push_back({r.sense_id, "missing sense year"});
      continue;
    }
    if (r.examples.empty()) {
      result.skipped.push_back({r.sense_id, "no example sentence"});
      continue;
    }
    if (!r.frequency_per_million) {
      result.skipped.push_back({r.sense_id, "missing frequency"});
      continue;
    }
    const double f = *r.frequency_per_million;
    if (f < o.min_frequency || f > o.max_frequency) {
      result.skipped.push_back({r.sense_id, "frequency outside band"});
      continue;
    }
    const std::string target = text::to_lower(r.word);
    for (std::size_t i = 0; i < r.examples.size(); ++i) {
      const std::string id = r.sense_id + "#" + std::to_string(i);
      const std::string sentence(text::trim(r.examples[i]));
      const auto spans = text::word_spans(sentence);
      if (spans.empty()) {
        result.skipped.push_back({id, "example has no words"});
        continue;
      }
      const auto& last = spans.back();
      if (text::to_lower(std::string_view(sentence).substr(last.begin, last.end - last.begin)) != target) {
        result.skipped.push_back({id, "target is not the final word"});
        continue;
      }
      const double length = static_cast<double>(char_offset(sentence, sentence.size()));
      const double position = static_cast<double>(char_offset(sentence, last.begin));
      if (position < (1.0 - o.tail_fraction) * length) {
        result.skipped.push_back({id, "target starts before the tail"});
        continue;
      }
      if (last.begin == 0 || text::trim(std::string_view(sentence).substr(0, last.begin)).empty()) {
        result.skipped.push_back({id, "empty prefix"});
        continue;
      }
      std::optional<std::string> definition;
      if (!r.definition.empty()) definition = r.definition;
      candidates.push_back({id, r.sense_id, sentence, sentence.substr(0, last.begin), target, *r.year,
                            f, definition});
    }
  }
  result.candidates = candidates.size();
  if (vocabularies.empty()) {
    result.tasks = std::move(candidates);
    return result;
  }
  std::vector<FilterItem> items;
  items.reserve(candidates.size());
  for (const auto& c : candidates) items.push_back({c.target, c.sentence});
  result.filter = filter_in_vocab(items, vocabularies, o.min_count);
  result.vocabulary_filter_applied = true;
  std::size_t next = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (next < result.filter.retained.size() && result.filter.retained[next] == i) {
      result.tasks.push_back(std::move(candidates[i]));
      ++next;
    } else {
      result.skipped.push_back({candidates[i].id, "word below min_count in a vocabulary"});
    }
  }
  return result;
}

std::size_t rank_of(const DecodeResult& result, std::string_view target, std::size_t k) {
  const std::string t = text::to_lower(target);
  for (const auto& c : result.completions) {
    if (c.rank < k && text::to_lower(c.word) == t) return c.rank;
  }
  return k + 1;
}

RankResult rank_cloze(std::span<const BatteryMember> battery, std::span<const ClozeTask> tasks,
                      const DecodeOptions& options) {
  RankResult out;
  for (const auto& m : battery) {
    if (m.model == nullptr || m.tokenizer == nullptr) throw InvalidArgument("incomplete battery member " + m.id);
    for (const auto& t : tasks) {
      try {
        const auto r = top_k_single_words(*m.model, *m.tokenizer, t.prefix, options);
        out.rankings.push_back({t.id, m.id, rank_of(r, t.target, options.k), options.k});
      } catch (const Error& e) {
        out.failures.push_back({t.id, m.id, e.what()});
      }
    }
  }
  return out;
}

LeakageReport leakage_report(std::span<const ClozeRanking> rankings, std::span<const ClozeTask> tasks,
                             int cutoff_year, std::size_t k) {
  const auto index = index_tasks(tasks);
  LeakageReport r;
  r.cutoff_year = cutoff_year;
  r.k = k;
  for (const auto& rk : rankings) {
    if (r.model_id.empty()) r.model_id = rk.model_id;
    if (rk.model_id != r.model_id) throw InvalidArgument("leakage_report expects rankings of one model");
    const ClozeTask& t = task_of(index, rk.task_id);
    const bool hit = rk.rank + 1 <= k;
    if (t.sense_year <= cutoff_year) {
      ++r.n_true;
      r.hits_true += hit;
    } else {
      ++r.n_future;
      r.hits_future += hit;
    }
  }
  if (r.n_true > 0) r.recall = static_cast<double>(r.hits_true) / static_cast<double>(r.n_true);
  if (r.n_future > 0) r.leakage = static_cast<double>(r.hits_future) / static_cast<double>(r.n_future);
  if (r.recall && *r.recall > 0.0 && r.leakage) r.rnl = *r.leakage / *r.recall;
  return r;
}

double reciprocal_rank(const ClozeRanking& r) {
  return r.hit() ? 1.0 / static_cast<double>(r.rank + 1) : 0.0;
}

double mrr(std::span<const ClozeRanking> rankings) {
  if (rankings.empty()) throw InvalidArgument("mrr needs at least one ranking");
  double s = 0.0;
  for (const auto& r : rankings) s += reciprocal_rank(r);
  return s / static_cast<double>(rankings.size());
}

GroupedAccuracy grouped_accuracy(std::span<const ClozeRanking> rankings,
                                 std::span<const ClozeTask> tasks,
                                 std::span<const TimeSlice> groups) {
  const auto index = index_tasks(tasks);
  std::vector<GroupAccuracy> all(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) all[g].label = groups[g].label;
  GroupedAccuracy out;
  for (const auto& rk : rankings) {
    const ClozeTask& t = task_of(index, rk.task_id);
    bool placed = false;
    for (std::size_t g = 0; g < groups.size() && !placed; ++g) {
      if (groups[g].contains(t.sense_year)) {
        ++all[g].n;
        all[g].hits += rk.hit();
        placed = true;
      }
    }
    if (!placed) ++out.ungrouped;
  }
  for (auto& g : all) {
    if (g.n == 0) {
      out.notes.push_back("group " + g.label + " has no tasks");
      continue;
    }
    g.accuracy = static_cast<double>(g.hits) / static_cast<double>(g.n);
    out.groups.push_back(std::move(g));
  }
  return out;
}

MinimalPair parse_minimal_pair(std::string_view json_line) {
  const json j = parse_object(json_line);
  MinimalPair p;
  const auto field = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_string()) throw FormatError(std::string("minimal pair lacks ") + name);
    return j[name].get<std::string>();
  };
  p.good = field("good");
  p.bad = field("bad");
  if (j.contains("subtask") && j["subtask"].is_string()) p.subtask = j["subtask"].get<std::string>();
  if (p.good.empty() || p.bad.empty()) throw FormatError("minimal pair has an empty sentence");
  return p;
}

std::vector<MinimalPair> read_minimal_pairs(const std::filesystem::path& path) {
  std::vector<MinimalPair> out;
  for (const auto& line : read_lines(path)) out.push_back(parse_minimal_pair(line));
  return out;
}

double sentence_log_prob(const LanguageModel& model, const BpeTokenizer& tokenizer,
                         std::string_view sentence, bool per_token) {
  std::vector<TokenId> ids{tokenizer.bos()};
  const auto enc = tokenizer.encode(sentence);
  if (enc.empty()) throw InvalidArgument("sentence is empty after tokenization");
  ids.insert(ids.end(), enc.begin(), enc.end());
  double s = 0.0;
  for (double v : windowed_nll(model, ids)) s -= v;
  return per_token ? s / static_cast<double>(enc.size()) : s;
}

PairAccuracy minimal_pair_accuracy(const LanguageModel& model, const BpeTokenizer& tokenizer,
                                   std::span<const MinimalPair> pairs, bool per_token) {
  PairAccuracy out;
  for (const auto& p : pairs) {
    const bool ok = sentence_log_prob(model, tokenizer, p.good, per_token) >
                    sentence_log_prob(model, tokenizer, p.bad, per_token);
    ++out.overall.n;
    out.overall.correct += ok;
    auto& sub = out.by_subtask[p.subtask];
    ++sub.n;
    sub.correct += ok;
  }
  const auto finish = [](PairTally& t) {
    if (t.n > 0) t.accuracy = static_cast<double>(t.correct) / static_cast<double>(t.n);
  };
  finish(out.overall);
  for (auto& [name, t] : out.by_subtask) finish(t);
  return out;
}

std::string PerplexityMatrix::to_csv() const {
  std::ostringstream os;
  os << "model,test_set,perplexity\n";
  for (std::size_t i = 0; i < row_labels.size(); ++i) {
    for (std::size_t j = 0; j < col_labels.size(); ++j) {
      os << row_labels[i] << ',' << col_labels[j] << ',' << text::format_number(values[i][j]) << '\n';
    }
  }
  return os.str();
}

PerplexityMatrix cross_time_matrix(std::span<const BatteryMember> battery,
                                   std::span<const TestSet> test_sets, std::size_t stride) {
  PerplexityMatrix m;
  for (const auto& t : test_sets) m.col_labels.push_back(t.label);
  for (const auto& b : battery) {
    if (std::find(m.col_labels.begin(), m.col_labels.end(), b.id) == m.col_labels.end()) {
      throw InvalidArgument("no test set for slice " + b.id);
    }
    if (b.model == nullptr || b.tokenizer == nullptr) throw InvalidArgument("incomplete battery member " + b.id);
  }
  for (const auto& b : battery) {
    m.row_labels.push_back(b.id);
    auto& row = m.values.emplace_back();
    for (const auto& t : test_sets) row.push_back(perplexity(*b.model, *b.tokenizer, t.texts, stride).perplexity);
  }
  return m;
}

}  // namespace chronolm
