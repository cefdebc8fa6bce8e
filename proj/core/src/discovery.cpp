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

#include "chronolm/discovery.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "chronolm/scoring.hpp"
#include "chronolm/text.hpp"

namespace chronolm {
namespace {

double aggregate(std::vector<double> v, Aggregate how) {
  if (how == Aggregate::kMean) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t utf8_floor(std::string_view s, std::size_t i) {
  while (i > 0 && i < s.size() && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80) --i;
  return i;
}

}  // namespace

SurprisalTable SurprisalTable::compute(std::span<const BatteryMember> battery,
                                       std::span<const SampleSentence> sample) {
  if (battery.empty()) throw InvalidArgument("discovery needs at least one model");
  SurprisalTable t;
  for (const auto& m : battery) {
    if (m.model == nullptr || m.tokenizer == nullptr) throw InvalidArgument("incomplete battery member " + m.id);
    t.labels_.push_back(m.id);
  }
  for (const auto& s : sample) {
    if (!t.sentences_.emplace(s.id, s.text).second) throw InvalidArgument("duplicate sentence id " + s.id);
  }
  // Iterate in id order so accumulation order never depends on the sample's order.
  for (const auto& [id, sentence] : t.sentences_) {
    const auto spans = text::word_spans(sentence);
    if (spans.empty()) continue;
    std::vector<std::vector<double>> raw;
    for (const auto& m : battery) {
      std::vector<double> row;
      for (const auto& w : per_word_surprisal(*m.model, *m.tokenizer, sentence)) row.push_back(w.value);
      raw.push_back(std::move(row));
    }
    std::vector<std::vector<double>> norm;
    for (const auto& row : raw) norm.push_back(min_max_normalize(row));
    for (std::size_t w = 0; w < spans.size(); ++w) {
      Occurrence o{id, w, spans[w].begin, spans[w].end, {}, {}};
      for (std::size_t m = 0; m < battery.size(); ++m) {
        o.raw.push_back(raw[m][w]);
        o.normalized.push_back(norm[m][w]);
      }
      const std::string word =
          text::to_lower(std::string_view(sentence).substr(spans[w].begin, spans[w].end - spans[w].begin));
      t.words_[word].push_back(std::move(o));
    }
  }
  return t;
}

std::size_t SurprisalTable::label_index(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw InvalidArgument("baseline slice " + label + " is not in the battery");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<TrajectoryRecord> trajectories(const SurprisalTable& table, const std::string& baseline,
                                           const DiscoveryOptions& o) {
  const std::size_t base = table.label_index(baseline);
  const std::size_t n_models = table.labels().size();
  std::vector<TrajectoryRecord> out;
  for (const auto& [word, occ] : table.words()) {
    if (occ.size() < std::max<std::size_t>(o.min_occurrences, 1)) continue;
    TrajectoryRecord r;
    r.word = word;
    r.occurrences = occ.size();
    for (std::size_t m = 0; m < n_models; ++m) {
      std::vector<double> v;
      v.reserve(occ.size());
      for (const auto& x : occ) v.push_back(o.raw_values ? x.raw[m] : x.normalized[m]);
      r.values.push_back(aggregate(std::move(v), o.aggregate));
    }
    for (std::size_t m = 0; m < n_models; ++m) {
      r.deltas.push_back(m == base ? 0.0 : r.values[m] - r.values[base]);
    }
    r.monotone_decreasing = n_models >= 2;
    for (std::size_t m = 0; m + 1 < n_models; ++m) {
      if (!(r.deltas[m + 1] < r.deltas[m] + o.slack)) r.monotone_decreasing = false;
    }
    r.first_last_change = r.deltas.front() - r.deltas.back();
    for (double d : r.deltas) r.cumulative += std::max(d, 0.0);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrajectoryRecord> trajectory_candidates(const SurprisalTable& table,
                                                    const std::string& baseline,
                                                    const DiscoveryOptions& options) {
  auto all = trajectories(table, baseline, options);
  std::vector<TrajectoryRecord> out;
  for (auto& r : all) {
    if (r.monotone_decreasing) out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
    return a.first_last_change > b.first_last_change;
  });
  if (out.size() > options.top_n) out.resize(options.top_n);
  return out;
}

std::vector<TrajectoryRecord> cumulative_divergence(const SurprisalTable& table,
                                                    const std::string& baseline,
                                                    const DiscoveryOptions& options) {
  auto out = trajectories(table, baseline, options);
  std::stable_sort(out.begin(), out.end(), [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
    if (a.cumulative != b.cumulative) return a.cumulative > b.cumulative;
    return a.occurrences > b.occurrences;
  });
  if (out.size() > options.top_n) out.resize(options.top_n);
  return out;
}

OccurrenceTable occurrence_trajectories(const SurprisalTable& table, const std::string& word,
                                        bool raw_values, std::size_t context_bytes) {
  OccurrenceTable t;
  t.word = text::to_lower(word);
  t.labels = table.labels();
  const auto it = table.words().find(t.word);
  if (it == table.words().end()) {
    t.notes.push_back("word " + t.word + " does not occur in the sample");
    return t;
  }
  for (const auto& o : it->second) {
    const std::string& s = table.sentences().at(o.sentence_id);
    const std::size_t b = utf8_floor(s, o.begin > context_bytes ? o.begin - context_bytes : 0);
    const std::size_t e = utf8_floor(s, std::min(s.size(), o.end + context_bytes));
    t.rows.push_back({o.sentence_id, o.word_index, raw_values ? o.raw : o.normalized,
                      s.substr(b, e - b), std::string()});
  }
  return t;
}

std::string OccurrenceTable::to_csv() const {
  std::ostringstream os;
  os << "word,sentence_id,word_index";
  for (const auto& l : labels) os << ',' << text::csv_field(l);
  os << ",context,sense_label\n";
  for (const auto& r : rows) {
    os << text::csv_field(word) << ',' << text::csv_field(r.sentence_id) << ',' << r.word_index;
    for (double v : r.values) os << ',' << text::format_number(v);
    os << ',' << text::csv_field(r.context) << ',' << text::csv_field(r.sense_label) << '\n';
  }
  return os.str();
}

std::string trajectories_csv(std::span<const TrajectoryRecord> records,
                             std::span<const std::string> labels) {
  std::ostringstream os;
  os << "word,occurrences,monotone,first_last_change,cumulative";
  for (const auto& l : labels) os << ",delta_" << text::csv_field(l);
  os << '\n';
  for (const auto& r : records) {
    os << text::csv_field(r.word) << ',' << r.occurrences << ',' << (r.monotone_decreasing ? 1 : 0) << ','
       << text::format_number(r.first_last_change) << ',' << text::format_number(r.cumulative);
    for (double d : r.deltas) os << ',' << text::format_number(d);
    os << '\n';
  }
  return os.str();
}

}  // namespace chronolm
