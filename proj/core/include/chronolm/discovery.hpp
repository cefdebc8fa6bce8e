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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "chronolm/evaluation.hpp"

namespace chronolm {

struct SampleSentence {
  std::string id;
  std::string text;
};

struct Occurrence {
  std::string sentence_id;
  std::size_t word_index = 0;
  std::size_t begin = 0;  // byte span of the word in its sentence
  std::size_t end = 0;
  std::vector<double> raw;         // per model, battery order
  std::vector<double> normalized;  // per model, row-normalized within the sentence
};

/// Per-word surprisal of every word occurrence in a sample under every
/// model of a battery; the shared input of the discovery operations.
class SurprisalTable {
 public:
  static SurprisalTable compute(std::span<const BatteryMember> battery,
                                std::span<const SampleSentence> sample);

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  /// Occurrences sorted by (sentence id, word index).
  const std::map<std::string, std::vector<Occurrence>>& words() const noexcept { return words_; }
  const std::map<std::string, std::string>& sentences() const noexcept { return sentences_; }
  std::size_t label_index(const std::string& label) const;

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::vector<Occurrence>> words_;
  std::map<std::string, std::string> sentences_;
};

enum class Aggregate { kMean, kMedian };

struct DiscoveryOptions {
  std::size_t min_occurrences = 5;
  std::size_t top_n = 50;
  /// Tolerance for "decreasing": d[i+1] < d[i] + slack.
  double slack = 0.0;
  Aggregate aggregate = Aggregate::kMean;
  /// Use raw per-word NLL instead of row-normalized values.
  bool raw_values = false;
};

struct TrajectoryRecord {
  std::string word;
  std::vector<double> values;  // aggregated surprisal per model
  std::vector<double> deltas;  // values[i] - values[baseline]
  std::size_t occurrences = 0;
  bool monotone_decreasing = false;
  double first_last_change = 0.0;  // deltas.front() - deltas.back()
  double cumulative = 0.0;         // sum of max(delta, 0)
};

/// Records for every word with at least min_occurrences, in word order.
std::vector<TrajectoryRecord> trajectories(const SurprisalTable& table, const std::string& baseline,
                                           const DiscoveryOptions& options);

/// Monotone-decreasing words ranked by first_last_change, best first.
std::vector<TrajectoryRecord> trajectory_candidates(const SurprisalTable& table,
                                                    const std::string& baseline,
                                                    const DiscoveryOptions& options);

/// Words ranked by cumulative positive delta; ties by occurrence count.
std::vector<TrajectoryRecord> cumulative_divergence(const SurprisalTable& table,
                                                    const std::string& baseline,
                                                    const DiscoveryOptions& options);

struct OccurrenceRow {
  std::string sentence_id;
  std::size_t word_index = 0;
  std::vector<double> values;
  std::string context;
  std::string sense_label;  // left empty for manual annotation
};

struct OccurrenceTable {
  std::string word;
  std::vector<std::string> labels;
  std::vector<OccurrenceRow> rows;
  std::vector<std::string> notes;

  std::string to_csv() const;
};

OccurrenceTable occurrence_trajectories(const SurprisalTable& table, const std::string& word,
                                        bool raw_values = false, std::size_t context_bytes = 40);

/// word,occurrences,monotone,first_last_change,cumulative,delta[label]...
std::string trajectories_csv(std::span<const TrajectoryRecord> records,
                             std::span<const std::string> labels);

}  // namespace chronolm
