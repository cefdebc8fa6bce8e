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
#include <string>
#include <vector>

#include "chronolm/corpus.hpp"
#include "chronolm/evaluation.hpp"

namespace chronolm {

/// Parameters of a templated corpus whose content vocabulary drifts over
/// time. Each slice draws its nouns, verbs and adjectives from a window that
/// slides across a larger pool; a stable lexicon and the function words are
/// shared by every slice.
struct SyntheticConfig {
  std::uint64_t seed = 0;
  int first_year = 1800;
  std::size_t n_slices = 3;
  int years_per_slice = 50;
  std::size_t tokens_per_slice = 200000;  // whitespace tokens
  std::size_t doc_sentences = 16;

  std::size_t noun_window = 200;
  std::size_t noun_shift = 100;
  std::size_t verb_window = 60;
  std::size_t verb_shift = 30;
  std::size_t adj_window = 40;
  std::size_t adj_shift = 20;
  double stable_share = 0.3;  // chance a content slot uses the stable lexicon

  /// Collocations "cue cue target" present in every slice.
  std::size_t n_past_senses = 8;
  /// Targets that occur everywhere as predicates but whose collocation
  /// appears only in later slices.
  std::size_t n_future_senses = 8;
  /// Per-slice probability that a future cue is followed by its target;
  /// missing trailing entries are 0.
  std::vector<double> future_rate = {0.0, 0.15, 0.7};
  std::size_t examples_per_sense = 2;
  std::size_t pairs_per_subtask = 50;
};

struct SyntheticCorpus {
  std::vector<Document> documents;
  std::vector<SenseRecord> senses;
  std::vector<MinimalPair> pairs;
  std::vector<std::string> past_targets;
  std::vector<std::string> future_targets;
  std::vector<int> past_years;    // sense year per past target
  std::vector<int> future_years;  // sense year per future target
  std::vector<YearRange> slice_years;
  std::vector<std::uint64_t> slice_tokens;  // whitespace tokens per slice
  int cutoff_year = 0;                      // last year of the first slice
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& config);

/// Writes corpus.jsonl, senses.jsonl and pairs.jsonl into dir.
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace chronolm
