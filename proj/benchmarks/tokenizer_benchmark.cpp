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


#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "chronolm/synthetic.hpp"
#include "chronolm/tokenizer.hpp"

namespace chronolm {
namespace {

std::vector<std::string> corpus_texts() {
  SyntheticConfig c;
  c.tokens_per_slice = 20000;
  std::vector<std::string> texts;
  for (const auto& d : generate_synthetic(c).documents) texts.push_back(d.text);
  return texts;
}

void BM_BpeTrain(benchmark::State& state) {
  const auto texts = corpus_texts();
  BpeTrainOptions o;
  o.vocab_size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(BpeTokenizer::train(texts, o));
}
BENCHMARK(BM_BpeTrain)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_BpeEncode(benchmark::State& state) {
  const auto texts = corpus_texts();
  BpeTrainOptions o;
  o.vocab_size = 1024;
  const auto tok = BpeTokenizer::train(texts, o);
  std::size_t bytes = 0;
  for (auto _ : state) {
    for (const auto& t : texts) {
      benchmark::DoNotOptimize(tok.encode(t));
      bytes += t.size();
    }
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_BpeEncode)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace chronolm

BENCHMARK_MAIN();
