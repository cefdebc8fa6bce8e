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

#include "chronolm/decoding.hpp"
#include "chronolm/synthetic.hpp"

namespace chronolm {
namespace {

struct Setup {
  BpeTokenizer tokenizer;
  Transformer model;
};

const Setup& setup() {
  static const Setup s = [] {
    SyntheticConfig c;
    c.tokens_per_slice = 20000;
    std::vector<std::string> texts;
    for (const auto& d : generate_synthetic(c).documents) texts.push_back(d.text);
    BpeTrainOptions o;
    o.vocab_size = 1024;
    auto tok = BpeTokenizer::train(texts, o);
    ModelConfig mc;
    mc.vocab_size = tok.vocab_size();
    mc.context_length = 64;
    return Setup{std::move(tok), Transformer(mc)};
  }();
  return s;
}

void BM_TopKSingleWords(benchmark::State& state) {
  const auto& s = setup();
  DecodeOptions o;
  o.k = static_cast<std::size_t>(state.range(0));
  o.max_word_tokens = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(top_k_single_words(s.model, s.tokenizer, "the old man walked along the", o));
  }
}
BENCHMARK(BM_TopKSingleWords)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace chronolm
