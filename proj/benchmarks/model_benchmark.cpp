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

#include <random>
#include <vector>

#include "chronolm/model.hpp"
#include "chronolm/training.hpp"

namespace chronolm {
namespace {

ModelConfig bench_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 4;
  c.n_kv_heads = 2;
  c.d_model = 64;
  c.d_ff = 128;
  c.vocab_size = 1024;
  c.context_length = 64;
  return c;
}

std::vector<TokenId> random_tokens(std::size_t n) {
  std::mt19937_64 rng(1);
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng() % 1024);
  return t;
}

void BM_Forward(benchmark::State& state) {
  const Transformer m(bench_config());
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto tokens = random_tokens(batch * 64);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(tokens, batch));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * tokens.size()));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_TrainingStepGradient(benchmark::State& state) {
  const Transformer m(bench_config());
  const auto tokens = random_tokens(32 * 64);
  TransformerWeights grads = TransformerWeights::zeros(m.config());
  for (auto _ : state) {
    grads.set_zero();
    benchmark::DoNotOptimize(lm_loss(m, tokens, 32, &grads));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * tokens.size()));
}
BENCHMARK(BM_TrainingStepGradient)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace chronolm
