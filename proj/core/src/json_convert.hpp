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

// nlohmann/json bindings for config structs; private to the library.

#include "chronolm/model.hpp"
#include "json.hpp"

namespace chronolm {

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
                     {"n_kv_heads", c.n_kv_heads}, {"d_model", c.d_model},
                     {"d_ff", c.d_ff},             {"vocab_size", c.vocab_size},
                     {"context_length", c.context_length}, {"rope_theta", c.rope_theta},
                     {"norm_eps", c.norm_eps},     {"init_std", c.init_std},
                     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  const ModelConfig d;
  c.n_layers = j.value("n_layers", d.n_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.n_kv_heads = j.value("n_kv_heads", d.n_kv_heads);
  c.d_model = j.value("d_model", d.d_model);
  c.d_ff = j.value("d_ff", d.d_ff);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.context_length = j.value("context_length", d.context_length);
  c.rope_theta = j.value("rope_theta", d.rope_theta);
  c.norm_eps = j.value("norm_eps", d.norm_eps);
  c.init_std = j.value("init_std", d.init_std);
  c.seed = j.value("seed", d.seed);
}

}  // namespace chronolm
