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

#include <malloc.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "chronolm/checkpoint.hpp"
#include "chronolm/decoding.hpp"
#include "chronolm/pipeline.hpp"
#include "chronolm/synthetic.hpp"

namespace {

namespace fs = std::filesystem;
using namespace chronolm;

int cmd_run(const std::string& stage, const fs::path& config_path, const std::optional<std::string>& slice) {
  const auto v = validate_config(config_path);
  if (!v.ok()) throw ValidationError(v.diagnostics);
  Pipeline p(*v.config);
  for (const auto& o : p.run(stage, slice)) {
    std::string name = o.stage + (o.slice ? "@" + *o.slice : std::string());
    if (o.skipped) {
      std::printf("%-28s skipped\n", name.c_str());
    } else {
      std::printf("%-28s done in %.1fs (%zu outputs)\n", name.c_str(), o.seconds, o.outputs.size());
    }
    for (const auto& n : o.notes) std::printf("  note: %s\n", n.c_str());
  }
  return 0;
}

int cmd_validate(const fs::path& config_path) {
  const auto v = validate_config(config_path);
  if (v.ok()) {
    std::printf("%s: ok\n", config_path.c_str());
    return 0;
  }
  for (const auto& d : v.diagnostics) std::fprintf(stderr, "%s\n", d.c_str());
  return 1;
}

int cmd_decode(const fs::path& config_path, const std::string& slice, const fs::path& prefix_file,
               std::optional<std::size_t> k, std::optional<std::size_t> beam_width, std::optional<std::string> role) {
  const auto v = validate_config(config_path);
  if (!v.ok()) throw ValidationError(v.diagnostics);
  const PipelineConfig& c = *v.config;
  const fs::path tok_path = c.output_dir / "tokenizers" / (slice + ".bpe");
  if (!fs::exists(tok_path)) throw StageError("missing " + tok_path.string() + "; run stage `tokenize` first");
  const std::string r = role.value_or(c.evaluation.battery_role);
  const fs::path model_path = c.output_dir / "models" / slice / (r + ".ckpt");
  if (!fs::exists(model_path)) {
    throw StageError("missing " + model_path.string() + "; run stage `" +
                     std::string(r == "student" ? "distill" : "train-teachers") + "` first");
  }
  const auto tok = BpeTokenizer::load(tok_path);
  auto loaded = load_checkpoint(model_path, tok.content_hash());
  for (const auto& w : loaded.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  DecodeOptions opt = c.evaluation.decode;
  if (k) opt.k = *k;
  if (beam_width) opt.beam_width = *beam_width;

  std::ifstream in(prefix_file);
  if (!in) throw Error("cannot read " + prefix_file.string());
  std::string prefix;
  while (std::getline(in, prefix)) {
    if (prefix.empty()) continue;
    const auto res = top_k_single_words(loaded.model, tok, prefix, opt);
    nlohmann::json out = {{"prefix", prefix}, {"complete", res.complete}, {"completions", nlohmann::json::array()}};
    for (const auto& cpl : res.completions) {
      out["completions"].push_back({{"rank", cpl.rank}, {"word", cpl.word}, {"log_prob", cpl.score}});
    }
    std::cout << out.dump() << '\n';
  }
  return 0;
}

int cmd_make_fixture(const fs::path& dir, std::uint64_t seed, std::size_t tokens) {
  SyntheticConfig sc;
  sc.seed = seed;
  sc.tokens_per_slice = tokens;
  const auto corpus = generate_synthetic(sc);
  fs::create_directories(dir);
  write_synthetic(corpus, dir / "data");
  const YearRange range{corpus.slice_years.front().first, corpus.slice_years.back().last};
  const auto config = synthetic_pipeline_config(corpus.slice_tokens, range, "data", "out");
  std::ofstream(dir / "config.json") << config.to_json();
  std::printf("wrote %s (%zu documents, %zu senses, %zu pairs)\n", (dir / "config.json").c_str(),
              corpus.documents.size(), corpus.senses.size(), corpus.pairs.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  // Keep freed activation buffers on the heap between training steps.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"chronolm: time-sliced language model batteries"};
  app.require_subcommand(1);

  std::string stage;
  fs::path config_path;
  std::optional<std::string> slice;
  auto* run = app.add_subcommand("run", "Run a pipeline stage, or `all`");
  run->add_option("stage", stage, "Stage name")->required();
  run->add_option("--config", config_path, "Config file")->required();
  run->add_option("--slice", slice, "Restrict per-slice stages to one slice label");

  auto* validate = app.add_subcommand("validate", "Check a config file and list every diagnostic");
  validate->add_option("--config", config_path, "Config file")->required();

  std::string decode_slice;
  fs::path prefix_file;
  std::optional<std::size_t> k, beam_width;
  std::optional<std::string> role;
  auto* decode = app.add_subcommand("decode", "Top-k single-word completions for each line of a prefix file");
  decode->add_option("--config", config_path, "Config file")->required();
  decode->add_option("--slice", decode_slice, "Slice label")->required();
  decode->add_option("--prefix-file", prefix_file, "One prefix per line")->required();
  decode->add_option("--k", k, "Number of completions");
  decode->add_option("--beam-width", beam_width, "Beam width (0 means 4k)");
  decode->add_option("--role", role, "student or teacher-<i>");

  fs::path fixture_dir;
  std::uint64_t seed = 0;
  std::size_t tokens = 200000;
  auto* fixture = app.add_subcommand("make-fixture", "Write a synthetic three-slice corpus and its config");
  fixture->add_option("dir", fixture_dir, "Output directory")->required();
  fixture->add_option("--seed", seed, "Generator seed");
  fixture->add_option("--tokens-per-slice", tokens, "Whitespace tokens per slice");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(stage, config_path, slice);
    if (*validate) return cmd_validate(config_path);
    if (*decode) return cmd_decode(config_path, decode_slice, prefix_file, k, beam_width, role);
    if (*fixture) return cmd_make_fixture(fixture_dir, seed, tokens);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
