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

#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "chronolm/pipeline.hpp"
#include "json_convert.hpp"

namespace chronolm {
namespace {

using nlohmann::json;

// Reads optional fields from one JSON object, recording type errors and
// unknown keys instead of stopping at the first problem.
class Reader {
 public:
  Reader(const json* j, std::string prefix, std::vector<std::string>* diags)
      : j_(j), prefix_(std::move(prefix)), diags_(diags) {
    if (j_ != nullptr && !j_->is_object()) {
      diags_->push_back(name() + ": expected an object");
      j_ = nullptr;
    }
  }

  ~Reader() {
    if (j_ == nullptr) return;
    for (const auto& [key, value] : j_->items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        diags_->push_back(prefix_ + key + ": unknown field");
      }
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!v->is_number_integer() || v->get<long long>() < 0) {
          diags_->push_back(prefix_ + key + ": expected a non-negative integer");
          return;
        }
      }
      out = v->get<T>();
    } catch (const json::exception&) {
      diags_->push_back(prefix_ + key + ": wrong type");
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    T value{};
    get(key, value);
    out = value;
  }

  void path(const char* key, std::filesystem::path& out, const std::filesystem::path& base) {
    std::string s;
    if (find(key) == nullptr) return;
    get(key, s);
    out = resolve(s, base);
  }

  void path(const char* key, std::optional<std::filesystem::path>& out, const std::filesystem::path& base) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    std::filesystem::path p;
    path(key, p, base);
    out = p;
  }

  Reader sub(const char* key) { return Reader(find(key), prefix_ + key + ".", diags_); }
  bool has(const char* key) const { return j_ != nullptr && j_->contains(key); }
  const json* raw(const char* key) { return find(key); }

  static std::filesystem::path resolve(const std::string& s, const std::filesystem::path& base) {
    std::filesystem::path p(s);
    if (p.is_relative() && !base.empty()) p = base / p;
    return p.lexically_normal();
  }

 private:
  const json* find(const char* key) {
    seen_.emplace_back(key);
    if (j_ == nullptr || !j_->contains(key)) return nullptr;
    return &(*j_)[key];
  }
  std::string name() const { return prefix_.empty() ? "config" : prefix_.substr(0, prefix_.size() - 1); }

  const json* j_;
  std::string prefix_;
  std::vector<std::string>* diags_;
  std::vector<std::string> seen_;
};

void read_model(Reader r, ModelConfig& c) {
  r.get("n_layers", c.n_layers);
  r.get("n_heads", c.n_heads);
  r.get("n_kv_heads", c.n_kv_heads);
  r.get("d_model", c.d_model);
  r.get("d_ff", c.d_ff);
  r.get("vocab_size", c.vocab_size);
  r.get("context_length", c.context_length);
  r.get("rope_theta", c.rope_theta);
  r.get("norm_eps", c.norm_eps);
  r.get("init_std", c.init_std);
  r.get("seed", c.seed);
}

void read_train(Reader r, TrainConfig& c, std::vector<std::string>& diags, const std::string& prefix) {
  r.get("learning_rate", c.learning_rate);
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("weight_decay", c.weight_decay);
  r.get("distillation_alpha", c.distillation_alpha);
  r.get("temperature", c.temperature);
  r.get("seed", c.seed);
  r.get("eval_interval", c.eval_interval);
  std::string schedule = c.schedule == LrSchedule::kCosine ? "cosine" : "constant";
  r.get("schedule", schedule);
  if (schedule == "cosine") {
    c.schedule = LrSchedule::kCosine;
  } else if (schedule == "constant") {
    c.schedule = LrSchedule::kConstant;
  } else {
    diags.push_back(prefix + "schedule: expected \"cosine\" or \"constant\"");
  }
  r.get("warmup_fraction", c.warmup_fraction);
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("adam_eps", c.adam_eps);
  r.get("grad_clip", c.grad_clip);
  r.get("max_steps", c.max_steps);
  std::string agg = c.kl_aggregation == KlAggregation::kMeanOfKl ? "mean_of_kl" : "kl_to_mean";
  r.get("kl_aggregation", agg);
  if (agg == "mean_of_kl") {
    c.kl_aggregation = KlAggregation::kMeanOfKl;
  } else if (agg == "kl_to_mean") {
    c.kl_aggregation = KlAggregation::kKlToMean;
  } else {
    diags.push_back(prefix + "kl_aggregation: expected \"mean_of_kl\" or \"kl_to_mean\"");
  }
}

json train_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},
          {"distillation_alpha", c.distillation_alpha},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"eval_interval", c.eval_interval},
          {"schedule", c.schedule == LrSchedule::kCosine ? "cosine" : "constant"},
          {"warmup_fraction", c.warmup_fraction},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_eps", c.adam_eps},
          {"grad_clip", c.grad_clip},
          {"max_steps", c.max_steps},
          {"kl_aggregation", c.kl_aggregation == KlAggregation::kMeanOfKl ? "mean_of_kl" : "kl_to_mean"}};
}

json optional_path(const std::optional<std::filesystem::path>& p) {
  return p ? json(p->generic_string()) : json(nullptr);
}

void check_path(std::vector<std::string>& d, const std::string& field, const std::filesystem::path& p) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(p, ec)) d.push_back(field + ": file not found: " + p.string());
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> d)
    : Error([&] {
        std::string s = "invalid configuration";
        for (const auto& x : d) s += "\n  " + x;
        return s;
      }()),
      diagnostics(std::move(d)) {}

PipelineConfig PipelineConfig::parse(std::string_view text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError({std::string("config: not valid JSON: ") + e.what()});
  }
  std::vector<std::string> diags;
  PipelineConfig c;
  {
    Reader r(&j, "", &diags);
    r.path("output_dir", c.output_dir, base);
    {
      Reader s = r.sub("corpus");
      if (const json* paths = s.raw("paths")) {
        if (!paths->is_array()) {
          diags.push_back("corpus.paths: expected an array of strings");
        } else {
          for (const auto& p : *paths) {
            if (p.is_string()) {
              c.corpus.paths.push_back(Reader::resolve(p.get<std::string>(), base));
            } else {
              diags.push_back("corpus.paths: expected an array of strings");
            }
          }
        }
      }
      Reader schema = s.sub("schema");
      schema.get("id", c.corpus.schema.id);
      schema.get("title", c.corpus.schema.title);
      schema.get("author", c.corpus.schema.author);
      schema.get("year", c.corpus.schema.year);
      schema.get("text", c.corpus.schema.text);
      Reader range = s.sub("range");
      range.get("first", c.corpus.range.first);
      range.get("last", c.corpus.range.last);
    }
    {
      Reader s = r.sub("slicing");
      s.get("n_slices", c.slicing.n_slices);
      Reader b = s.sub("budgets");
      b.get("train", c.slicing.budgets.train);
      b.get("val", c.slicing.budgets.val);
      b.get("test", c.slicing.budgets.test);
    }
    {
      Reader s = r.sub("tokenizer");
      s.get("vocab_size", c.tokenizer.vocab_size);
      s.get("full_byte_alphabet", c.tokenizer.full_byte_alphabet);
    }
    read_model(r.sub("model"), c.model);
    if (r.has("student_model")) {
      ModelConfig m = c.model;
      read_model(r.sub("student_model"), m);
      c.student_model = m;
    }
    read_train(r.sub("training"), c.training, diags, "training.");
    read_train(r.sub("distillation"), c.distillation, diags, "distillation.");
    {
      Reader s = r.sub("seeds");
      s.get("split", c.seeds.split);
      s.get("teachers", c.seeds.teachers);
      s.get("student", c.seeds.student);
    }
    {
      Reader s = r.sub("evaluation");
      s.path("cloze_inventory", c.evaluation.cloze_inventory, base);
      s.path("minimal_pairs", c.evaluation.minimal_pairs, base);
      s.get("k", c.evaluation.decode.k);
      s.get("beam_width", c.evaluation.decode.beam_width);
      s.get("max_word_tokens", c.evaluation.decode.max_word_tokens);
      s.get("allow_punctuation_first", c.evaluation.decode.allow_punctuation_first);
      s.get("allow_bare_space", c.evaluation.decode.allow_bare_space);
      s.get("tail_fraction", c.evaluation.cloze.tail_fraction);
      s.get("min_frequency", c.evaluation.cloze.min_frequency);
      s.get("max_frequency", c.evaluation.cloze.max_frequency);
      s.get("min_count", c.evaluation.cloze.min_count);
      s.get("perplexity_stride", c.evaluation.perplexity_stride);
      s.get("battery_role", c.evaluation.battery_role);
      s.get("filter_pairs", c.evaluation.filter_pairs);
      s.get("per_token_pairs", c.evaluation.per_token_pairs);
    }
    {
      Reader s = r.sub("discovery");
      s.get("baseline", c.discovery.baseline);
      s.get("min_occurrences", c.discovery.options.min_occurrences);
      s.get("top_n", c.discovery.options.top_n);
      s.get("slack", c.discovery.options.slack);
      std::string agg = "mean";
      s.get("aggregate", agg);
      if (agg == "mean") {
        c.discovery.options.aggregate = Aggregate::kMean;
      } else if (agg == "median") {
        c.discovery.options.aggregate = Aggregate::kMedian;
      } else {
        diags.push_back("discovery.aggregate: expected \"mean\" or \"median\"");
      }
      s.get("raw_values", c.discovery.options.raw_values);
      s.get("sample_sentences", c.discovery.sample_sentences);
      s.get("words", c.discovery.words);
      s.get("occurrence_tables", c.discovery.occurrence_tables);
    }
    {
      Reader s = r.sub("attribution");
      auto& a = c.attribution;
      s.get("enabled", a.enabled);
      s.path("authority", a.authority, base);
      s.path("catalog", a.catalog, base);
      s.path("works", a.works, base);
      Reader e = s.sub("endpoint");
      e.get("url", a.endpoint.url);
      e.get("model", a.endpoint.model);
      e.get("api_key_env", a.endpoint.api_key_env);
      e.get("temperature", a.endpoint.temperature);
      e.get("timeout_seconds", a.endpoint.timeout_seconds);
      Reader t = s.sub("thresholds");
      t.get("pass1", a.thresholds.pass1);
      t.get("pass2", a.thresholds.pass2);
      s.get("tolerances", a.tolerances);
      s.get("dq_delta", a.dq_delta);
      s.get("max_in_flight", a.max_in_flight);
      s.get("requests_per_second", a.requests_per_second);
      s.get("max_retries", a.max_retries);
      s.get("backoff_seconds", a.backoff_seconds);
    }
  }
  if (!diags.empty()) throw ValidationError(std::move(diags));
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError({"config: cannot read " + path.string()});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string PipelineConfig::to_json() const {
  json j;
  j["output_dir"] = output_dir.generic_string();
  json paths = json::array();
  for (const auto& p : corpus.paths) paths.push_back(p.generic_string());
  j["corpus"] = {{"paths", paths},
                 {"schema",
                  {{"id", corpus.schema.id},
                   {"title", corpus.schema.title},
                   {"author", corpus.schema.author},
                   {"year", corpus.schema.year},
                   {"text", corpus.schema.text}}},
                 {"range", {{"first", corpus.range.first}, {"last", corpus.range.last}}}};
  j["slicing"] = {{"n_slices", slicing.n_slices},
                  {"budgets",
                   {{"train", slicing.budgets.train}, {"val", slicing.budgets.val}, {"test", slicing.budgets.test}}}};
  j["tokenizer"] = {{"vocab_size", tokenizer.vocab_size}, {"full_byte_alphabet", tokenizer.full_byte_alphabet}};
  j["model"] = model;
  if (student_model) j["student_model"] = *student_model;
  j["training"] = train_json(training);
  j["distillation"] = train_json(distillation);
  j["seeds"] = {{"split", seeds.split}, {"teachers", seeds.teachers}, {"student", seeds.student}};
  const auto& e = evaluation;
  j["evaluation"] = {{"cloze_inventory", optional_path(e.cloze_inventory)},
                     {"minimal_pairs", optional_path(e.minimal_pairs)},
                     {"k", e.decode.k},
                     {"beam_width", e.decode.beam_width},
                     {"max_word_tokens", e.decode.max_word_tokens},
                     {"allow_punctuation_first", e.decode.allow_punctuation_first},
                     {"allow_bare_space", e.decode.allow_bare_space},
                     {"tail_fraction", e.cloze.tail_fraction},
                     {"min_frequency", e.cloze.min_frequency},
                     {"max_frequency", e.cloze.max_frequency},
                     {"min_count", e.cloze.min_count},
                     {"perplexity_stride", e.perplexity_stride},
                     {"battery_role", e.battery_role},
                     {"filter_pairs", e.filter_pairs},
                     {"per_token_pairs", e.per_token_pairs}};
  const auto& d = discovery;
  j["discovery"] = {{"baseline", d.baseline},
                    {"min_occurrences", d.options.min_occurrences},
                    {"top_n", d.options.top_n},
                    {"slack", d.options.slack},
                    {"aggregate", d.options.aggregate == Aggregate::kMean ? "mean" : "median"},
                    {"raw_values", d.options.raw_values},
                    {"sample_sentences", d.sample_sentences},
                    {"words", d.words},
                    {"occurrence_tables", d.occurrence_tables}};
  const auto& a = attribution;
  j["attribution"] = {{"enabled", a.enabled},
                      {"authority", optional_path(a.authority)},
                      {"catalog", optional_path(a.catalog)},
                      {"works", optional_path(a.works)},
                      {"endpoint",
                       {{"url", a.endpoint.url},
                        {"model", a.endpoint.model},
                        {"api_key_env", a.endpoint.api_key_env},
                        {"temperature", a.endpoint.temperature},
                        {"timeout_seconds", a.endpoint.timeout_seconds}}},
                      {"thresholds", {{"pass1", a.thresholds.pass1}, {"pass2", a.thresholds.pass2}}},
                      {"tolerances", a.tolerances},
                      {"dq_delta", a.dq_delta ? json(*a.dq_delta) : json(nullptr)},
                      {"max_in_flight", a.max_in_flight},
                      {"requests_per_second", a.requests_per_second},
                      {"max_retries", a.max_retries},
                      {"backoff_seconds", a.backoff_seconds}};
  return j.dump(2) + "\n";
}

std::vector<std::string> PipelineConfig::diagnostics() const {
  std::vector<std::string> d;
  if (output_dir.empty()) d.push_back("output_dir: must be set");
  if (corpus.paths.empty()) d.push_back("corpus.paths: at least one corpus file is required");
  for (const auto& p : corpus.paths) check_path(d, "corpus.paths", p);
  if (corpus.range.first > corpus.range.last) d.push_back("corpus.range: first must not exceed last");
  if (slicing.n_slices == 0) d.push_back("slicing.n_slices: must be at least 1");
  if (slicing.budgets.total() == 0) d.push_back("slicing.budgets: at least one budget must be positive");
  if (slicing.n_slices > 0 && corpus.range.first <= corpus.range.last &&
      static_cast<long long>(slicing.n_slices) > static_cast<long long>(corpus.range.last) - corpus.range.first + 1) {
    d.push_back("slicing.n_slices: more slices than years in corpus.range");
  }
  if (tokenizer.vocab_size <= BpeTokenizer::kNumSpecials + 1) d.push_back("tokenizer.vocab_size: too small");
  const auto model_diags = [&](const ModelConfig& m, const std::string& prefix) {
    ModelConfig probe = m;
    probe.vocab_size = std::max<std::size_t>(probe.vocab_size, 1);
    for (const auto& x : probe.diagnostics()) d.push_back(prefix + x);
  };
  model_diags(model, "model: ");
  if (student_model) model_diags(*student_model, "student_model: ");
  if (student().context_length > model.context_length) {
    d.push_back("student_model.context_length: must not exceed the teachers' context_length");
  }
  for (const auto& [cfg, prefix] : {std::pair{&training, std::string("training.")},
                                    std::pair{&distillation, std::string("distillation.")}}) {
    for (const auto& x : cfg->diagnostics()) {
      std::string field = x.substr(0, x.find(' '));
      d.push_back(prefix + field + ": " + x);
    }
    if (cfg->epochs == 0) d.push_back(prefix + "epochs: must be at least 1");
  }
  if (seeds.teachers.empty()) d.push_back("seeds.teachers: at least one teacher is required");
  const auto& e = evaluation;
  if (e.cloze_inventory) check_path(d, "evaluation.cloze_inventory", *e.cloze_inventory);
  if (e.minimal_pairs) check_path(d, "evaluation.minimal_pairs", *e.minimal_pairs);
  if (e.decode.k == 0) d.push_back("evaluation.k: must be at least 1");
  if (e.decode.beam_width != 0 && e.decode.beam_width < e.decode.k) {
    d.push_back("evaluation.beam_width: must be 0 (4k) or at least k");
  }
  if (e.decode.max_word_tokens == 0) d.push_back("evaluation.max_word_tokens: must be at least 1");
  if (!(e.cloze.tail_fraction >= 0.0 && e.cloze.tail_fraction <= 1.0)) {
    d.push_back("evaluation.tail_fraction: must lie in [0, 1]");
  }
  if (!(e.cloze.min_frequency <= e.cloze.max_frequency)) {
    d.push_back("evaluation.min_frequency: must not exceed max_frequency");
  }
  if (e.battery_role != "student" && e.battery_role.rfind("teacher-", 0) != 0) {
    d.push_back("evaluation.battery_role: expected \"student\" or \"teacher-<i>\"");
  }
  if (e.perplexity_stride >= model.context_length && e.perplexity_stride != 0) {
    d.push_back("evaluation.perplexity_stride: must be smaller than model.context_length");
  }
  if (discovery.options.slack < 0.0) d.push_back("discovery.slack: must be non-negative");
  const auto& a = attribution;
  if (a.enabled) {
    if (!a.authority) d.push_back("attribution.authority: required when attribution is enabled");
    if (!a.catalog) d.push_back("attribution.catalog: required when attribution is enabled");
    if (!a.works) d.push_back("attribution.works: required when attribution is enabled");
    if (a.authority) check_path(d, "attribution.authority", *a.authority);
    if (a.catalog) check_path(d, "attribution.catalog", *a.catalog);
    if (a.works) check_path(d, "attribution.works", *a.works);
    if (a.endpoint.url.empty()) d.push_back("attribution.endpoint.url: required when attribution is enabled");
  }
  if (!(a.thresholds.pass2 < a.thresholds.pass1)) {
    d.push_back("attribution.thresholds: pass2 must be stricter (smaller) than pass1");
  }
  for (int t : a.tolerances) {
    if (t < 0) d.push_back("attribution.tolerances: must be non-negative");
  }
  return d;
}

ValidationResult validate_config(const std::filesystem::path& path) {
  ValidationResult r;
  try {
    r.config = PipelineConfig::load(path);
  } catch (const ValidationError& e) {
    r.diagnostics = e.diagnostics;
    return r;
  }
  r.diagnostics = r.config->diagnostics();
  return r;
}

PipelineConfig synthetic_pipeline_config(const std::vector<std::uint64_t>& slice_tokens, YearRange range,
                                         const std::filesystem::path& data_dir,
                                         const std::filesystem::path& output_dir) {
  if (slice_tokens.empty()) throw InvalidArgument("no slices");
  PipelineConfig c;
  c.output_dir = output_dir;
  c.corpus.paths = {data_dir / "corpus.jsonl"};
  c.corpus.range = range;
  c.slicing.n_slices = slice_tokens.size();
  const std::uint64_t total = *std::min_element(slice_tokens.begin(), slice_tokens.end());
  c.slicing.budgets.test = total / 20;
  c.slicing.budgets.val = total / 20;
  c.slicing.budgets.train = total - c.slicing.budgets.test - c.slicing.budgets.val;
  c.tokenizer.vocab_size = 1024;
  c.model.n_layers = 2;
  c.model.n_heads = 4;
  c.model.n_kv_heads = 2;
  c.model.d_model = 64;
  c.model.d_ff = 128;
  c.model.context_length = 64;
  for (TrainConfig* t : {&c.training, &c.distillation}) {
    t->learning_rate = 3e-3;
    t->epochs = 2;
    t->batch_size = 32;
    t->weight_decay = 0.1;
  }
  c.evaluation.cloze_inventory = data_dir / "senses.jsonl";
  c.evaluation.minimal_pairs = data_dir / "pairs.jsonl";
  c.evaluation.decode.k = 100;
  c.discovery.sample_sentences = 1500;
  return c;
}

}  // namespace chronolm
