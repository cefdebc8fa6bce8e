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

#include "chronolm/pipeline.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "chronolm/checkpoint.hpp"
#include "chronolm/hash.hpp"
#include "chronolm/scoring.hpp"
#include "chronolm/text.hpp"

namespace chronolm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kStages = {"ingest",      "slice",     "split",      "tokenize", "train-teachers",
                                          "distill",     "eval-ppl",  "eval-pairs", "build-cloze",
                                          "eval-cloze",  "leakage",   "discover",   "attribute"};

bool per_slice(const std::string& stage) {
  return stage == "split" || stage == "tokenize" || stage == "train-teachers" || stage == "distill";
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, std::string_view content) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string opt_number(const std::optional<double>& v) { return v ? text::format_number(*v) : std::string(); }

// Holds out/.lock for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        return;
      }
      // A lock left behind by a dead process is reclaimed once.
      long other = 0;
      try {
        other = std::stol(read_text(path_));
      } catch (const std::exception&) {
      }
      if (attempt == 0 && other > 0 && ::kill(static_cast<pid_t>(other), 0) != 0 && errno == ESRCH) {
        fs::remove(path_);
        continue;
      }
      break;
    }
    throw StageError("output directory " + dir.string() + " is locked by another pipeline (" + path_.string() + ")");
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

std::vector<std::string> sentences_of(const std::string& doc) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const char c = doc[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == doc.size() || doc[i + 1] == ' ')) {
      const auto s = text::trim(std::string_view(doc).substr(start, i + 1 - start));
      if (!s.empty()) out.emplace_back(s);
      start = i + 1;
    }
  }
  const auto rest = text::trim(std::string_view(doc).substr(std::min(start, doc.size())));
  if (!rest.empty()) out.emplace_back(rest);
  return out;
}

std::string file_safe(const std::string& w) {
  std::string out;
  for (char c : w) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
  return out.empty() ? "_" : out;
}

}  // namespace

struct Pipeline::Impl {
  explicit Impl(const PipelineConfig& c) : config(c), out(c.output_dir) {}

  const PipelineConfig& config;
  fs::path out;
  std::shared_ptr<TextGenerationClient> client;

  // Per-stage context: upstream files consumed, files produced.
  struct Context {
    std::string stage;
    std::optional<std::string> slice;
    std::vector<std::pair<std::string, std::string>> inputs;  // rel path, producing stage
    std::vector<std::string> outputs;
    std::vector<std::string> notes;
  };

  // Memoized artifacts, reloaded when their files change.
  std::optional<CorpusStore> store;
  std::optional<SlicePlan> plan;

  fs::path abs(const std::string& rel) const { return out / rel; }

  static std::string manifest_name(const std::string& stage, const std::optional<std::string>& slice) {
    return "manifests/" + stage + (slice ? "@" + file_safe(*slice) : std::string()) + ".json";
  }

  void require(const std::string& rel, const std::string& producer) const {
    if (!fs::exists(abs(rel))) {
      throw StageError("missing " + rel + "; run stage `" + producer + "` first");
    }
  }

  std::string inputs_hash(const Context& ctx, const json& config_section) const {
    Sha256 h;
    h.update(ctx.stage);
    h.update("\n");
    h.update(ctx.slice.value_or(""));
    h.update("\n");
    h.update(config_section.dump());
    for (const auto& [rel, producer] : ctx.inputs) {
      require(rel, producer);
      h.update("\n" + rel + " " + sha256_file(abs(rel)));
    }
    return h.hex_digest();
  }

  bool up_to_date(const std::string& manifest_rel, const std::string& hash) const {
    const fs::path p = abs(manifest_rel);
    if (!fs::exists(p)) return false;
    json m;
    try {
      m = json::parse(read_text(p));
    } catch (const std::exception&) {
      return false;
    }
    if (m.value("inputs_hash", "") != hash) return false;
    for (const auto& o : m.value("outputs", json::array())) {
      const fs::path f = abs(o.value("path", ""));
      if (!fs::exists(f) || sha256_file(f) != o.value("sha256", "")) return false;
    }
    return true;
  }

  // Runs `body` unless the stage's manifest says nothing changed. `declare`
  // lists the stage's inputs before hashing.
  StageOutcome execute(const std::string& stage, const std::optional<std::string>& slice, const json& section,
                       const std::function<void(Context&)>& declare, const std::function<void(Context&)>& body) {
    Context ctx{stage, slice, {}, {}, {}};
    declare(ctx);
    const std::string hash = inputs_hash(ctx, section);
    const std::string manifest = manifest_name(stage, slice);
    StageOutcome outcome{stage, slice, false, 0.0, {}, {}};
    if (up_to_date(manifest, hash)) {
      outcome.skipped = true;
      const json m = json::parse(read_text(abs(manifest)));
      for (const auto& o : m["outputs"]) outcome.outputs.push_back(o["path"].get<std::string>());
      return outcome;
    }
    const auto start = std::chrono::steady_clock::now();
    body(ctx);
    outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json m;
    m["stage"] = stage;
    m["slice"] = slice ? json(*slice) : json(nullptr);
    m["inputs_hash"] = hash;
    m["outputs"] = json::array();
    for (const auto& rel : ctx.outputs) m["outputs"].push_back({{"path", rel}, {"sha256", sha256_file(abs(rel))}});
    m["duration_seconds"] = outcome.seconds;
    m["notes"] = ctx.notes;
    write_atomic(abs(manifest), m.dump(2) + "\n");
    outcome.outputs = ctx.outputs;
    outcome.notes = ctx.notes;
    return outcome;
  }

  void emit(Context& ctx, const std::string& rel, std::string_view content) {
    write_atomic(abs(rel), content);
    ctx.outputs.push_back(rel);
  }

  // ---- artifact loaders -------------------------------------------------

  const CorpusStore& documents() {
    require("corpus/documents.jsonl", "ingest");
    if (!store) {
      const std::vector<fs::path> paths = {abs("corpus/documents.jsonl")};
      auto r = ingest(paths, RecordSchema{}, YearRange{std::numeric_limits<int>::min(), std::numeric_limits<int>::max()});
      store = std::move(r.store);
    }
    return *store;
  }

  const SlicePlan& slice_plan() {
    require("plan/slice_plan.json", "slice");
    if (!plan) plan = slice_plan_from_json(read_text(abs("plan/slice_plan.json")));
    return *plan;
  }

  std::vector<std::string> labels(const std::optional<std::string>& only) {
    const auto all = slice_plan().labels();
    if (!only) return all;
    if (std::find(all.begin(), all.end(), *only) == all.end()) {
      throw StageError("slice " + *only + " is not in the slice plan");
    }
    return {*only};
  }

  SplitSet split_of(const std::string& label) {
    const std::string rel = "splits/" + label + ".json";
    require(rel, "split");
    return split_set_from_json(read_text(abs(rel)));
  }

  std::vector<std::string> texts(const std::vector<std::string>& ids) {
    const auto& s = documents();
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(s.at(id).text);
    return out;
  }

  BpeTokenizer tokenizer_of(const std::string& label) {
    const std::string rel = "tokenizers/" + label + ".bpe";
    require(rel, "tokenize");
    return BpeTokenizer::load(abs(rel));
  }

  std::string model_rel(const std::string& label, const std::string& role) const {
    return "models/" + label + "/" + role + ".ckpt";
  }

  std::string producer_of(const std::string& role) const { return role == "student" ? "distill" : "train-teachers"; }

  std::vector<std::string> teacher_roles() const {
    std::vector<std::string> r;
    for (std::size_t i = 0; i < config.seeds.teachers.size(); ++i) r.push_back("teacher-" + std::to_string(i));
    return r;
  }

  // Loaded battery: tokenizers and models in slice order.
  struct Battery {
    std::vector<std::string> labels;
    std::vector<BpeTokenizer> tokenizers;
    std::vector<Transformer> models;
    std::vector<BatteryMember> members() const {
      std::vector<BatteryMember> m;
      for (std::size_t i = 0; i < labels.size(); ++i) m.push_back({labels[i], &models[i], &tokenizers[i]});
      return m;
    }
  };

  void declare_battery(Context& ctx) {
    for (const auto& label : slice_plan().labels()) {
      ctx.inputs.emplace_back("tokenizers/" + label + ".bpe", "tokenize");
      ctx.inputs.emplace_back(model_rel(label, config.evaluation.battery_role), producer_of(config.evaluation.battery_role));
    }
  }

  Battery battery(Context& ctx) {
    Battery b;
    for (const auto& label : slice_plan().labels()) {
      b.labels.push_back(label);
      b.tokenizers.push_back(tokenizer_of(label));
      const std::string rel = model_rel(label, config.evaluation.battery_role);
      require(rel, producer_of(config.evaluation.battery_role));
      auto loaded = load_checkpoint(abs(rel), b.tokenizers.back().content_hash());
      for (const auto& w : loaded.warnings) ctx.notes.push_back(rel + ": " + w);
      b.models.push_back(std::move(loaded.model));
    }
    return b;
  }

  std::vector<WordCounts> vocabularies(Context* ctx) {
    std::vector<WordCounts> v;
    for (const auto& label : slice_plan().labels()) {
      const std::string rel = "vocab/" + label + ".json";
      if (ctx != nullptr) {
        ctx->inputs.emplace_back(rel, "split");
      } else {
        require(rel, "split");
        v.push_back(word_counts_from_json(read_text(abs(rel))));
      }
    }
    return v;
  }

  // ---- stages -------------------------------------------------------------

  StageOutcome run_ingest() {
    json section = json::parse(config.to_json())["corpus"];
    for (const auto& p : config.corpus.paths) section["hash:" + p.generic_string()] = sha256_file(p);
    return execute(
        "ingest", std::nullopt, section, [&](Context&) {},
        [&](Context& ctx) {
          auto r = ingest(config.corpus.paths, config.corpus.schema, config.corpus.range);
          fs::create_directories(abs("corpus"));
          std::vector<Document> docs(r.store.documents().begin(), r.store.documents().end());
          write_documents(abs("corpus/documents.jsonl"), docs);
          ctx.outputs.push_back("corpus/documents.jsonl");
          write_rejections(abs("corpus/rejections.jsonl"), r.rejections);
          ctx.outputs.push_back("corpus/rejections.jsonl");
          ctx.notes.push_back(std::to_string(docs.size()) + " documents, " + std::to_string(r.rejections.size()) +
                              " rejections");
          store.reset();
          plan.reset();
        });
  }

  StageOutcome run_slice() {
    const json all = json::parse(config.to_json());
    const json section = {{"slicing", all["slicing"]}, {"range", all["corpus"]["range"]}};
    return execute(
        "slice", std::nullopt, section, [&](Context& ctx) { ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest"); },
        [&](Context& ctx) {
          SlicePlanRequest req;
          req.n_slices = config.slicing.n_slices;
          req.budgets = config.slicing.budgets;
          req.range = config.corpus.range;
          const SlicePlan p = plan_slices(documents(), req);
          emit(ctx, "plan/slice_plan.json", to_json(p));
          std::ostringstream csv;
          csv << "slice,start_year,end_year,tokens,train_budget,val_budget,test_budget\n";
          for (const auto& s : p.slices) {
            csv << s.label << ',' << s.start_year << ',' << s.end_year << ','
                << (p.slice_tokens.count(s.label) ? p.slice_tokens.at(s.label) : 0) << ',' << s.train_budget << ','
                << s.val_budget << ',' << s.test_budget << '\n';
          }
          emit(ctx, "reports/slice_plan.csv", csv.str());
          std::ostringstream sf;
          sf << "slice,available,required\n";
          for (const auto& s : p.shortfalls) sf << s.label << ',' << s.available << ',' << s.required << '\n';
          emit(ctx, "reports/slice_shortfalls.csv", sf.str());
          plan.reset();
          if (!p.feasible) {
            fs::remove(abs("plan/slice_plan.json"));
            std::string msg = "slice budgets are infeasible:";
            for (const auto& s : p.shortfalls) {
              msg += " " + s.label + " has " + std::to_string(s.available) + " of " + std::to_string(s.required) + " tokens;";
            }
            throw StageError(msg + " see reports/slice_shortfalls.csv");
          }
        });
  }

  StageOutcome run_split(const std::string& label) {
    const json section = {{"seed", config.seeds.split}};
    return execute(
        "split", label, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest");
          ctx.inputs.emplace_back("plan/slice_plan.json", "slice");
        },
        [&](Context& ctx) {
          const auto r = split_slice(documents(), slice_plan(), label, config.seeds.split);
          if (!r.feasible()) {
            throw StageError("slice " + label + " has " + std::to_string(r.shortfall->available) +
                             " tokens, fewer than the " + std::to_string(r.shortfall->required) +
                             " needed for validation and test");
          }
          emit(ctx, "splits/" + label + ".json", to_json(*r.split));
          emit(ctx, "vocab/" + label + ".json", to_json(word_counts(documents(), r.split->train, label + "/train")));
        });
  }

  StageOutcome run_tokenize(const std::string& label) {
    const json section = json::parse(config.to_json())["tokenizer"];
    return execute(
        "tokenize", label, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest");
          ctx.inputs.emplace_back("splits/" + label + ".json", "split");
        },
        [&](Context& ctx) {
          const auto tok = BpeTokenizer::train(texts(split_of(label).train), config.tokenizer);
          emit(ctx, "tokenizers/" + label + ".bpe", tok.serialize());
        });
  }

  std::pair<std::vector<TokenId>, std::vector<TokenId>> streams(const std::string& label, const BpeTokenizer& tok) {
    const SplitSet s = split_of(label);
    const auto train = texts(s.train);
    const auto val = texts(s.val);
    return {token_stream(tok, train), token_stream(tok, val)};
  }

  void save_with_log(Context& ctx, const std::string& label, const std::string& role, const TrainResult& r,
                     const std::string& tokenizer_hash) {
    CheckpointMetadata meta;
    meta.tokenizer_hash = tokenizer_hash;
    meta.role = role;
    meta.step = r.log.selected_step;
    meta.val_loss = r.log.best_val_loss;
    for (const auto& row : r.log.rows) {
      if (row.step == r.log.selected_step && row.val_loss) meta.epoch = row.epoch;
    }
    meta.extra["slice"] = label;
    const std::string rel = model_rel(label, role);
    fs::create_directories(abs(rel).parent_path());
    save_checkpoint(r.model, meta, abs(rel));
    ctx.outputs.push_back(rel);
    emit(ctx, "models/" + label + "/" + role + ".log.csv", r.log.to_csv());
  }

  EvalHook checkpoint_hook(Context& ctx, const std::string& label, const std::string& role, const std::string& tokhash) {
    return [&ctx, this, label, role, tokhash](const Transformer& m, const LogRow& row) {
      CheckpointMetadata meta{tokhash, role, row.epoch, row.step, row.val_loss, {{"slice", label}}};
      const std::string rel = "models/" + label + "/checkpoints/" + role + "-step" + std::to_string(row.step) + ".ckpt";
      fs::create_directories(abs(rel).parent_path());
      save_checkpoint(m, meta, abs(rel));
      ctx.outputs.push_back(rel);
    };
  }

  StageOutcome run_train_teachers(const std::string& label) {
    const json all = json::parse(config.to_json());
    const json section = {{"model", all["model"]}, {"training", all["training"]}, {"seeds", all["seeds"]["teachers"]}};
    return execute(
        "train-teachers", label, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest");
          ctx.inputs.emplace_back("splits/" + label + ".json", "split");
          ctx.inputs.emplace_back("tokenizers/" + label + ".bpe", "tokenize");
        },
        [&](Context& ctx) {
          const auto tok = tokenizer_of(label);
          const auto [train, val] = streams(label, tok);
          for (std::size_t i = 0; i < config.seeds.teachers.size(); ++i) {
            const std::string role = "teacher-" + std::to_string(i);
            ModelConfig mc = config.model;
            mc.vocab_size = tok.vocab_size();
            mc.seed = config.seeds.teachers[i];
            TrainConfig tc = config.training;
            tc.seed = config.seeds.teachers[i];
            const auto r = train_teacher(mc, tc, train, val, checkpoint_hook(ctx, label, role, tok.content_hash()));
            save_with_log(ctx, label, role, r, tok.content_hash());
          }
        });
  }

  StageOutcome run_distill(const std::string& label) {
    const json all = json::parse(config.to_json());
    const json section = {{"student_model", config.student_model ? all["student_model"] : all["model"]},
                          {"distillation", all["distillation"]},
                          {"seed", config.seeds.student}};
    return execute(
        "distill", label, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest");
          ctx.inputs.emplace_back("splits/" + label + ".json", "split");
          ctx.inputs.emplace_back("tokenizers/" + label + ".bpe", "tokenize");
          for (const auto& role : teacher_roles()) ctx.inputs.emplace_back(model_rel(label, role), "train-teachers");
        },
        [&](Context& ctx) {
          const auto tok = tokenizer_of(label);
          std::vector<Transformer> teachers;
          for (const auto& role : teacher_roles()) {
            auto loaded = load_checkpoint(abs(model_rel(label, role)), tok.content_hash());
            for (const auto& w : loaded.warnings) ctx.notes.push_back(role + ": " + w);
            teachers.push_back(std::move(loaded.model));
          }
          std::vector<const Transformer*> ptrs;
          for (const auto& t : teachers) ptrs.push_back(&t);
          const auto [train, val] = streams(label, tok);
          ModelConfig mc = config.student();
          mc.vocab_size = tok.vocab_size();
          mc.seed = config.seeds.student;
          TrainConfig tc = config.distillation;
          tc.seed = config.seeds.student;
          const auto r = distill_student(ptrs, mc, tc, train, val, checkpoint_hook(ctx, label, "student", tok.content_hash()));
          save_with_log(ctx, label, "student", r, tok.content_hash());
        });
  }

  StageOutcome run_eval_ppl() {
    const json section = {{"stride", config.evaluation.perplexity_stride}, {"role", config.evaluation.battery_role}};
    return execute(
        "eval-ppl", std::nullopt, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest");
          declare_battery(ctx);
          for (const auto& l : slice_plan().labels()) ctx.inputs.emplace_back("splits/" + l + ".json", "split");
        },
        [&](Context& ctx) {
          const Battery b = battery(ctx);
          std::vector<TestSet> sets;
          for (const auto& l : b.labels) sets.push_back({l, texts(split_of(l).test)});
          const auto m = cross_time_matrix(b.members(), sets, config.evaluation.perplexity_stride);
          emit(ctx, "reports/perplexity_matrix.csv", m.to_csv());
        });
  }

  StageOutcome run_eval_pairs() {
    const auto& e = config.evaluation;
    json section = {{"filter", e.filter_pairs}, {"per_token", e.per_token_pairs}, {"role", e.battery_role},
                    {"min_count", e.cloze.min_count}};
    if (e.minimal_pairs) section["pairs"] = sha256_file(*e.minimal_pairs);
    return execute(
        "eval-pairs", std::nullopt, section,
        [&](Context& ctx) {
          declare_battery(ctx);
          vocabularies(&ctx);
        },
        [&](Context& ctx) {
          std::ostringstream acc, filt;
          acc << "model,subtask,n,correct,accuracy\n";
          filt << "subtask,retained,total\n";
          if (!e.minimal_pairs) {
            ctx.notes.push_back("no minimal pairs configured");
          } else {
            auto pairs = read_minimal_pairs(*e.minimal_pairs);
            if (e.filter_pairs) {
              std::vector<FilterItem> items;
              for (const auto& p : pairs) items.push_back({p.subtask, p.good + " " + p.bad});
              const auto vocabs = vocabularies(nullptr);
              const auto f = filter_in_vocab(items, vocabs, e.cloze.min_count);
              std::vector<MinimalPair> kept;
              for (std::size_t i : f.retained) kept.push_back(pairs[i]);
              pairs = std::move(kept);
              for (const auto& [g, r] : f.by_group) filt << text::csv_field(g) << ',' << r.retained << ',' << r.total << '\n';
            }
            const Battery b = battery(ctx);
            for (std::size_t i = 0; i < b.labels.size(); ++i) {
              const auto a = minimal_pair_accuracy(b.models[i], b.tokenizers[i], pairs, e.per_token_pairs);
              acc << b.labels[i] << ",all," << a.overall.n << ',' << a.overall.correct << ','
                  << opt_number(a.overall.accuracy) << '\n';
              for (const auto& [sub, t] : a.by_subtask) {
                acc << b.labels[i] << ',' << text::csv_field(sub) << ',' << t.n << ',' << t.correct << ','
                    << opt_number(t.accuracy) << '\n';
              }
            }
          }
          emit(ctx, "reports/minimal_pairs.csv", acc.str());
          emit(ctx, "reports/minimal_pairs_filter.csv", filt.str());
        });
  }

  StageOutcome run_build_cloze() {
    const auto& e = config.evaluation;
    json all = json::parse(config.to_json())["evaluation"];
    json section = {{"tail_fraction", all["tail_fraction"]}, {"min_frequency", all["min_frequency"]},
                    {"max_frequency", all["max_frequency"]}, {"min_count", all["min_count"]}};
    if (e.cloze_inventory) section["inventory"] = sha256_file(*e.cloze_inventory);
    return execute(
        "build-cloze", std::nullopt, section, [&](Context& ctx) { vocabularies(&ctx); },
        [&](Context& ctx) {
          std::vector<SenseRecord> records;
          if (e.cloze_inventory) {
            records = read_sense_inventory(*e.cloze_inventory);
          } else {
            ctx.notes.push_back("no cloze inventory configured");
          }
          const auto vocabs = vocabularies(nullptr);
          const auto r = build_cloze_set(records, vocabs, e.cloze);
          if (!r.vocabulary_filter_applied) ctx.notes.push_back("vocabulary filter skipped: no vocabularies");
          std::ostringstream tasks;
          for (const auto& t : r.tasks) {
            json j = {{"id", t.id},         {"sense_id", t.sense_id},     {"sentence", t.sentence},
                      {"prefix", t.prefix}, {"target", t.target},         {"sense_year", t.sense_year},
                      {"frequency_per_million", t.frequency_per_million}};
            if (t.definition) j["definition"] = *t.definition;
            tasks << j.dump() << '\n';
          }
          emit(ctx, "cloze/tasks.jsonl", tasks.str());
          std::ostringstream csv;
          csv << "record,status,reason\n";
          for (const auto& t : r.tasks) csv << text::csv_field(t.id) << ",kept,\n";
          for (const auto& s : r.skipped) csv << text::csv_field(s.record) << ",skipped," << text::csv_field(s.reason) << '\n';
          emit(ctx, "reports/cloze_build.csv", csv.str());
        });
  }

  std::vector<ClozeTask> load_tasks() {
    require("cloze/tasks.jsonl", "build-cloze");
    std::vector<ClozeTask> out;
    std::istringstream in(read_text(abs("cloze/tasks.jsonl")));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      ClozeTask t;
      t.id = j["id"];
      t.sense_id = j["sense_id"];
      t.sentence = j["sentence"];
      t.prefix = j["prefix"];
      t.target = j["target"];
      t.sense_year = j["sense_year"];
      t.frequency_per_million = j["frequency_per_million"];
      if (j.contains("definition")) t.definition = j["definition"].get<std::string>();
      out.push_back(std::move(t));
    }
    return out;
  }

  StageOutcome run_eval_cloze() {
    const json all = json::parse(config.to_json())["evaluation"];
    const json section = {{"k", all["k"]},
                          {"beam_width", all["beam_width"]},
                          {"max_word_tokens", all["max_word_tokens"]},
                          {"allow_punctuation_first", all["allow_punctuation_first"]},
                          {"allow_bare_space", all["allow_bare_space"]},
                          {"role", all["battery_role"]}};
    return execute(
        "eval-cloze", std::nullopt, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("cloze/tasks.jsonl", "build-cloze");
          declare_battery(ctx);
        },
        [&](Context& ctx) {
          const auto tasks = load_tasks();
          const Battery b = battery(ctx);
          const auto r = rank_cloze(b.members(), tasks, config.evaluation.decode);
          std::map<std::string, const ClozeTask*> by_id;
          for (const auto& t : tasks) by_id[t.id] = &t;
          std::ostringstream jl, csv, fail;
          csv << "model,task_id,target,sense_year,rank,k\n";
          for (const auto& rk : r.rankings) {
            const ClozeTask& t = *by_id.at(rk.task_id);
            jl << json{{"task_id", rk.task_id}, {"model_id", rk.model_id}, {"rank", rk.rank}, {"k", rk.k}}.dump() << '\n';
            csv << rk.model_id << ',' << text::csv_field(rk.task_id) << ',' << text::csv_field(t.target) << ','
                << t.sense_year << ',' << rk.rank << ',' << rk.k << '\n';
          }
          fail << "model,task_id,message\n";
          for (const auto& f : r.failures) {
            fail << f.model_id << ',' << text::csv_field(f.task_id) << ',' << text::csv_field(f.message) << '\n';
          }
          if (!r.failures.empty()) {
            ctx.notes.push_back(std::to_string(r.failures.size()) + " decoding failures excluded");
          }
          emit(ctx, "cloze/rankings.jsonl", jl.str());
          emit(ctx, "reports/cloze_rankings.csv", csv.str());
          emit(ctx, "reports/cloze_failures.csv", fail.str());
        });
  }

  StageOutcome run_leakage() {
    const json section = {{"k", config.evaluation.decode.k}};
    return execute(
        "leakage", std::nullopt, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("cloze/tasks.jsonl", "build-cloze");
          ctx.inputs.emplace_back("cloze/rankings.jsonl", "eval-cloze");
          ctx.inputs.emplace_back("plan/slice_plan.json", "slice");
        },
        [&](Context& ctx) {
          const auto tasks = load_tasks();
          std::map<std::string, std::vector<ClozeRanking>> by_model;
          std::istringstream in(read_text(abs("cloze/rankings.jsonl")));
          std::string line;
          while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            ClozeRanking r{j["task_id"], j["model_id"], j["rank"], j["k"]};
            by_model[r.model_id].push_back(std::move(r));
          }
          const auto& p = slice_plan();
          std::ostringstream leak, mrrs, grouped;
          leak << "model,cutoff_year,k,n_true,n_future,hits_true,hits_future,recall,leakage,rnl\n";
          mrrs << "model,n,mrr\n";
          grouped << "model,group,n,hits,accuracy\n";
          for (const auto& s : p.slices) {
            const auto it = by_model.find(s.label);
            if (it == by_model.end()) {
              ctx.notes.push_back("no rankings for model " + s.label);
              continue;
            }
            const auto& rk = it->second;
            const auto l = leakage_report(rk, tasks, s.end_year, config.evaluation.decode.k);
            leak << s.label << ',' << l.cutoff_year << ',' << l.k << ',' << l.n_true << ',' << l.n_future << ','
                 << l.hits_true << ',' << l.hits_future << ',' << opt_number(l.recall) << ',' << opt_number(l.leakage)
                 << ',' << opt_number(l.rnl) << '\n';
            mrrs << s.label << ',' << rk.size() << ',' << (rk.empty() ? std::string() : text::format_number(mrr(rk)))
                 << '\n';
            const auto g = grouped_accuracy(rk, tasks, p.slices);
            for (const auto& x : g.groups) {
              grouped << s.label << ',' << x.label << ',' << x.n << ',' << x.hits << ','
                      << text::format_number(x.accuracy) << '\n';
            }
            for (const auto& n : g.notes) ctx.notes.push_back(s.label + ": " + n);
          }
          emit(ctx, "reports/leakage.csv", leak.str());
          emit(ctx, "reports/mrr.csv", mrrs.str());
          emit(ctx, "reports/grouped_accuracy.csv", grouped.str());
        });
  }

  StageOutcome run_discover() {
    const json section = json::parse(config.to_json())["discovery"];
    return execute(
        "discover", std::nullopt, section,
        [&](Context& ctx) {
          ctx.inputs.emplace_back("corpus/documents.jsonl", "ingest");
          declare_battery(ctx);
          for (const auto& l : slice_plan().labels()) ctx.inputs.emplace_back("splits/" + l + ".json", "split");
        },
        [&](Context& ctx) {
          const auto& d = config.discovery;
          const Battery b = battery(ctx);
          std::vector<SampleSentence> sample;
          for (const auto& l : b.labels) {
            const SplitSet s = split_of(l);
            for (const auto& id : s.test) {
              const auto sents = sentences_of(documents().at(id).text);
              for (std::size_t i = 0; i < sents.size(); ++i) sample.push_back({id + ":" + std::to_string(i), sents[i]});
            }
          }
          std::sort(sample.begin(), sample.end(), [](const auto& a, const auto& c) { return a.id < c.id; });
          std::mt19937_64 rng(config.seeds.split);
          for (std::size_t i = sample.size(); i > 1; --i) std::swap(sample[i - 1], sample[rng() % i]);
          if (sample.size() > d.sample_sentences) sample.resize(d.sample_sentences);

          const auto table = SurprisalTable::compute(b.members(), sample);
          const std::string baseline = d.baseline.empty() ? b.labels.back() : d.baseline;
          const auto cands = trajectory_candidates(table, baseline, d.options);
          const auto cum = cumulative_divergence(table, baseline, d.options);
          emit(ctx, "reports/trajectory_candidates.csv", trajectories_csv(cands, table.labels()));
          emit(ctx, "reports/cumulative_divergence.csv", trajectories_csv(cum, table.labels()));
          std::vector<std::string> words = d.words;
          for (std::size_t i = 0; i < cands.size() && i < d.occurrence_tables; ++i) words.push_back(cands[i].word);
          std::set<std::string> done;
          for (const auto& w : words) {
            if (!done.insert(text::to_lower(w)).second) continue;
            const auto t = occurrence_trajectories(table, w, d.options.raw_values);
            for (const auto& n : t.notes) ctx.notes.push_back(n);
            emit(ctx, "reports/occurrences/" + file_safe(text::to_lower(w)) + ".csv", t.to_csv());
          }
        });
  }

  StageOutcome run_attribute() {
    const auto& a = config.attribution;
    json section = json::parse(config.to_json())["attribution"];
    if (!a.enabled) {
      StageOutcome o{"attribute", std::nullopt, true, 0.0, {}, {"attribution disabled in config"}};
      return o;
    }
    for (const auto* p : {&a.authority, &a.catalog, &a.works}) {
      if (*p) section["hash:" + (*p)->generic_string()] = sha256_file(**p);
    }
    return execute(
        "attribute", std::nullopt, section, [&](Context&) {},
        [&](Context& ctx) {
          const auto authority = read_author_records(*a.authority, AuthorSource::kAuthority);
          const auto catalog = read_author_records(*a.catalog, AuthorSource::kCatalog);
          const auto m = match_authors(authority, catalog, a.thresholds);
          std::ostringstream mcsv;
          mcsv << "catalog_id,authority_id,pass,name_distance,date_agreement\n";
          for (const auto& x : m.matches) {
            mcsv << text::csv_field(x.catalog_id) << ',' << text::csv_field(x.authority_id) << ',' << x.pass << ','
                 << text::format_number(x.name_distance) << ',' << (x.date_agreement ? 1 : 0) << '\n';
          }
          for (const auto& id : m.unmatched) mcsv << text::csv_field(id) << ",,,,\n";
          emit(ctx, "reports/author_matches.csv", mcsv.str());

          const auto works = read_works(*a.works);
          if (!client) client = std::make_shared<HttpChatClient>(a.endpoint);
          AttributeOptions opt;
          opt.max_retries = a.max_retries;
          opt.backoff_seconds = a.backoff_seconds;
          opt.max_in_flight = a.max_in_flight;
          opt.requests_per_second = a.requests_per_second;
          opt.cache_path = abs("attribution/cache.jsonl");
          fs::create_directories(abs("attribution"));
          const auto results = attribute_dates(works, *client, opt);
          std::ostringstream acsv;
          acsv << "work_id,predicted_year,gold_years,status,attempts\n";
          std::size_t failed = 0;
          for (const auto& r : results) {
            std::string gold;
            for (int g : r.gold_years) gold += (gold.empty() ? "" : ";") + std::to_string(g);
            const char* status = r.status == AttributionStatus::kParsed        ? "parsed"
                                 : r.status == AttributionStatus::kUnparseable ? "unparseable"
                                                                               : "failed";
            failed += r.status == AttributionStatus::kFailed;
            acsv << text::csv_field(r.work_id) << ',' << (r.predicted_year ? std::to_string(*r.predicted_year) : "")
                 << ',' << gold << ',' << status << ',' << r.attempts << '\n';
          }
          emit(ctx, "reports/attributions.csv", acsv.str());
          if (failed > 0) ctx.notes.push_back(std::to_string(failed) + " works failed after retries");
          std::ostringstream scsv;
          scsv << "tolerance,dq_delta,accuracy,n_scored,n_disqualified,n_hits,n_unparsed\n";
          bool any_gold = false;
          for (const auto& r : results) any_gold = any_gold || !r.gold_years.empty();
          if (any_gold) {
            std::vector<std::optional<int>> dqs = {std::nullopt};
            if (a.dq_delta) dqs.push_back(a.dq_delta);
            for (int tol : a.tolerances) {
              for (const auto& dq : dqs) {
                const auto s = evaluate_attribution(results, tol, dq);
                scsv << tol << ',' << (dq ? std::to_string(*dq) : "") << ',' << text::format_number(s.accuracy) << ','
                     << s.n_scored << ',' << s.n_disqualified << ',' << s.n_hits << ',' << s.n_unparsed << '\n';
              }
            }
          } else {
            ctx.notes.push_back("no gold years; attribution not scored");
          }
          emit(ctx, "reports/attribution_scores.csv", scsv.str());
        });
  }

  std::vector<StageOutcome> run_one(const std::string& stage, const std::optional<std::string>& slice) {
    if (stage == "ingest") return {run_ingest()};
    if (stage == "slice") return {run_slice()};
    if (per_slice(stage)) {
      std::vector<StageOutcome> out;
      for (const auto& label : labels(slice)) {
        if (stage == "split") out.push_back(run_split(label));
        if (stage == "tokenize") out.push_back(run_tokenize(label));
        if (stage == "train-teachers") out.push_back(run_train_teachers(label));
        if (stage == "distill") out.push_back(run_distill(label));
      }
      return out;
    }
    if (stage == "eval-ppl") return {run_eval_ppl()};
    if (stage == "eval-pairs") return {run_eval_pairs()};
    if (stage == "build-cloze") return {run_build_cloze()};
    if (stage == "eval-cloze") return {run_eval_cloze()};
    if (stage == "leakage") return {run_leakage()};
    if (stage == "discover") return {run_discover()};
    if (stage == "attribute") return {run_attribute()};
    throw InvalidArgument("unknown stage " + stage);
  }
};

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  const auto d = config_.diagnostics();
  if (!d.empty()) throw ValidationError(d);
  impl_ = std::make_unique<Impl>(config_);
}

Pipeline::~Pipeline() = default;

const std::vector<std::string>& Pipeline::stages() { return kStages; }

void Pipeline::set_client(std::shared_ptr<TextGenerationClient> client) { impl_->client = std::move(client); }

std::vector<StageOutcome> Pipeline::run(const std::string& stage, const std::optional<std::string>& slice) {
  if (stage != "all" && std::find(kStages.begin(), kStages.end(), stage) == kStages.end()) {
    throw InvalidArgument("unknown stage " + stage);
  }
  DirectoryLock lock(config_.output_dir);
  if (stage != "all") return impl_->run_one(stage, slice);
  std::vector<StageOutcome> out;
  for (const auto& s : kStages) {
    auto r = impl_->run_one(s, slice);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace chronolm
