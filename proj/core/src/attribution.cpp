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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "chronolm/attribution.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "chronolm/text.hpp"

namespace chronolm {
namespace {

using nlohmann::json;

// ASCII folds for U+00C0..U+00FF; '\0' drops the character.
constexpr const char* kLatin1[64] = {
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
    "D", "N", "O", "O", "O", "O", "O", "",  "O", "U", "U", "U", "U", "Y", "TH", "ss",
    "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "o", "",  "o", "u", "u", "u", "u", "y", "th", "y"};
// ASCII folds for U+0100..U+017F.
constexpr std::string_view kLatinExtA =
    "AaAaAaCcCcCcCcDdDdEeEeEeEeEeGgGgGgGgHhHhIiIiIiIiIiJjJjKkkLlLlLlLlLlNnNnNnnNnOoOoOoOoRrRrRrSsSsSsSs"
    "TtTtTtUuUuUuUuUuUuWwYyYZzZzZzs";

std::string fold_diacritics(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c >= 0xC2 && c <= 0xC5 && i + 1 < s.size()) {
      const auto c2 = static_cast<unsigned char>(s[i + 1]);
      const unsigned cp = ((c & 0x1Fu) << 6) | (c2 & 0x3Fu);
      if (cp >= 0xC0 && cp <= 0xFF) {
        out += kLatin1[cp - 0xC0];
        ++i;
        continue;
      }
      if (cp >= 0x100 && cp <= 0x17F) {
        out += kLatinExtA[cp - 0x100];
        ++i;
        continue;
      }
    }
    out += static_cast<char>(c);
  }
  return out;
}

std::string strip_parenthesized(std::string_view s) {
  std::string out;
  int depth = 0;
  for (char c : s) {
    if (c == '(' || c == '[') {
      ++depth;
    } else if ((c == ')' || c == ']') && depth > 0) {
      --depth;
    } else if (depth == 0) {
      out += c;
    }
  }
  return out;
}

const std::regex& date_marker_re() {
  static const std::regex re(R"((^|[\s,])(b|d|fl|born|died)\.?\s*(\d{3,4}))", std::regex::icase);
  return re;
}

const std::regex& life_span_re() {
  static const std::regex re(R"((\d{3,4})\s*(?:-|\xE2\x80\x93|\xE2\x80\x94)\s*(\d{3,4})?)");
  return re;
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
    } else {
      if (space) out += ' ';
      space = false;
      out += c;
    }
  }
  return out;
}

std::optional<int> json_year(const json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j[key];
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_string()) return extract_year(v.get<std::string>(), {-10000, 10000});
  return std::nullopt;
}

std::vector<std::string> read_nonempty_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!text::trim(line).empty()) out.push_back(line);
  }
  return out;
}

json parse_line(std::string_view line) {
  try {
    json j = json::parse(line);
    if (!j.is_object()) throw FormatError("record is not an object");
    return j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed record: ") + e.what());
  }
}

const char* status_name(AttributionStatus s) {
  switch (s) {
    case AttributionStatus::kParsed:
      return "parsed";
    case AttributionStatus::kUnparseable:
      return "unparseable";
    case AttributionStatus::kFailed:
      return "failed";
  }
  return "failed";
}

}  // namespace

AuthorRecord parse_author_string(std::string_view display, AuthorSource source, std::string id) {
  AuthorRecord r;
  r.id = std::move(id);
  r.source = source;
  std::string s(display);
  std::smatch m;
  if (std::regex_search(s, m, life_span_re())) {
    r.birth_year = std::stoi(m[1].str());
    if (m[2].matched) r.death_year = std::stoi(m[2].str());
  }
  for (auto it = std::sregex_iterator(s.begin(), s.end(), date_marker_re()); it != std::sregex_iterator(); ++it) {
    const char kind = static_cast<char>(std::tolower(static_cast<unsigned char>((*it)[2].str()[0])));
    const int year = std::stoi((*it)[3].str());
    if (kind == 'b') r.birth_year = year;
    if (kind == 'd') r.death_year = year;
  }
  s = strip_parenthesized(s);
  s = std::regex_replace(s, date_marker_re(), "$1");
  s = std::regex_replace(s, life_span_re(), "");
  std::string_view v = text::trim(collapse_spaces(s));
  while (!v.empty() && (v.back() == ',' || v.back() == ';')) v = text::trim(v.substr(0, v.size() - 1));
  r.name = std::string(v);
  return r;
}

std::string canonical_name(std::string_view name) {
  std::string s = text::to_lower(fold_diacritics(name));
  s = strip_parenthesized(s);
  s = std::regex_replace(s, date_marker_re(), "$1");
  std::string kept;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isdigit(u)) continue;
    if (c == ',' || std::isalpha(u) || u >= 0x80 || c == '\'') {
      kept += c;
    } else {
      kept += ' ';
    }
  }
  const auto comma = kept.find(',');
  if (comma != std::string::npos && kept.find(',', comma + 1) == std::string::npos) {
    const std::string last = collapse_spaces(kept.substr(0, comma));
    const std::string first = collapse_spaces(kept.substr(comma + 1));
    if (!last.empty() && !first.empty()) return first + " " + last;
  }
  std::replace(kept.begin(), kept.end(), ',', ' ');
  return collapse_spaces(kept);
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double name_distance(std::string_view a, std::string_view b) {
  const std::string ca = canonical_name(a);
  const std::string cb = canonical_name(b);
  const std::size_t n = std::max(ca.size(), cb.size());
  if (n == 0) return 0.0;
  return static_cast<double>(levenshtein(ca, cb)) / static_cast<double>(n);
}

DateRelation compare_dates(const AuthorRecord& a, const AuthorRecord& b) {
  bool shared = false;
  const auto check = [&](const std::optional<int>& x, const std::optional<int>& y) {
    if (!x || !y) return true;
    shared = true;
    return std::abs(*x - *y) <= 1;
  };
  const bool ok = check(a.birth_year, b.birth_year) & check(a.death_year, b.death_year);
  if (!shared) return DateRelation::kUnknown;
  return ok ? DateRelation::kAgree : DateRelation::kConflict;
}

MatchResult match_authors(std::span<const AuthorRecord> authority, std::span<const AuthorRecord> catalog,
                          const MatchThresholds& t) {
  if (!(t.pass2 < t.pass1)) throw InvalidArgument("pass2 threshold must be stricter than pass1");
  std::vector<std::string> canon_auth;
  for (const auto& a : authority) canon_auth.push_back(canonical_name(a.name));

  MatchResult result;
  std::vector<std::optional<AuthorMatch>> found(catalog.size());
  for (int pass = 1; pass <= 2; ++pass) {
    for (std::size_t c = 0; c < catalog.size(); ++c) {
      if (found[c]) continue;
      const std::string cc = canonical_name(catalog[c].name);
      std::optional<AuthorMatch> best;
      for (std::size_t a = 0; a < authority.size(); ++a) {
        const std::size_t n = std::max(cc.size(), canon_auth[a].size());
        const double d = n == 0 ? 0.0 : static_cast<double>(levenshtein(cc, canon_auth[a])) / static_cast<double>(n);
        const DateRelation rel = compare_dates(authority[a], catalog[c]);
        const bool admissible = pass == 1 ? d <= t.pass1 && rel == DateRelation::kAgree
                                          : d <= t.pass2 && rel != DateRelation::kConflict;
        if (!admissible) continue;
        if (!best || d < best->name_distance ||
            (d == best->name_distance && authority[a].id < best->authority_id)) {
          best = AuthorMatch{authority[a].id, catalog[c].id, pass, d, rel == DateRelation::kAgree};
        }
      }
      found[c] = best;
    }
  }
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    if (found[c]) {
      result.matches.push_back(*found[c]);
    } else {
      result.unmatched.push_back(catalog[c].id);
    }
  }
  return result;
}

std::string attribution_prompt(std::string_view title, std::string_view author) {
  return "When was the work " + std::string(title) + " by " + std::string(author) +
         " written? Answer just with the year.";
}

std::optional<int> extract_year(std::string_view s, YearRange plausible) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    const std::size_t len = j - i;
    if (len >= 3 && len <= 4) {
      const int v = std::stoi(std::string(s.substr(i, len)));
      if (plausible.contains(v)) return v;
    }
    i = j;
  }
  return std::nullopt;
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.url, m, url_re)) throw InvalidArgument("invalid endpoint url " + config_.url);
  origin_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
}

std::string HttpChatClient::complete(const std::string& prompt) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const json body = {{"model", config_.model},
                     {"temperature", config_.temperature},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  const auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw Error("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error("endpoint returned HTTP " + std::to_string(res->status));
  try {
    const json j = json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("unexpected response body: ") + e.what());
  }
}

std::vector<Work> read_works(const std::filesystem::path& path) {
  std::vector<Work> out;
  for (const auto& line : read_nonempty_lines(path)) {
    const json j = parse_line(line);
    Work w;
    w.id = j.value("id", "");
    w.title = j.value("title", "");
    w.author = j.value("author", "");
    if (w.id.empty()) throw FormatError("work record without id");
    if (j.contains("gold_years") && j["gold_years"].is_array()) {
      for (const auto& y : j["gold_years"]) {
        if (y.is_number_integer()) w.gold_years.push_back(y.get<int>());
      }
    }
    if (auto y = json_year(j, "gold_year")) w.gold_years.push_back(*y);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<AuthorRecord> read_author_records(const std::filesystem::path& path, AuthorSource source) {
  std::vector<AuthorRecord> out;
  for (const auto& line : read_nonempty_lines(path)) {
    const json j = parse_line(line);
    AuthorRecord r = parse_author_string(j.value("name", ""), source, j.value("id", ""));
    if (auto b = json_year(j, "birth_year")) r.birth_year = b;
    if (auto d = json_year(j, "death_year")) r.death_year = d;
    if (r.id.empty()) throw FormatError("author record without id");
    if (r.birth_year && r.death_year && !(*r.birth_year < *r.death_year)) {
      throw FormatError("author " + r.id + " has birth_year >= death_year");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string to_json_line(const DateAttribution& a) {
  json j = {{"work_id", a.work_id},
            {"raw_response", a.raw_response},
            {"status", status_name(a.status)},
            {"attempts", a.attempts},
            {"gold_years", a.gold_years}};
  j["predicted_year"] = a.predicted_year ? json(*a.predicted_year) : json(nullptr);
  if (!a.error.empty()) j["error"] = a.error;
  return j.dump();
}

DateAttribution attribution_from_json(std::string_view line) {
  const json j = parse_line(line);
  DateAttribution a;
  a.work_id = j.value("work_id", "");
  a.raw_response = j.value("raw_response", "");
  a.attempts = j.value("attempts", std::size_t{0});
  a.error = j.value("error", "");
  if (j.contains("predicted_year") && j["predicted_year"].is_number_integer()) {
    a.predicted_year = j["predicted_year"].get<int>();
  }
  if (j.contains("gold_years")) a.gold_years = j["gold_years"].get<std::vector<int>>();
  const std::string status = j.value("status", "failed");
  a.status = status == "parsed"        ? AttributionStatus::kParsed
             : status == "unparseable" ? AttributionStatus::kUnparseable
                                       : AttributionStatus::kFailed;
  return a;
}

std::vector<DateAttribution> attribute_dates(std::span<const Work> works, TextGenerationClient& client,
                                             const AttributeOptions& o) {
  std::map<std::string, DateAttribution> done;
  if (o.cache_path && std::filesystem::exists(*o.cache_path)) {
    for (const auto& line : read_nonempty_lines(*o.cache_path)) {
      DateAttribution a = attribution_from_json(line);
      if (a.status != AttributionStatus::kFailed) done[a.work_id] = std::move(a);
    }
  }
  std::vector<const Work*> todo;
  std::map<std::string, DateAttribution> results;
  for (const auto& w : works) {
    if (auto it = done.find(w.id); it != done.end()) {
      DateAttribution a = it->second;
      a.gold_years = w.gold_years;
      results[w.id] = std::move(a);
    } else {
      todo.push_back(&w);
    }
  }

  const auto sleep = o.sleep ? o.sleep : [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
  std::ofstream cache;
  if (o.cache_path) {
    cache.open(*o.cache_path, std::ios::app);
    if (!cache) throw Error("cannot append to " + o.cache_path->string());
  }
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  using Clock = std::chrono::steady_clock;
  Clock::time_point next_slot = Clock::now();

  const auto wait_for_slot = [&] {
    if (o.requests_per_second <= 0.0) return;
    Clock::time_point slot;
    {
      std::lock_guard lock(mu);
      slot = std::max(next_slot, Clock::now());
      next_slot = slot + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(1.0 / o.requests_per_second));
    }
    const double wait = std::chrono::duration<double>(slot - Clock::now()).count();
    if (wait > 0.0) sleep(wait);
  };

  const auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const Work& w = *todo[i];
      DateAttribution a;
      a.work_id = w.id;
      a.gold_years = w.gold_years;
      const std::string prompt = attribution_prompt(w.title, w.author);
      for (std::size_t attempt = 0; attempt <= o.max_retries; ++attempt) {
        if (attempt > 0) sleep(o.backoff_seconds * static_cast<double>(1u << (attempt - 1)));
        wait_for_slot();
        ++a.attempts;
        try {
          a.raw_response = client.complete(prompt);
          a.predicted_year = extract_year(a.raw_response, o.plausible);
          a.status = a.predicted_year ? AttributionStatus::kParsed : AttributionStatus::kUnparseable;
          a.error.clear();
          break;
        } catch (const std::exception& e) {
          a.status = AttributionStatus::kFailed;
          a.error = e.what();
        }
      }
      std::lock_guard lock(mu);
      if (cache.is_open()) {
        cache << to_json_line(a) << '\n';
        cache.flush();
      }
      results[w.id] = std::move(a);
    }
  };

  const std::size_t n_threads = std::clamp<std::size_t>(o.max_in_flight, 1, std::max<std::size_t>(todo.size(), 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<DateAttribution> out;
  out.reserve(results.size());
  for (auto& [id, a] : results) out.push_back(std::move(a));
  return out;
}

AttributionScore evaluate_attribution(std::span<const DateAttribution> attributions, int tolerance,
                                      std::optional<int> dq_delta) {
  if (tolerance < 0) throw InvalidArgument("tolerance must be non-negative");
  AttributionScore s;
  s.tolerance = tolerance;
  s.dq_delta = dq_delta;
  std::size_t gold = 0;
  for (const auto& a : attributions) {
    if (a.gold_years.empty()) continue;
    ++gold;
    if (!a.predicted_year) {
      ++s.n_scored;
      ++s.n_unparsed;
      continue;
    }
    int best = std::numeric_limits<int>::max();
    for (int g : a.gold_years) best = std::min(best, std::abs(*a.predicted_year - g));
    if (dq_delta && best > *dq_delta) {
      ++s.n_disqualified;
      continue;
    }
    ++s.n_scored;
    if (best <= tolerance) ++s.n_hits;
  }
  if (gold == 0) throw InvalidArgument("no gold-labeled attributions to evaluate");
  s.accuracy = s.n_scored == 0 ? 0.0 : static_cast<double>(s.n_hits) / static_cast<double>(s.n_scored);
  return s;
}

}  // namespace chronolm
