// Copyright 2026 The ConvMix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "convmix/genclient.h"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>
#include <thread>
#include <unordered_map>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "convmix/error.h"
#include "convmix/prompts.h"
#include "convmix/random.h"
#include "convmix/text.h"

namespace convmix {

using nlohmann::json;

GenResponse generate(const GenRequest& request, Backend& backend) {
  if (trim(request.prompt).empty()) {
    throw Error(ErrorKind::kValidation, "generation prompt is empty");
  }
  if (!(request.temperature >= 0.0) || request.max_new_tokens <= 0) {
    throw Error(ErrorKind::kValidation,
                "temperature must be >= 0 and max_new_tokens > 0");
  }
  GenResponse response = backend.complete(request);
  if (trim(response.text).empty()) {
    throw Error(ErrorKind::kEmptyGeneration,
                "backend " + backend.id() + " returned an empty completion");
  }
  return response;
}

// --- mock -------------------------------------------------------------------

namespace {

const std::vector<std::vector<std::string>>& synonym_groups() {
  static const std::vector<std::vector<std::string>> groups = {
      // general
      {"wrote", "authored", "penned"},
      {"who", "which person"},
      {"big", "large", "huge", "vast"},
      {"small", "little", "tiny"},
      {"famous", "renowned", "celebrated", "well known"},
      {"important", "significant", "notable"},
      {"city", "town", "municipality"},
      {"country", "nation", "state"},
      {"start", "begin", "commence"},
      {"end", "finish", "conclude"},
      {"show", "display", "present"},
      {"buy", "purchase", "acquire"},
      {"find", "locate", "discover"},
      {"help", "assist", "aid"},
      {"happened", "occurred", "took place"},
      {"main", "primary", "principal"},
      {"tell", "explain", "describe"},
      {"about", "regarding", "concerning"},
      {"good", "great", "fine"},
      {"many", "numerous", "plenty of"},
      {"built", "constructed", "erected"},
      {"made", "produced", "created"},
      {"near", "close to", "next to"},
      {"biggest", "largest", "greatest"},
      {"movie", "film", "picture"},
      {"song", "track", "tune"},
      {"book", "novel", "volume"},
      {"car", "automobile", "vehicle"},
      {"house", "home", "residence"},
      {"children", "kids", "youngsters"},
      {"doctor", "physician", "medic"},
      {"job", "position", "role"},
      // conversational topics
      {"people", "residents", "inhabitants", "citizens"},
      {"live", "reside", "dwell"},
      {"founded", "established", "settled"},
      {"first", "originally", "initially"},
      {"jobs", "work", "employment", "occupations"},
      {"pay", "earnings", "wages", "salaries"},
      {"weather", "temperature", "forecast"},
      {"rain", "rainfall", "showers"},
      {"food", "dishes", "meals", "cooking"},
      {"eat", "taste", "enjoy", "savor"},
      // document vocabulary
      {"population", "headcount"},
      {"census", "enumeration"},
      {"history", "chronicle"},
      {"heritage", "legacy"},
      {"economy", "commerce"},
      {"industry", "manufacturing"},
      {"climate", "atmosphere"},
      {"humidity", "moisture"},
      {"cuisine", "gastronomy"},
      {"recipe", "preparation"},
  };
  return groups;
}

const std::unordered_map<std::string, std::size_t>& synonym_index() {
  static const auto index = [] {
    std::unordered_map<std::string, std::size_t> m;
    const auto& groups = synonym_groups();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (const auto& w : groups[g]) m.emplace(w, g);
    }
    return m;
  }();
  return index;
}

const std::vector<std::string> kQueryTemplates = {
    "{q}?",
    "could you tell me {q}?",
    "i would like to know {q}.",
    "{q}, please?",
    "do you know {q}?",
    "please let me know {q}.",
    "can you find out {q}?",
    "i am wondering {q}.",
};

const std::vector<std::string> kDocumentTemplates = {
    "{q}",
    "In other words, {q}",
    "To put it another way, {q}",
    "Put simply, {q}",
    "Stated differently, {q}",
    "{q} This summarizes the key facts.",
    "In summary, {q}",
    "Restated, {q}",
};

struct Word {
  std::string lead;   // punctuation before the core
  std::string core;
  std::string trail;  // punctuation after the core
  bool is_protected = false;
};

bool is_word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::vector<Word> split_words(std::string_view text) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
      ++i;
    if (start == i) break;
    std::string_view raw = text.substr(start, i - start);
    std::size_t b = 0, e = raw.size();
    while (b < e && !is_word_char(raw[b])) ++b;
    while (e > b && !is_word_char(raw[e - 1])) --e;
    Word w{std::string(raw.substr(0, b)), std::string(raw.substr(b, e - b)),
           std::string(raw.substr(e)), false};
    w.is_protected =
        !w.core.empty() &&
        (std::isupper(static_cast<unsigned char>(w.core[0])) ||
         std::any_of(w.core.begin(), w.core.end(),
                     [](unsigned char c) { return std::isdigit(c); }));
    words.push_back(std::move(w));
  }
  return words;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

std::string strip_question_mark(std::string s) {
  while (!s.empty() && (s.back() == '?' || s.back() == ' ')) s.pop_back();
  return s;
}

// One candidate variant of `text`. `keep` is the index of a content word that
// is never substituted so every variant shares a token with its source.
std::string vary(const std::vector<Word>& source, std::size_t keep,
                 double substitution_rate, Rng& rng) {
  std::vector<Word> words = source;
  const auto& index = synonym_index();
  const auto& groups = synonym_groups();
  for (std::size_t i = 0; i < words.size(); ++i) {
    Word& w = words[i];
    if (w.is_protected || i == keep || w.core.empty()) continue;
    auto it = index.find(lower(w.core));
    if (it == index.end()) continue;
    if (uniform_unit(rng) >= substitution_rate) continue;
    const auto& group = groups[it->second];
    std::string replacement = group[uniform_index(rng, group.size())];
    w.core = replacement;
  }
  // Bounded reordering: at most one swap of adjacent unprotected words.
  if (words.size() >= 3 && uniform_unit(rng) < 0.25) {
    std::size_t i = uniform_index(rng, words.size() - 1);
    if (!words[i].is_protected && !words[i + 1].is_protected &&
        words[i].trail.empty() && words[i + 1].lead.empty()) {
      std::swap(words[i].core, words[i + 1].core);
    }
  }
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w.lead + w.core + w.trail;
  }
  return out;
}

std::size_t anchor_word(const std::vector<Word>& words, Rng& rng) {
  std::vector<std::size_t> content;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!words[i].core.empty()) content.push_back(i);
  }
  if (content.empty()) return words.size();
  return content[uniform_index(rng, content.size())];
}

std::vector<std::string> make_variants(std::string_view source,
                                       const std::vector<std::string>& templates,
                                       bool question, double substitution_rate,
                                       int m, std::uint64_t seed) {
  if (m < 1) throw Error(ErrorKind::kValidation, "m must be >= 1");
  const std::string src = one_line(std::string(trim(source)));
  const std::string body = question ? strip_question_mark(src) : src;
  const auto words = split_words(body);
  Rng anchor_rng(mix_seed(seed, fnv1a(src)));
  const std::size_t keep = anchor_word(words, anchor_rng);

  std::vector<std::string> out;
  std::set<std::string> seen = {src};
  const int max_attempts = 30 * m + 30;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(out.size()) < m;
       ++attempt) {
    Rng rng(mix_seed(mix_seed(seed, fnv1a(src)), static_cast<std::uint64_t>(attempt)));
    std::string varied = vary(words, keep, substitution_rate, rng);
    const std::string& tmpl =
        templates[(static_cast<std::size_t>(attempt) + uniform_index(rng, 2)) %
                  templates.size()];
    std::string candidate =
        render_template(tmpl, {{"q", varied}});
    if (seen.insert(candidate).second) out.push_back(std::move(candidate));
  }
  for (int tag = 1; static_cast<int>(out.size()) < m; ++tag) {
    std::string candidate = src + " (variant " + std::to_string(tag) + ")";
    if (seen.insert(candidate).second) out.push_back(std::move(candidate));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& mock_synonyms(std::string_view word) {
  static const std::vector<std::string> kEmpty;
  const auto& index = synonym_index();
  auto it = index.find(std::string(word));
  return it == index.end() ? kEmpty : synonym_groups()[it->second];
}

std::vector<std::string> mock_paraphrase_queries(std::string_view query,
                                                 std::string_view context,
                                                 int m, std::uint64_t seed) {
  return make_variants(query, kQueryTemplates, true, 0.5, m,
                       mix_seed(seed, fnv1a(context)));
}

std::vector<std::string> mock_rewrite_document(std::string_view document,
                                               int m, std::uint64_t seed) {
  return make_variants(document, kDocumentTemplates, false, 0.5, m, seed);
}

GenResponse MockBackend::complete(const GenRequest& request) {
  const std::uint64_t seed = request.seed.value_or(default_seed_);
  std::string text;
  if (auto q = parse_query_prompt(request.prompt)) {
    for (const auto& v : mock_paraphrase_queries(q->query, q->context, q->k, seed)) {
      text += v + "\n";
    }
  } else if (auto d = parse_document_prompt(request.prompt)) {
    auto variants = mock_rewrite_document(d->document, d->k,
                                          mix_seed(seed, fnv1a(d->query)));
    for (std::size_t i = 0; i < variants.size(); ++i) {
      text += "document" + std::to_string(i + 1) + ": " + variants[i] + "\n";
    }
  } else {
    text = mock_paraphrase_queries(request.prompt, "", 1, seed).front();
  }
  return {text, id()};
}

// --- remote -----------------------------------------------------------------

std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme = url.find("://");
  std::size_t host_start = scheme == std::string::npos ? 0 : scheme + 3;
  auto slash = url.find('/', host_start);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

HttpTransport::HttpTransport(const std::string& base_url,
                             std::chrono::seconds timeout)
    : origin_(split_base_url(base_url).first), timeout_(timeout) {}

HttpResponse HttpTransport::post(
    const std::string& path, const std::string& body,
    const std::map<std::string, std::string>& headers) {
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto result = client.Post(path, h, body, "application/json");
  if (!result) return {0, httplib::to_string(result.error())};
  return {result->status, result->body};
}

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  c.base_url = get("CONVMIX_GEN_BASE_URL");
  c.api_key = get("CONVMIX_GEN_API_KEY");
  c.model = get("CONVMIX_GEN_MODEL");
  if (c.base_url.empty() || c.model.empty()) {
    throw Error(ErrorKind::kConfig,
                "remote generation needs CONVMIX_GEN_BASE_URL and "
                "CONVMIX_GEN_MODEL");
  }
  return c;
}

RemoteBackend::RemoteBackend(RemoteConfig config,
                             std::unique_ptr<Transport> transport,
                             Sleeper sleeper)
    : config_(std::move(config)),
      path_prefix_(split_base_url(config_.base_url).second),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      slots_(std::clamp(config_.max_concurrency, 1, 1024)) {
  if (!transport_) transport_ = std::make_unique<HttpTransport>(config_.base_url);
  if (!sleeper_) {
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (config_.retry_limit < 0) {
    throw Error(ErrorKind::kConfig, "retry limit must be >= 0");
  }
}

std::string RemoteBackend::request_body(const GenRequest& request) const {
  json body = {{"model", config_.model},
               {"temperature", request.temperature},
               {"max_tokens", request.max_new_tokens}};
  if (config_.adapter == WireAdapter::kChat) {
    body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
  } else {
    body["prompt"] = request.prompt;
  }
  if (request.seed) body["seed"] = *request.seed;
  return body.dump();
}

std::string RemoteBackend::extract_text(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kTransport,
                std::string("unparseable generation response: ") + e.what());
  }
  if (j.contains("text") && j["text"].is_string()) return j["text"];
  if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
    const json& c = j["choices"][0];
    if (c.contains("message") && c["message"].contains("content") &&
        c["message"]["content"].is_string()) {
      return c["message"]["content"];
    }
    if (c.contains("text") && c["text"].is_string()) return c["text"];
  }
  throw Error(ErrorKind::kTransport, "generation response has no text field");
}

GenResponse RemoteBackend::complete(const GenRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  const std::string path =
      path_prefix_ + (config_.adapter == WireAdapter::kChat ? "/chat/completions"
                                                            : "/completions");
  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) {
    headers["Authorization"] = "Bearer " + config_.api_key;
  }
  const std::string body = request_body(request);
  auto backoff = config_.initial_backoff;
  HttpResponse last;
  for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
    if (attempt > 0) {
      sleeper_(backoff);
      backoff *= 2;
    }
    attempts_.fetch_add(1);
    last = transport_->post(path, body, headers);
    if (last.status == 200) return {extract_text(last.body), id()};
    const bool transient = last.status == 0 || last.status == 408 ||
                           last.status == 429 || last.status >= 500;
    if (!transient) break;
  }
  throw Error(ErrorKind::kTransport,
              "generation request failed with status " +
                  std::to_string(last.status) + ": " +
                  last.body.substr(0, 200));
}

}  // namespace convmix
