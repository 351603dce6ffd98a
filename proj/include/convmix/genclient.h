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

// Text generation client. Two backends: a chat/completion HTTP endpoint and
// an offline mock whose output is a pure function of (prompt, seed).

#ifndef CONVMIX_GENCLIENT_H_
#define CONVMIX_GENCLIENT_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace convmix {

inline constexpr double kDefaultTemperature = 0.8;

struct GenRequest {
  std::string prompt;
  double temperature = kDefaultTemperature;
  int max_new_tokens = 2048;
  std::optional<std::uint64_t> seed;
};

struct GenResponse {
  std::string text;
  std::string backend_id;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual GenResponse complete(const GenRequest& request) = 0;
  virtual std::string id() const = 0;
};

// Validates the request, calls the backend and rejects empty completions
// (kEmptyGeneration). Invalid requests raise kValidation.
GenResponse generate(const GenRequest& request, Backend& backend);

// Recognizes the two augmentation prompt templates and answers them with
// mock_paraphrase_queries / mock_rewrite_document; any other prompt gets a
// single paraphrase of itself.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::uint64_t default_seed = 0)
      : default_seed_(default_seed) {}

  GenResponse complete(const GenRequest& request) override;
  std::string id() const override { return "mock"; }

 private:
  std::uint64_t default_seed_;
};

// Exactly m pairwise-distinct single-line variants, none equal to the input.
// Capitalized words and words containing digits are never altered. Variation
// comes from seeded synonym substitution, template rotation and at most one
// adjacent-word swap; inputs too small to vary fall back to suffix-tagged
// variants.
std::vector<std::string> mock_paraphrase_queries(std::string_view query,
                                                 std::string_view context,
                                                 int m, std::uint64_t seed);
std::vector<std::string> mock_rewrite_document(std::string_view document,
                                               int m, std::uint64_t seed);

// The mock's synonym group containing `word` (lowercase), including the word
// itself; empty when the word has no synonyms.
const std::vector<std::string>& mock_synonyms(std::string_view word);

// --- remote backend ---------------------------------------------------------

struct HttpResponse {
  int status = 0;  // 0: connection failure
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

// cpp-httplib client bound to the scheme://host[:port] part of a base URL.
class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const std::string& base_url,
                         std::chrono::seconds timeout = std::chrono::seconds(120));
  HttpResponse post(const std::string& path, const std::string& body,
                    const std::map<std::string, std::string>& headers) override;

 private:
  std::string origin_;
  std::chrono::seconds timeout_;
};

enum class WireAdapter {
  // POST <base>/chat/completions {model, messages, temperature, max_tokens}
  kChat,
  // POST <base>/completions {model, prompt, temperature, max_tokens}
  kCompletion,
};

struct RemoteConfig {
  std::string base_url;
  std::string api_key;
  std::string model;
  WireAdapter adapter = WireAdapter::kChat;
  int retry_limit = 3;
  std::chrono::milliseconds initial_backoff{500};
  int max_concurrency = 4;

  // Reads CONVMIX_GEN_BASE_URL, CONVMIX_GEN_API_KEY, CONVMIX_GEN_MODEL.
  // Throws kConfig when the base URL or model is unset.
  static RemoteConfig from_env();
};

// Splits "http://host:8080/v1" into ("http://host:8080", "/v1").
std::pair<std::string, std::string> split_base_url(const std::string& url);

class RemoteBackend : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  // With no transport an HttpTransport for config.base_url is created.
  explicit RemoteBackend(RemoteConfig config,
                         std::unique_ptr<Transport> transport = nullptr,
                         Sleeper sleeper = nullptr);

  // Retries status 0, 408, 429 and 5xx with exponential backoff, at most
  // 1 + retry_limit attempts. Other statuses fail immediately. Throws
  // kTransport.
  GenResponse complete(const GenRequest& request) override;
  std::string id() const override { return "remote:" + config_.model; }

  std::string request_body(const GenRequest& request) const;
  // Accepts {text}, chat choices[0].message.content or choices[0].text.
  static std::string extract_text(const std::string& body);

  std::uint64_t attempts() const { return attempts_.load(); }

 private:
  RemoteConfig config_;
  std::string path_prefix_;
  std::unique_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> slots_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace convmix

#endif  // CONVMIX_GENCLIENT_H_
