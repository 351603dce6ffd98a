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

// Sessions, collections, relevance judgments and run files, plus the
// session concatenation that turns a conversation prefix into one query.

#ifndef CONVMIX_CORPUS_H_
#define CONVMIX_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace convmix {

inline constexpr std::size_t kTurnTokenLimit = 64;
inline constexpr std::size_t kSessionTokenLimit = 512;
inline constexpr std::size_t kDocumentTokenLimit = 384;

struct Turn {
  std::string turn_id;  // "<conv_id>_<ordinal>"
  std::string query;
  // Set on derived sessions (topic shuffle, query-side folds).
  std::optional<std::string> origin_turn_id;

  bool operator==(const Turn&) const = default;
};

// 1-based inclusive turn range.
struct TopicRange {
  int first = 1;
  int last = 1;

  bool operator==(const TopicRange&) const = default;
};

struct Session {
  std::string conv_id;
  std::vector<Turn> turns;
  std::optional<std::vector<TopicRange>> topics;

  bool operator==(const Session&) const = default;
};

// Splits "<conv_id>_<ordinal>" at the last underscore. Returns the ordinal,
// or nothing when the id does not have that shape.
std::optional<int> turn_ordinal(const std::string& turn_id);

std::string make_turn_id(const std::string& conv_id, int ordinal);

// Throws kValidation when an invariant of Session/Turn is violated.
void validate_session(const Session& session);

struct Document {
  std::string doc_id;
  std::string text;
};

class Collection {
 public:
  Collection() = default;
  explicit Collection(std::vector<Document> documents);

  // Throws kDuplicateKey.
  void add(Document doc);

  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }

  const Document* find(const std::string& doc_id) const;
  // Throws kResolution for unknown ids.
  const Document& at(const std::string& doc_id) const;

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> id_index_;
};

// turn_id -> doc_id -> grade. Ordered maps keep every derived artifact in a
// stable order.
class RelevanceJudgments {
 public:
  using Grades = std::map<std::string, int>;

  // Throws kValidation on negative grades.
  void set(const std::string& turn_id, const std::string& doc_id, int grade);

  const std::map<std::string, Grades>& entries() const { return entries_; }
  const Grades* find(const std::string& turn_id) const;
  bool contains(const std::string& turn_id) const {
    return entries_.count(turn_id) > 0;
  }

  // Doc ids graded >= 1 for the turn, ascending.
  std::vector<std::string> relevant(const std::string& turn_id) const;

  // Every doc id must resolve. Throws kResolution naming the offenders.
  void check_resolvable(const Collection& collection) const;

  bool operator==(const RelevanceJudgments&) const = default;

 private:
  std::map<std::string, Grades> entries_;
};

struct RunRow {
  std::string turn_id;
  std::string doc_id;
  int rank = 0;
  double score = 0.0;
  std::string tag;

  bool operator==(const RunRow&) const = default;
};

struct RunFile {
  std::vector<RunRow> rows;

  // turn_id -> doc ids in rank order.
  std::map<std::string, std::vector<std::string>> ranked_lists() const;

  bool operator==(const RunFile&) const = default;
};

// Throws kValidation when ranks are not 1..K contiguous per turn or scores
// increase with rank.
void validate_run(const RunFile& run);

struct ConcatQuery {
  std::string turn_id;
  std::string text;
  std::size_t token_count = 0;
};

// Concatenates turns 1..upto (1-based). Each turn is cut to turn_limit
// tokens and turns are joined with [SEP]. Whole oldest turns are dropped
// until the total fits session_limit; the current turn is never dropped.
// Throws kIndex when upto is out of range.
ConcatQuery concat_session(const Session& session, int upto,
                           std::size_t turn_limit = kTurnTokenLimit,
                           std::size_t session_limit = kSessionTokenLimit);

// Loaders. All throw kParse with "path:line" context on malformed input.
std::vector<Session> load_sessions(const std::filesystem::path& path);
void write_sessions(const std::vector<Session>& sessions,
                    const std::filesystem::path& path);
Collection load_collection(const std::filesystem::path& path);
void write_collection(const Collection& collection,
                      const std::filesystem::path& path);
RelevanceJudgments load_qrels(const std::filesystem::path& path);
void write_qrels(const RelevanceJudgments& qrels,
                 const std::filesystem::path& path);
RunFile load_run(const std::filesystem::path& path);
void write_run(const RunFile& run, const std::filesystem::path& path);

// Shortest representation that round-trips through strtod.
std::string format_double(double value);

}  // namespace convmix

#endif  // CONVMIX_CORPUS_H_
