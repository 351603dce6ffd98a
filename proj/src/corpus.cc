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

#include "convmix/corpus.h"

#include <algorithm>
#include <charconv>
#include <deque>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "convmix/error.h"
#include "convmix/io.h"
#include "convmix/text.h"

namespace convmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string where(const fs::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no) + ": ";
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> cols;
  std::string col;
  while (in >> col) cols.push_back(col);
  return cols;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

Session session_from_json(const json& j) {
  Session s;
  s.conv_id = j.at("conv_id").get<std::string>();
  for (const auto& t : j.at("turns")) {
    Turn turn;
    turn.turn_id = t.at("turn_id").get<std::string>();
    turn.query = t.at("query").get<std::string>();
    if (auto it = t.find("origin_turn_id"); it != t.end() && !it->is_null()) {
      turn.origin_turn_id = it->get<std::string>();
    }
    s.turns.push_back(std::move(turn));
  }
  if (auto it = j.find("topics"); it != j.end() && !it->is_null()) {
    std::vector<TopicRange> ranges;
    for (const auto& r : *it) {
      if (!r.is_array() || r.size() != 2) {
        throw Error(ErrorKind::kValidation,
                    "topic range must be a [start, end] pair");
      }
      ranges.push_back({r[0].get<int>(), r[1].get<int>()});
    }
    s.topics = std::move(ranges);
  }
  return s;
}

json session_to_json(const Session& s) {
  json j;
  j["conv_id"] = s.conv_id;
  json turns = json::array();
  for (const auto& t : s.turns) {
    json jt = {{"turn_id", t.turn_id}, {"query", t.query}};
    if (t.origin_turn_id) jt["origin_turn_id"] = *t.origin_turn_id;
    turns.push_back(std::move(jt));
  }
  j["turns"] = std::move(turns);
  if (s.topics) {
    json ranges = json::array();
    for (const auto& r : *s.topics) ranges.push_back({r.first, r.last});
    j["topics"] = std::move(ranges);
  }
  return j;
}

}  // namespace

std::optional<int> turn_ordinal(const std::string& turn_id) {
  auto pos = turn_id.rfind('_');
  if (pos == std::string::npos || pos == 0 || pos + 1 == turn_id.size()) {
    return std::nullopt;
  }
  int ordinal = 0;
  if (!parse_number(turn_id.substr(pos + 1), ordinal)) return std::nullopt;
  return ordinal;
}

std::string make_turn_id(const std::string& conv_id, int ordinal) {
  return conv_id + "_" + std::to_string(ordinal);
}

void validate_session(const Session& session) {
  const std::string& id = session.conv_id;
  if (id.empty()) throw Error(ErrorKind::kValidation, "empty conv_id");
  if (session.turns.empty()) {
    throw Error(ErrorKind::kValidation, "session " + id + " has no turns");
  }
  int previous = 0;
  for (const auto& turn : session.turns) {
    auto ordinal = turn_ordinal(turn.turn_id);
    if (!ordinal || turn.turn_id.substr(0, turn.turn_id.rfind('_')) != id) {
      throw Error(ErrorKind::kValidation,
                  "turn id '" + turn.turn_id + "' is not '" + id +
                      "_<ordinal>'");
    }
    if (*ordinal < 1 || *ordinal <= previous) {
      throw Error(ErrorKind::kValidation,
                  "turn ordinals must start at 1 and strictly increase in " +
                      id);
    }
    previous = *ordinal;
    if (trim(turn.query).empty()) {
      throw Error(ErrorKind::kValidation,
                  "turn " + turn.turn_id + " has an empty query");
    }
  }
  if (session.topics) {
    const auto& ranges = *session.topics;
    const int n = static_cast<int>(session.turns.size());
    int expected = 1;
    for (const auto& r : ranges) {
      if (r.first != expected || r.last < r.first || r.last > n) {
        throw Error(ErrorKind::kValidation,
                    "topic ranges of " + id + " do not partition turns 1.." +
                        std::to_string(n));
      }
      expected = r.last + 1;
    }
    if (expected != n + 1) {
      throw Error(ErrorKind::kValidation,
                  "topic ranges of " + id + " do not cover every turn");
    }
  }
}

Collection::Collection(std::vector<Document> documents) {
  for (auto& d : documents) add(std::move(d));
}

void Collection::add(Document doc) {
  auto [it, inserted] = id_index_.emplace(doc.doc_id, documents_.size());
  if (!inserted) {
    throw Error(ErrorKind::kDuplicateKey, "duplicate doc_id " + doc.doc_id);
  }
  documents_.push_back(std::move(doc));
}

const Document* Collection::find(const std::string& doc_id) const {
  auto it = id_index_.find(doc_id);
  return it == id_index_.end() ? nullptr : &documents_[it->second];
}

const Document& Collection::at(const std::string& doc_id) const {
  const Document* d = find(doc_id);
  if (!d) throw Error(ErrorKind::kResolution, "unknown doc_id " + doc_id);
  return *d;
}

void RelevanceJudgments::set(const std::string& turn_id,
                             const std::string& doc_id, int grade) {
  if (grade < 0) {
    throw Error(ErrorKind::kValidation,
                "negative grade for " + turn_id + " " + doc_id);
  }
  entries_[turn_id][doc_id] = grade;
}

const RelevanceJudgments::Grades* RelevanceJudgments::find(
    const std::string& turn_id) const {
  auto it = entries_.find(turn_id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<std::string> RelevanceJudgments::relevant(
    const std::string& turn_id) const {
  std::vector<std::string> out;
  if (const Grades* g = find(turn_id)) {
    for (const auto& [doc, grade] : *g) {
      if (grade >= 1) out.push_back(doc);
    }
  }
  return out;
}

void RelevanceJudgments::check_resolvable(const Collection& collection) const {
  std::set<std::string> missing;
  for (const auto& [turn, grades] : entries_) {
    for (const auto& [doc, grade] : grades) {
      if (!collection.find(doc)) missing.insert(doc);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& d : missing) list += (list.empty() ? "" : ", ") + d;
    throw Error(ErrorKind::kResolution,
                "qrels reference unknown documents: " + list);
  }
}

std::map<std::string, std::vector<std::string>> RunFile::ranked_lists() const {
  std::map<std::string, std::vector<const RunRow*>> by_turn;
  for (const auto& row : rows) by_turn[row.turn_id].push_back(&row);
  std::map<std::string, std::vector<std::string>> out;
  for (auto& [turn, list] : by_turn) {
    std::stable_sort(list.begin(), list.end(),
                     [](const RunRow* a, const RunRow* b) {
                       return a->rank < b->rank;
                     });
    auto& docs = out[turn];
    for (const RunRow* r : list) docs.push_back(r->doc_id);
  }
  return out;
}

void validate_run(const RunFile& run) {
  std::map<std::string, std::vector<const RunRow*>> by_turn;
  for (const auto& row : run.rows) by_turn[row.turn_id].push_back(&row);
  for (auto& [turn, list] : by_turn) {
    std::stable_sort(list.begin(), list.end(),
                     [](const RunRow* a, const RunRow* b) {
                       return a->rank < b->rank;
                     });
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i]->rank != static_cast<int>(i) + 1) {
        throw Error(ErrorKind::kValidation,
                    "ranks for " + turn + " are not 1..K contiguous");
      }
      if (i > 0 && list[i]->score > list[i - 1]->score) {
        throw Error(ErrorKind::kValidation,
                    "scores for " + turn + " increase at rank " +
                        std::to_string(list[i]->rank));
      }
    }
  }
}

ConcatQuery concat_session(const Session& session, int upto,
                           std::size_t turn_limit, std::size_t session_limit) {
  const int n = static_cast<int>(session.turns.size());
  if (upto < 1 || upto > n) {
    throw Error(ErrorKind::kIndex, "turn " + std::to_string(upto) +
                                       " out of range 1.." +
                                       std::to_string(n) + " in " +
                                       session.conv_id);
  }
  std::deque<std::vector<std::string>> turns;
  for (int i = 0; i < upto; ++i) {
    auto tokens = tokenize(session.turns[i].query);
    if (tokens.size() > turn_limit) tokens.resize(turn_limit);
    turns.push_back(std::move(tokens));
  }
  auto total = [&] {
    std::size_t sum = turns.size() - 1;  // separators
    for (const auto& t : turns) sum += t.size();
    return sum;
  };
  while (turns.size() > 1 && total() > session_limit) turns.pop_front();

  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) tokens.emplace_back(kSeparatorToken);
    tokens.insert(tokens.end(), turns[i].begin(), turns[i].end());
  }
  if (tokens.size() > session_limit) {
    tokens.erase(tokens.begin(),
                 tokens.begin() +
                     static_cast<std::ptrdiff_t>(tokens.size() - session_limit));
  }
  ConcatQuery out;
  out.turn_id = session.turns[upto - 1].turn_id;
  out.token_count = tokens.size();
  out.text = join_tokens(tokens);
  return out;
}

std::vector<Session> load_sessions(const fs::path& path) {
  auto in = open_input(path);
  std::vector<Session> sessions;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Session s;
    try {
      s = session_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, where(path, line_no) + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), where(path, line_no) + e.what());
    }
    try {
      validate_session(s);
    } catch (const Error& e) {
      throw Error(e.kind(), where(path, line_no) + e.what());
    }
    if (!seen.insert(s.conv_id).second) {
      throw Error(ErrorKind::kDuplicateKey,
                  where(path, line_no) + "duplicate conv_id " + s.conv_id);
    }
    sessions.push_back(std::move(s));
  }
  return sessions;
}

void write_sessions(const std::vector<Session>& sessions,
                    const fs::path& path) {
  auto out = open_output(path);
  for (const auto& s : sessions) out << session_to_json(s).dump() << '\n';
}

Collection load_collection(const fs::path& path) {
  auto in = open_input(path);
  Collection collection;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorKind::kParse,
                  where(path, line_no) + "expected doc_id<TAB>text");
    }
    try {
      collection.add({line.substr(0, tab), line.substr(tab + 1)});
    } catch (const Error& e) {
      throw Error(e.kind(), where(path, line_no) + e.what());
    }
  }
  return collection;
}

void write_collection(const Collection& collection, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& d : collection.documents()) {
    out << d.doc_id << '\t' << d.text << '\n';
  }
}

RelevanceJudgments load_qrels(const fs::path& path) {
  auto in = open_input(path);
  RelevanceJudgments qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != 4) {
      throw Error(ErrorKind::kParse, where(path, line_no) +
                                         "expected 4 columns, got " +
                                         std::to_string(cols.size()));
    }
    int grade = 0;
    if (!parse_number(cols[3], grade)) {
      throw Error(ErrorKind::kParse,
                  where(path, line_no) + "bad grade '" + cols[3] + "'");
    }
    if (grade < 0) {
      throw Error(ErrorKind::kValidation,
                  where(path, line_no) + "negative grade " + cols[3]);
    }
    if (const auto* g = qrels.find(cols[0]); g && g->count(cols[2])) {
      throw Error(ErrorKind::kDuplicateKey, where(path, line_no) +
                                                "duplicate judgment " +
                                                cols[0] + " " + cols[2]);
    }
    qrels.set(cols[0], cols[2], grade);
  }
  return qrels;
}

void write_qrels(const RelevanceJudgments& qrels, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& [turn, grades] : qrels.entries()) {
    for (const auto& [doc, grade] : grades) {
      out << turn << " 0 " << doc << ' ' << grade << '\n';
    }
  }
}

RunFile load_run(const fs::path& path) {
  auto in = open_input(path);
  RunFile run;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != 6) {
      throw Error(ErrorKind::kParse, where(path, line_no) +
                                         "expected 6 columns, got " +
                                         std::to_string(cols.size()));
    }
    RunRow row;
    row.turn_id = cols[0];
    row.doc_id = cols[2];
    row.tag = cols[5];
    if (!parse_number(cols[3], row.rank) || !parse_real(cols[4], row.score)) {
      throw Error(ErrorKind::kParse,
                  where(path, line_no) + "bad rank or score");
    }
    run.rows.push_back(std::move(row));
  }
  try {
    validate_run(run);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
  return run;
}

void write_run(const RunFile& run, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& r : run.rows) {
    out << r.turn_id << " Q0 " << r.doc_id << ' ' << r.rank << ' '
        << format_double(r.score) << ' ' << r.tag << '\n';
  }
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace convmix
