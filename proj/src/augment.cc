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

#include "convmix/augment.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <regex>
#include <tuple>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "convmix/io.h"
#include "convmix/parallel.h"
#include "convmix/prompts.h"
#include "convmix/random.h"
#include "convmix/text.h"

namespace convmix {

namespace fs = std::filesystem;
using nlohmann::json;

char side_code(Side side) { return side == Side::kQuery ? 'Q' : 'D'; }

Side parse_side(std::string_view code) {
  if (code == "Q" || code == "q") return Side::kQuery;
  if (code == "D" || code == "d") return Side::kDocument;
  throw Error(ErrorKind::kParse, "unknown side '" + std::string(code) + "'");
}

bool sample_key_less(const AugmentedSample& a, const AugmentedSample& b) {
  return std::tie(a.origin_turn_id, a.side, a.doc_id, a.fold, a.query_text,
                  a.doc_text) < std::tie(b.origin_turn_id, b.side, b.doc_id,
                                         b.fold, b.query_text, b.doc_text);
}

std::vector<std::string> parse_all_variants(std::string_view raw) {
  static const std::regex kMarker(R"(^\s*(\d+[\.\)]|document\d+[:\.]?|-)\s*)",
                                  std::regex::icase);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    std::string line(raw.substr(pos, nl - pos));
    line = std::regex_replace(line, kMarker, "",
                              std::regex_constants::format_first_only);
    std::string cleaned(trim(line));
    if (!cleaned.empty()) out.push_back(std::move(cleaned));
    pos = nl + 1;
  }
  return out;
}

std::vector<std::string> parse_variants(std::string_view raw, int m) {
  auto all = parse_all_variants(raw);
  if (static_cast<int>(all.size()) < m) {
    throw UnderGenerationError("expected " + std::to_string(m) +
                                   " variants, parsed " +
                                   std::to_string(all.size()),
                               std::move(all));
  }
  all.resize(static_cast<std::size_t>(m));
  return all;
}

namespace {

std::vector<std::string> context_queries(std::span<const Turn> context) {
  std::vector<std::string> out;
  out.reserve(context.size());
  for (const auto& t : context) out.push_back(t.query);
  return out;
}

GenRequest make_request(std::string prompt, int m,
                        const GenerationOptions& options) {
  if (m < 1) throw Error(ErrorKind::kValidation, "m must be >= 1");
  GenRequest req;
  req.prompt = std::move(prompt);
  req.temperature = options.temperature;
  req.max_new_tokens = options.max_new_tokens;
  req.seed = options.seed;
  return req;
}

std::string origin_id(const Turn& t) {
  return t.origin_turn_id.value_or(t.turn_id);
}

}  // namespace

VariantSet reformulate_query(const Turn& turn, std::span<const Turn> context,
                             int m, Backend& backend,
                             const GenerationOptions& options) {
  GenRequest req = make_request(
      render_query_prompt(turn.query, context_queries(context), m), m, options);
  GenResponse resp = generate(req, backend);
  VariantSet set;
  set.origin_turn_id = turn.turn_id;
  set.side = Side::kQuery;
  set.variants = parse_variants(resp.text, m);
  return set;
}

VariantSet rewrite_document(const Document& doc, const Turn& turn,
                            std::span<const Turn> context, int m,
                            Backend& backend,
                            const GenerationOptions& options) {
  GenRequest req = make_request(
      render_document_prompt(doc.text, turn.query, context_queries(context), m),
      m, options);
  GenResponse resp = generate(req, backend);
  std::vector<std::string> kept;
  for (auto& v : parse_all_variants(resp.text)) {
    if (v != doc.text) kept.push_back(std::move(v));
  }
  if (static_cast<int>(kept.size()) < m) {
    throw UnderGenerationError(
        "document " + doc.doc_id + ": " + std::to_string(kept.size()) +
            " usable rewrites of " + std::to_string(m) + " requested",
        std::move(kept));
  }
  kept.resize(static_cast<std::size_t>(m));
  VariantSet set;
  set.origin_turn_id = turn.turn_id;
  set.side = Side::kDocument;
  set.origin_doc_id = doc.doc_id;
  set.variants = std::move(kept);
  return set;
}

Session shuffle_topics(const Session& session, std::uint64_t seed) {
  if (!session.topics) {
    throw Error(ErrorKind::kMissingTopics,
                "session " + session.conv_id + " has no topic segmentation");
  }
  const auto& blocks = *session.topics;
  const std::size_t t = blocks.size();
  if (t < 2) {
    throw Error(ErrorKind::kTooFewTopics,
                "session " + session.conv_id +
                    " has a single topic; no non-identity permutation exists");
  }
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, fnv1a(session.conv_id)));
  std::vector<std::size_t> perm;
  do {
    perm = order;
    shuffle_in_place(perm, rng);
  } while (perm == order);

  Session out;
  out.conv_id = session.conv_id + "-shuf";
  std::vector<TopicRange> ranges;
  int ordinal = 0;
  for (std::size_t b : perm) {
    const TopicRange& r = blocks[b];
    const int first = ordinal + 1;
    for (int i = r.first; i <= r.last; ++i) {
      const Turn& src = session.turns[static_cast<std::size_t>(i - 1)];
      out.turns.push_back(
          Turn{make_turn_id(out.conv_id, ++ordinal), src.query, origin_id(src)});
    }
    ranges.push_back({first, ordinal});
  }
  out.topics = std::move(ranges);
  return out;
}

Session expand_session_q(const Session& session,
                         std::span<const VariantSet> per_turn, int fold) {
  if (per_turn.size() != session.turns.size()) {
    throw Error(ErrorKind::kValidation,
                "session " + session.conv_id + " has " +
                    std::to_string(session.turns.size()) + " turns but " +
                    std::to_string(per_turn.size()) + " variant sets");
  }
  if (fold < 1) throw Error(ErrorKind::kValidation, "fold must be >= 1");
  Session out;
  out.conv_id = session.conv_id + "-q" + std::to_string(fold);
  out.topics = session.topics;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    const Turn& turn = session.turns[i];
    const VariantSet& set = per_turn[i];
    if (set.side != Side::kQuery || set.origin_turn_id != turn.turn_id) {
      throw Error(ErrorKind::kValidation,
                  "variant set for " + set.origin_turn_id +
                      " does not match turn " + turn.turn_id);
    }
    if (static_cast<int>(set.variants.size()) < fold) {
      throw Error(ErrorKind::kFoldExhausted,
                  "turn " + turn.turn_id + " has " +
                      std::to_string(set.variants.size()) +
                      " variants, fold " + std::to_string(fold) + " requested");
    }
    const int ordinal = turn_ordinal(turn.turn_id).value_or(static_cast<int>(i) + 1);
    out.turns.push_back(Turn{make_turn_id(out.conv_id, ordinal),
                             set.variants[static_cast<std::size_t>(fold - 1)],
                             origin_id(turn)});
  }
  return out;
}

RelevanceJudgments transfer_qrels(std::span<const Session> derived,
                                  const RelevanceJudgments& qrels) {
  RelevanceJudgments out;
  for (const auto& s : derived) {
    for (const auto& t : s.turns) {
      if (const auto* grades = qrels.find(origin_id(t))) {
        for (const auto& [doc, grade] : *grades) out.set(t.turn_id, doc, grade);
      }
    }
  }
  return out;
}

std::vector<VariantSet> generate_variants(std::span<const Session> sessions,
                                          const Collection& collection,
                                          const RelevanceJudgments& qrels,
                                          const AugmentConfig& config,
                                          Backend& backend) {
  struct Item {
    const Session* session;
    std::size_t turn;
    Side side;
    std::string doc_id;
  };
  std::vector<Item> items;
  for (const auto& s : sessions) {
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto relevant = qrels.relevant(s.turns[i].turn_id);
      if (config.query_side) {
        items.push_back({&s, i, Side::kQuery,
                         relevant.empty() ? std::string() : relevant.front()});
      }
      if (config.doc_side) {
        for (const auto& d : relevant) items.push_back({&s, i, Side::kDocument, d});
      }
    }
  }

  std::vector<VariantSet> results(items.size());
  parallel_for(items.size(), config.workers, [&](std::size_t idx) {
    const Item& item = items[idx];
    const Turn& turn = item.session->turns[item.turn];
    std::span<const Turn> context(item.session->turns.data(), item.turn);
    GenerationOptions options = config.generation;
    const std::uint64_t base_seed = options.seed.value_or(config.seed);
    for (int attempt = 0;; ++attempt) {
      options.seed = attempt == 0
                         ? base_seed
                         : mix_seed(base_seed, static_cast<std::uint64_t>(attempt));
      try {
        if (item.side == Side::kQuery) {
          results[idx] =
              reformulate_query(turn, context, config.m, backend, options);
          results[idx].origin_doc_id = item.doc_id;
        } else {
          results[idx] = rewrite_document(collection.at(item.doc_id), turn,
                                          context, config.m, backend, options);
        }
        return;
      } catch (const UnderGenerationError& e) {
        if (attempt >= config.regenerate_attempts) throw;
        spdlog::warn("[augment] {} ({}): {}; regenerating", turn.turn_id,
                     side_code(item.side), e.what());
      }
    }
  });
  std::sort(results.begin(), results.end(),
            [](const VariantSet& a, const VariantSet& b) {
              return std::tie(a.origin_turn_id, a.side, a.origin_doc_id) <
                     std::tie(b.origin_turn_id, b.side, b.origin_doc_id);
            });
  return results;
}

std::vector<AugmentedSample> build_samples(std::span<const Session> sessions,
                                           const Collection& collection,
                                           const RelevanceJudgments& qrels,
                                           std::span<const VariantSet> variants,
                                           int folds) {
  std::map<std::string, const VariantSet*> query_sets;
  std::map<std::string, std::vector<const VariantSet*>> doc_sets;
  for (const auto& v : variants) {
    if (v.side == Side::kQuery) {
      query_sets[v.origin_turn_id] = &v;
    } else {
      doc_sets[v.origin_turn_id].push_back(&v);
    }
  }

  std::vector<AugmentedSample> out;
  for (const auto& session : sessions) {
    bool has_query_side = true;
    std::vector<VariantSet> per_turn;
    for (const auto& t : session.turns) {
      auto it = query_sets.find(t.turn_id);
      if (it == query_sets.end()) {
        has_query_side = false;
        break;
      }
      per_turn.push_back(*it->second);
    }
    if (has_query_side) {
      for (int f = 1; f <= folds; ++f) {
        const Session expanded = expand_session_q(session, per_turn, f);
        for (std::size_t n = 0; n < session.turns.size(); ++n) {
          const std::string& turn_id = session.turns[n].turn_id;
          const auto relevant = qrels.relevant(turn_id);
          if (relevant.empty()) continue;
          const ConcatQuery cq =
              concat_session(expanded, static_cast<int>(n) + 1);
          for (const auto& d : relevant) {
            out.push_back({turn_id, Side::kQuery, f, cq.text,
                           collection.at(d).text, d, std::nullopt});
          }
        }
      }
    }
    for (std::size_t n = 0; n < session.turns.size(); ++n) {
      const std::string& turn_id = session.turns[n].turn_id;
      auto it = doc_sets.find(turn_id);
      if (it == doc_sets.end()) continue;
      const ConcatQuery cq = concat_session(session, static_cast<int>(n) + 1);
      for (const VariantSet* set : it->second) {
        if (static_cast<int>(set->variants.size()) < folds) {
          throw Error(ErrorKind::kFoldExhausted,
                      "document variants for " + turn_id + "/" +
                          set->origin_doc_id + " cannot fill " +
                          std::to_string(folds) + " folds");
        }
        for (int f = 1; f <= folds; ++f) {
          out.push_back({turn_id, Side::kDocument, f, cq.text,
                         set->variants[static_cast<std::size_t>(f - 1)],
                         set->origin_doc_id, std::nullopt});
        }
      }
    }
  }
  std::sort(out.begin(), out.end(), sample_key_less);
  return out;
}

void check_sample_invariants(std::span<const AugmentedSample> samples,
                             std::span<const Session> sessions,
                             const Collection& collection,
                             const RelevanceJudgments& qrels) {
  std::map<std::string, std::string> original_concat;
  for (const auto& s : sessions) {
    for (std::size_t n = 0; n < s.turns.size(); ++n) {
      original_concat[s.turns[n].turn_id] =
          concat_session(s, static_cast<int>(n) + 1).text;
    }
  }
  for (const auto& sample : samples) {
    const std::string where =
        sample.origin_turn_id + "/" + sample.doc_id + "/" +
        side_code(sample.side) + std::to_string(sample.fold);
    const auto* grades = qrels.find(sample.origin_turn_id);
    auto g = grades ? grades->find(sample.doc_id) : decltype(grades->end()){};
    if (!grades || g == grades->end() || g->second < 1) {
      throw Error(ErrorKind::kValidation,
                  where + ": origin pair is not a judged relevant pair");
    }
    if (sample.side == Side::kQuery &&
        sample.doc_text != collection.at(sample.doc_id).text) {
      throw Error(ErrorKind::kValidation,
                  where + ": query-side sample altered the document text");
    }
    if (sample.side == Side::kDocument) {
      auto it = original_concat.find(sample.origin_turn_id);
      if (it == original_concat.end() || it->second != sample.query_text) {
        throw Error(ErrorKind::kValidation,
                    where + ": document-side sample altered the query text");
      }
    }
  }
}

namespace {

json to_json(const VariantSet& v) {
  return {{"origin_turn_id", v.origin_turn_id},
          {"side", std::string(1, side_code(v.side))},
          {"origin_doc_id", v.origin_doc_id},
          {"variants", v.variants}};
}

json to_json(const AugmentedSample& s) {
  json j = {{"origin_turn_id", s.origin_turn_id},
            {"side", std::string(1, side_code(s.side))},
            {"fold", s.fold},
            {"query_text", s.query_text},
            {"doc_text", s.doc_text},
            {"doc_id", s.doc_id}};
  j["fim_score"] = s.fim_score ? json(*s.fim_score) : json(nullptr);
  return j;
}

template <typename T, typename Parse>
std::vector<T> load_jsonl(const fs::path& path, Parse parse) {
  auto in = open_input(path);
  std::vector<T> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(),
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void write_variant_sets(std::span<const VariantSet> sets, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& s : sets) out << to_json(s).dump() << '\n';
}

std::vector<VariantSet> load_variant_sets(const fs::path& path) {
  return load_jsonl<VariantSet>(path, [](const json& j) {
    VariantSet v;
    v.origin_turn_id = j.at("origin_turn_id").get<std::string>();
    v.side = parse_side(j.at("side").get<std::string>());
    v.origin_doc_id = j.value("origin_doc_id", std::string());
    v.variants = j.at("variants").get<std::vector<std::string>>();
    if (v.variants.empty()) {
      throw Error(ErrorKind::kValidation, "variant set without variants");
    }
    return v;
  });
}

void write_samples(std::span<const AugmentedSample> samples,
                   const fs::path& path) {
  auto out = open_output(path);
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
}

std::vector<AugmentedSample> load_samples(const fs::path& path) {
  return load_jsonl<AugmentedSample>(path, [](const json& j) {
    AugmentedSample s;
    s.origin_turn_id = j.at("origin_turn_id").get<std::string>();
    s.side = parse_side(j.at("side").get<std::string>());
    s.fold = j.at("fold").get<int>();
    s.query_text = j.at("query_text").get<std::string>();
    s.doc_text = j.at("doc_text").get<std::string>();
    s.doc_id = j.at("doc_id").get<std::string>();
    if (auto it = j.find("fim_score"); it != j.end() && !it->is_null()) {
      s.fim_score = it->get<double>();
    }
    if (s.fold < 1) throw Error(ErrorKind::kValidation, "fold must be >= 1");
    return s;
  });
}

}  // namespace convmix
