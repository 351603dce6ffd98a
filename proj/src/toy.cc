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

#include "convmix/toy.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <string>

#include "convmix/error.h"
#include "convmix/random.h"

namespace convmix {

namespace {

struct Aspect {
  const char* name;
  // Conversational phrasings. Turn 1 prefixes the entity.
  std::vector<const char*> asks;
  // Reworded asks that only test sessions use.
  std::vector<const char*> shifted_asks;
  // Document vocabulary, disjoint from the asks.
  std::vector<const char*> doc_words;
};

const std::array<Aspect, 5>& aspects() {
  static const std::array<Aspect, 5> kAspects = {{
      {"population",
       {"how many people live there", "how many people reside there",
        "are there many people who live there"},
       {"how many residents dwell there", "how many inhabitants reside there"},
       {"population", "census", "demographic", "headcount", "households",
        "enumeration", "density"}},
      {"history",
       {"when was it founded", "when was it first founded",
        "who founded it first"},
       {"when was it established", "when was it initially settled"},
       {"history", "chronicle", "dynasty", "heritage", "ancient", "legacy",
        "archives"}},
      {"economy",
       {"what jobs and pay are there", "what jobs pay well there",
        "is the pay good for jobs there"},
       {"what work and wages are there", "what employment and earnings exist"},
       {"economy", "industry", "commerce", "manufacturing", "exports",
        "trade", "revenue"}},
      {"climate",
       {"what is the weather like", "how much rain and weather",
        "is the weather rainy with rain"},
       {"what is the temperature forecast", "how much rainfall and showers"},
       {"climate", "humidity", "moisture", "seasonal", "precipitation",
        "monsoon", "atmosphere"}},
      {"cuisine",
       {"what food can I eat there", "what food do they eat",
        "which food should I eat"},
       {"what dishes can I taste there", "what meals do they enjoy"},
       {"cuisine", "gastronomy", "recipe", "spices", "culinary",
        "preparation", "flavors"}},
  }};
  return kAspects;
}

const std::vector<const char*>& filler() {
  static const std::vector<const char*> kFiller = {
      "the", "of", "and", "a", "in", "its", "with", "for", "notes",
      "records", "describes", "region", "local", "across", "since"};
  return kFiller;
}

std::string entity_name(std::set<std::string>& used, Rng& rng) {
  static const std::vector<const char*> kOnsets = {
      "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const std::vector<const char*> kVowels = {"a", "e", "i", "o", "u"};
  static const std::vector<const char*> kCodas = {"n", "r", "l", "s", "th",
                                                  "x", "m", ""};
  for (;;) {
    std::string name;
    for (int syl = 0; syl < 3; ++syl) {
      name += kOnsets[uniform_index(rng, kOnsets.size())];
      name += kVowels[uniform_index(rng, kVowels.size())];
      if (syl == 2) name += kCodas[uniform_index(rng, kCodas.size())];
    }
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    if (used.insert(name).second) return name;
  }
}

std::string doc_id(int entity, std::size_t aspect) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "E%02d-%s", entity, aspects()[aspect].name);
  return buf;
}

std::string make_document(const std::string& entity, std::size_t aspect,
                          Rng& rng) {
  const auto& words = aspects()[aspect].doc_words;
  std::vector<const char*> pool(words.begin(), words.end());
  shuffle_in_place(pool, rng);
  std::string text = entity;
  const std::size_t content = 4 + uniform_index(rng, 2);
  const std::size_t noise = 5 + uniform_index(rng, 4);
  std::vector<std::string> body;
  for (std::size_t i = 0; i < content; ++i) body.emplace_back(pool[i % pool.size()]);
  for (std::size_t i = 0; i < noise; ++i) {
    body.emplace_back(filler()[uniform_index(rng, filler().size())]);
  }
  body.push_back(entity);
  shuffle_in_place(body, rng);
  for (const auto& w : body) text += " " + w;
  text += " " + std::to_string(1000 + uniform_index(rng, 9000)) + ".";
  return text;
}

Session make_session(const std::string& conv_id, const std::string& entity,
                     int entity_index, int turns, bool test,
                     RelevanceJudgments& qrels, Rng& rng) {
  // Aspects are asked in a fixed canonical order, skipping some.
  std::vector<std::size_t> chosen(aspects().size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  shuffle_in_place(chosen, rng);
  chosen.resize(static_cast<std::size_t>(turns));
  std::sort(chosen.begin(), chosen.end());

  Session s;
  s.conv_id = conv_id;
  for (std::size_t n = 0; n < chosen.size(); ++n) {
    const Aspect& aspect = aspects()[chosen[n]];
    const bool shifted = test && uniform_unit(rng) < 0.5;
    const auto& asks = shifted ? aspect.shifted_asks : aspect.asks;
    std::string ask = asks[uniform_index(rng, asks.size())];
    std::string query = n == 0 ? "tell me about " + entity + ", " + ask
                               : "and " + ask;
    query += "?";
    const std::string turn_id = make_turn_id(conv_id, static_cast<int>(n) + 1);
    s.turns.push_back(Turn{turn_id, query, std::nullopt});
    qrels.set(turn_id, doc_id(entity_index, chosen[n]), 1);
  }
  const int half = (turns + 1) / 2;
  if (turns >= 2) {
    s.topics = std::vector<TopicRange>{{1, half}, {half + 1, turns}};
  } else {
    s.topics = std::vector<TopicRange>{{1, turns}};
  }
  return s;
}

}  // namespace

ToyCorpus make_toy_corpus(const ToyConfig& config) {
  if (config.turns < 1 || config.turns > static_cast<int>(aspects().size())) {
    throw Error(ErrorKind::kConfig, "toy sessions have 1 to 5 turns");
  }
  if (config.train_sessions > config.entities ||
      config.test_sessions > config.train_sessions) {
    throw Error(ErrorKind::kConfig,
                "toy corpus needs entities >= train sessions >= test sessions");
  }
  Rng rng(config.seed);
  std::set<std::string> used;
  std::vector<std::string> names;
  ToyCorpus corpus;
  for (int e = 0; e < config.entities; ++e) {
    names.push_back(entity_name(used, rng));
    for (std::size_t a = 0; a < aspects().size(); ++a) {
      corpus.collection.add({doc_id(e, a), make_document(names.back(), a, rng)});
    }
  }
  std::vector<int> order(static_cast<std::size_t>(config.entities));
  for (int e = 0; e < config.entities; ++e) order[static_cast<std::size_t>(e)] = e;
  shuffle_in_place(order, rng);

  char buf[32];
  for (int i = 0; i < config.train_sessions; ++i) {
    const int e = order[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof(buf), "train%02d", i + 1);
    corpus.train_sessions.push_back(make_session(
        buf, names[static_cast<std::size_t>(e)], e, config.turns, false,
        corpus.train_qrels, rng));
  }
  for (int i = 0; i < config.test_sessions; ++i) {
    const int e = order[static_cast<std::size_t>(i)];
    std::snprintf(buf, sizeof(buf), "test%02d", i + 1);
    corpus.test_sessions.push_back(make_session(
        buf, names[static_cast<std::size_t>(e)], e, config.turns, true,
        corpus.test_qrels, rng));
  }
  return corpus;
}

void write_toy_corpus(const ToyCorpus& corpus, const std::filesystem::path& dir) {
  write_collection(corpus.collection, dir / "collection.tsv");
  write_sessions(corpus.train_sessions, dir / "train_sessions.jsonl");
  write_qrels(corpus.train_qrels, dir / "train_qrels.txt");
  write_sessions(corpus.test_sessions, dir / "test_sessions.jsonl");
  write_qrels(corpus.test_qrels, dir / "test_qrels.txt");
}

}  // namespace convmix
