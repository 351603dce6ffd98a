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

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <map>
#include <set>

#include "test_util.h"

namespace convmix {
namespace {

Session session(const std::string& conv, std::vector<std::string> queries,
                std::optional<std::vector<TopicRange>> topics = std::nullopt) {
  Session s;
  s.conv_id = conv;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    s.turns.push_back({make_turn_id(conv, static_cast<int>(i) + 1), queries[i],
                       std::nullopt});
  }
  s.topics = std::move(topics);
  return s;
}

struct Fixture {
  std::vector<Session> sessions;
  Collection collection;
  RelevanceJudgments qrels;
};

// Five judged (turn, doc) pairs over five turns; a_3 is unjudged.
Fixture fixture() {
  Fixture f;
  f.sessions = {session("a", {"who wrote the big book", "when was it written",
                              "is it long"}),
                session("b", {"what is a large house", "how old is it"})};
  for (int i = 1; i <= 5; ++i) {
    f.collection.add({"d" + std::to_string(i),
                      "Document " + std::to_string(i) + " says a big thing about a house."});
  }
  f.qrels.set("a_1", "d1", 1);
  f.qrels.set("a_2", "d2", 2);
  f.qrels.set("b_1", "d3", 1);
  f.qrels.set("b_1", "d4", 1);
  f.qrels.set("b_2", "d5", 1);
  f.qrels.set("b_2", "d1", 0);
  return f;
}

// Answers every prompt with `lines` numbered lines.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(int lines) : lines_(lines) {}
  GenResponse complete(const GenRequest& req) override {
    calls.fetch_add(1);
    std::string text;
    for (int i = 1; i <= lines_; ++i) {
      text += std::to_string(i) + ". line " + std::to_string(i) + " seed " +
              std::to_string(req.seed.value_or(0)) + "\n";
    }
    return {text, "counting"};
  }
  std::string id() const override { return "counting"; }
  std::atomic<int> calls{0};

 private:
  int lines_;
};

TEST(ParseVariants, StripsMarkersAndBlankLines) {
  EXPECT_EQ(parse_all_variants("1. alpha\n2) beta\n\n  - gamma  \nDocument4: delta\ndocument5 epsilon\nplain"),
            (std::vector<std::string>{"alpha", "beta", "gamma", "delta", "epsilon", "plain"}));
  EXPECT_TRUE(parse_all_variants("\n \n").empty());
}

TEST(ParseVariants, KeepsFirstM) {
  EXPECT_EQ(parse_variants("1. a\n2. b\n3. c", 2), (std::vector<std::string>{"a", "b"}));
}

TEST(ParseVariants, UnderGenerationCarriesPartial) {
  try {
    parse_variants("1. a\n2. b", 3);
    FAIL();
  } catch (const UnderGenerationError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnderGeneration);
    EXPECT_EQ(e.partial(), (std::vector<std::string>{"a", "b"}));
  }
}

TEST(Reformulate, ReturnsMVariantsForTurn) {
  const auto f = fixture();
  MockBackend mock(1);
  const auto& turns = f.sessions[0].turns;
  const auto set = reformulate_query(turns[1], std::span(turns.data(), 1), 4, mock);
  EXPECT_EQ(set.origin_turn_id, "a_2");
  EXPECT_EQ(set.side, Side::kQuery);
  EXPECT_EQ(set.variants.size(), 4u);
}

TEST(RewriteDocument, DropsCopiesOfTheSource) {
  const Document doc{"d1", "same text"};
  struct Echo : Backend {
    GenResponse complete(const GenRequest&) override {
      return {"1. same text\n2. new text\n3. other text", "echo"};
    }
    std::string id() const override { return "echo"; }
  } echo;
  const Turn turn{"a_1", "q", std::nullopt};
  EXPECT_EQ(rewrite_document(doc, turn, {}, 2, echo).variants,
            (std::vector<std::string>{"new text", "other text"}));
  EXPECT_THROW(rewrite_document(doc, turn, {}, 3, echo), UnderGenerationError);
}

TEST(ShuffleTopics, PermutesBlocks) {
  const Session s = session("c", {"t1", "t2", "t3", "t4", "t5"},
                            std::vector<TopicRange>{{1, 2}, {3, 3}, {4, 5}});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Session out = shuffle_topics(s, seed);
    EXPECT_EQ(out.conv_id, "c-shuf");
    ASSERT_EQ(out.turns.size(), 5u);
    std::vector<std::string> order;
    for (const auto& t : out.turns) order.push_back(t.query);
    EXPECT_NE(order, (std::vector<std::string>{"t1", "t2", "t3", "t4", "t5"}));
    std::multiset<std::string> a(order.begin(), order.end());
    EXPECT_EQ(a, (std::multiset<std::string>{"t1", "t2", "t3", "t4", "t5"}));
    // Blocks stay contiguous and in internal order.
    auto pos = [&](const std::string& q) {
      return std::find(order.begin(), order.end(), q) - order.begin();
    };
    EXPECT_EQ(pos("t2"), pos("t1") + 1);
    EXPECT_EQ(pos("t5"), pos("t4") + 1);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(out.turns[i].turn_id, "c-shuf_" + std::to_string(i + 1));
      EXPECT_EQ(*out.turns[i].origin_turn_id, "c_" + out.turns[i].query.substr(1));
    }
    EXPECT_NO_THROW(validate_session(out));
  }
}

TEST(ShuffleTopics, SeedDeterminism) {
  const Session s = session("c", {"t1", "t2", "t3"},
                            std::vector<TopicRange>{{1, 1}, {2, 2}, {3, 3}});
  EXPECT_EQ(shuffle_topics(s, 4), shuffle_topics(s, 4));
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::string key;
    for (const auto& t : shuffle_topics(s, seed).turns) key += t.query;
    seen.insert(key);
  }
  EXPECT_EQ(seen.size(), 5u);  // every non-identity permutation of 3 blocks
}

TEST(ShuffleTopics, Errors) {
  EXPECT_ERROR_KIND(shuffle_topics(session("c", {"a", "b"}), 0), ErrorKind::kMissingTopics);
  EXPECT_ERROR_KIND(
      shuffle_topics(session("c", {"a", "b"}, std::vector<TopicRange>{{1, 2}}), 0),
      ErrorKind::kTooFewTopics);
}

TEST(ExpandSessionQ, FoldTakesMatchingVariant) {
  const Session s = session("a", {"q1", "q2"});
  std::vector<VariantSet> sets = {{"a_1", Side::kQuery, "", {"x1", "y1"}},
                                  {"a_2", Side::kQuery, "", {"x2", "y2"}}};
  const Session f2 = expand_session_q(s, sets, 2);
  EXPECT_EQ(f2.conv_id, "a-q2");
  EXPECT_EQ(f2.turns[0].query, "y1");
  EXPECT_EQ(f2.turns[1].query, "y2");
  EXPECT_EQ(f2.turns[1].turn_id, "a-q2_2");
  EXPECT_EQ(*f2.turns[1].origin_turn_id, "a_2");
  EXPECT_ERROR_KIND(expand_session_q(s, sets, 3), ErrorKind::kFoldExhausted);
  sets.pop_back();
  EXPECT_ERROR_KIND(expand_session_q(s, sets, 1), ErrorKind::kValidation);
}

TEST(TransferQrels, CopiesOriginJudgments) {
  const auto f = fixture();
  std::vector<VariantSet> sets;
  for (const auto& t : f.sessions[1].turns) {
    sets.push_back({t.turn_id, Side::kQuery, "", {"v"}});
  }
  const std::vector<Session> derived = {expand_session_q(f.sessions[1], sets, 1)};
  const auto q = transfer_qrels(derived, f.qrels);
  EXPECT_EQ(q.relevant("b-q1_1"), (std::vector<std::string>{"d3", "d4"}));
  EXPECT_EQ(q.find("b-q1_2")->at("d1"), 0);
  EXPECT_FALSE(q.contains("b_1"));
}

TEST(GenerateVariants, SetCountsAndOrder) {
  const auto f = fixture();
  MockBackend mock;
  AugmentConfig config;
  config.m = 3;
  const auto sets = generate_variants(f.sessions, f.collection, f.qrels, config, mock);
  // One Q set per turn (5) and one D set per judged relevant pair (5).
  EXPECT_EQ(sets.size(), 10u);
  EXPECT_TRUE(std::is_sorted(sets.begin(), sets.end(), [](const auto& a, const auto& b) {
    return std::tie(a.origin_turn_id, a.side, a.origin_doc_id) <
           std::tie(b.origin_turn_id, b.side, b.origin_doc_id);
  }));
  for (const auto& s : sets) EXPECT_EQ(s.variants.size(), 3u);
  config.doc_side = false;
  EXPECT_EQ(generate_variants(f.sessions, f.collection, f.qrels, config, mock).size(), 5u);
}

TEST(GenerateVariants, WorkerCountDoesNotChangeOutput) {
  const auto f = fixture();
  MockBackend mock(3);
  AugmentConfig config;
  config.m = 4;
  const auto serial = generate_variants(f.sessions, f.collection, f.qrels, config, mock);
  config.workers = 4;
  EXPECT_EQ(generate_variants(f.sessions, f.collection, f.qrels, config, mock), serial);
}

TEST(GenerateVariants, RegeneratesThenGivesUp) {
  const auto f = fixture();
  CountingBackend short_backend(2);
  AugmentConfig config;
  config.m = 3;
  config.doc_side = false;
  config.regenerate_attempts = 2;
  EXPECT_THROW(generate_variants(std::span(f.sessions.data(), 1), f.collection,
                                 f.qrels, config, short_backend),
               UnderGenerationError);
  EXPECT_GE(short_backend.calls.load(), 3);
}

TEST(BuildSamples, CountsPerSide) {
  const auto f = fixture();
  MockBackend mock;
  AugmentConfig config;
  config.m = 3;
  const auto sets = generate_variants(f.sessions, f.collection, f.qrels, config, mock);
  const auto samples = build_samples(f.sessions, f.collection, f.qrels, sets, 3);
  std::map<Side, int> per_side;
  for (const auto& s : samples) ++per_side[s.side];
  EXPECT_EQ(per_side[Side::kQuery], 15);
  EXPECT_EQ(per_side[Side::kDocument], 15);
  EXPECT_TRUE(std::is_sorted(samples.begin(), samples.end(), sample_key_less));
  EXPECT_NO_THROW(check_sample_invariants(samples, f.sessions, f.collection, f.qrels));
  EXPECT_ERROR_KIND(build_samples(f.sessions, f.collection, f.qrels, sets, 4),
                    ErrorKind::kFoldExhausted);
}

TEST(BuildSamples, SidesKeepTheOtherHalfFixed) {
  const auto f = fixture();
  MockBackend mock;
  AugmentConfig config;
  config.m = 2;
  const auto sets = generate_variants(f.sessions, f.collection, f.qrels, config, mock);
  for (const auto& s : build_samples(f.sessions, f.collection, f.qrels, sets, 2)) {
    if (s.side == Side::kQuery) {
      EXPECT_EQ(s.doc_text, f.collection.at(s.doc_id).text);
    } else {
      EXPECT_NE(s.doc_text, f.collection.at(s.doc_id).text);
    }
  }
}

TEST(CheckInvariants, RejectsUnjudgedOrigin) {
  const auto f = fixture();
  AugmentedSample bad{"a_3", Side::kDocument, 1, "is it long", "x", "d1", std::nullopt};
  EXPECT_ERROR_KIND(check_sample_invariants(std::span(&bad, 1), f.sessions,
                                            f.collection, f.qrels),
                    ErrorKind::kValidation);
}

TEST(SampleIo, RoundTrip) {
  const auto dir = testing::temp_dir();
  const auto f = fixture();
  MockBackend mock;
  AugmentConfig config;
  config.m = 2;
  const auto sets = generate_variants(f.sessions, f.collection, f.qrels, config, mock);
  write_variant_sets(sets, dir / "v.jsonl");
  EXPECT_EQ(load_variant_sets(dir / "v.jsonl"), sets);
  auto samples = build_samples(f.sessions, f.collection, f.qrels, sets, 2);
  samples[0].fim_score = 0.125;
  write_samples(samples, dir / "s.jsonl");
  EXPECT_EQ(load_samples(dir / "s.jsonl"), samples);
}

TEST(Side, Codes) {
  EXPECT_EQ(side_code(Side::kQuery), 'Q');
  EXPECT_EQ(parse_side("D"), Side::kDocument);
  EXPECT_THROW(parse_side("X"), Error);
}

}  // namespace
}  // namespace convmix
