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

#include "convmix/select.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "convmix/random.h"
#include "test_util.h"

namespace convmix {
namespace {

EncoderParams small_params(std::size_t embed = 8, std::size_t features = 64,
                           std::uint64_t seed = 3) {
  EncoderConfig config;
  config.embed_dim = embed;
  config.feature_dim = features;
  config.init_seed = seed;
  return EncoderParams::initialize(config);
}

double choose2(double n) { return n * (n - 1) / 2.0; }

// Adjusted Rand index from the contingency table.
double adjusted_rand(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  double index = 0, sa = 0, sb = 0;
  for (auto& [k, v] : joint) index += choose2(v);
  for (auto& [k, v] : ra) sa += choose2(v);
  for (auto& [k, v] : rb) sb += choose2(v);
  const double expected = sa * sb / choose2(static_cast<double>(a.size()));
  const double max_index = (sa + sb) / 2.0;
  return (index - expected) / (max_index - expected);
}

std::vector<Vector> blobs(std::vector<int>& truth, std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<Vector> centers = {{0, 0}, {10, 0}, {0, 10}};
  std::vector<Vector> points;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 30; ++i) {
      points.push_back({centers[c][0] + 0.5 * standard_normal(rng),
                        centers[c][1] + 0.5 * standard_normal(rng)});
      truth.push_back(c);
    }
  }
  return points;
}

AugmentedSample sample(const std::string& turn, Side side, int fold,
                       const std::string& doc = "d1") {
  return {turn, side, fold, "q " + std::to_string(fold), "doc", doc, std::nullopt};
}

FimScored scored(AugmentedSample s, double fim) {
  FimScored f;
  f.sample = std::move(s);
  f.fim = fim;
  return f;
}

TEST(KMeans, RecoversSeparatedBlobs) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::vector<int> truth;
    const auto points = blobs(truth, seed);
    const auto result = kmeans(points, 3, seed);
    EXPECT_NEAR(adjusted_rand(result.assignments, truth), 1.0, 1e-12);
  }
}

TEST(KMeans, OneClusterIsTheMean) {
  std::vector<int> truth;
  const auto points = blobs(truth, 4);
  const auto result = kmeans(points, 1, 0);
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p[0];
    my += p[1];
  }
  EXPECT_NEAR(result.centroids[0][0], mx / points.size(), 1e-9);
  EXPECT_NEAR(result.centroids[0][1], my / points.size(), 1e-9);
}

TEST(KMeans, EveryPointItsOwnCluster) {
  const std::vector<Vector> points = {{0, 0}, {1, 0}, {0, 1}, {5, 5}};
  const auto result = kmeans(points, 4, 7);
  EXPECT_NEAR(result.inertia, 0.0, 1e-12);
  EXPECT_EQ(std::set<int>(result.assignments.begin(), result.assignments.end()).size(), 4u);
}

TEST(KMeans, InertiaNeverIncreases) {
  Rng rng(9);
  std::vector<Vector> points;
  for (int i = 0; i < 200; ++i) {
    points.push_back({standard_normal(rng), standard_normal(rng), standard_normal(rng)});
  }
  const auto result = kmeans(points, 6, 5);
  ASSERT_FALSE(result.inertia_history.empty());
  for (std::size_t i = 1; i < result.inertia_history.size(); ++i) {
    EXPECT_LE(result.inertia_history[i], result.inertia_history[i - 1] + 1e-9);
  }
  // Reported inertia is the sum of squared distances to assigned centroids.
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& c = result.centroids[result.assignments[i]];
    for (std::size_t d = 0; d < 3; ++d) inertia += std::pow(points[i][d] - c[d], 2);
  }
  EXPECT_NEAR(result.inertia, inertia, 1e-9);
}

TEST(KMeans, Deterministic) {
  std::vector<int> truth;
  const auto points = blobs(truth, 6);
  EXPECT_EQ(kmeans(points, 4, 11).assignments, kmeans(points, 4, 11).assignments);
}

TEST(KMeans, Errors) {
  const std::vector<Vector> points = {{0, 0}, {1, 1}};
  EXPECT_ERROR_KIND(kmeans(points, 3, 0), ErrorKind::kInsufficientPoints);
  const std::vector<Vector> ragged = {{0, 0}, {1}};
  EXPECT_ERROR_KIND(kmeans(ragged, 1, 0), ErrorKind::kShape);
}

TEST(Diversity, PicksOnePerTopic) {
  EncoderConfig config;
  config.init_seed = 4;
  const auto params = EncoderParams::initialize(config);
  VariantSet set{"a_1", Side::kQuery, "", {}};
  const std::vector<std::string> topics = {"volcano lava eruption magma crater",
                                           "violin orchestra concerto symphony bow",
                                           "tax refund income deduction filing"};
  for (const auto& t : topics) {
    for (int i = 0; i < 4; ++i) set.variants.push_back(t + " v" + std::to_string(i));
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto picks = diversity_select(set, 3, seed, params);
    ASSERT_EQ(picks.size(), 3u);
    std::set<std::string> first_words;
    for (const auto& p : picks) first_words.insert(p.substr(0, p.find(' ')));
    EXPECT_EQ(first_words.size(), 3u);
  }
}

TEST(Diversity, SmallSetsPassThrough) {
  const auto params = small_params();
  VariantSet set{"a_1", Side::kDocument, "d1", {"x", "y"}};
  EXPECT_EQ(diversity_select(set, 3, 0, params), set.variants);
  set.variants.clear();
  EXPECT_ERROR_KIND(diversity_select(set, 3, 0, params), ErrorKind::kInsufficientPoints);
}

TEST(Diversity, AllSetsIndependentOfWorkers) {
  const auto params = small_params(8, 256);
  std::vector<VariantSet> sets;
  for (int t = 1; t <= 4; ++t) {
    VariantSet s{"a_" + std::to_string(t), Side::kQuery, "", {}};
    for (int i = 0; i < 8; ++i) s.variants.push_back("w" + std::to_string(i * t) + " z" + std::to_string(i));
    sets.push_back(s);
  }
  const auto one = diversity_select_all(sets, 3, 1, params, 1);
  EXPECT_EQ(diversity_select_all(sets, 3, 1, params, 4), one);
  for (const auto& s : one) EXPECT_EQ(s.variants.size(), 3u);
}

TEST(Fim, UnmodifiedPairScoresZero) {
  const auto params = small_params();
  AugmentedSample s{"a_1", Side::kQuery, 1, "who wrote it", "the author wrote it", "d1", {}};
  const auto f = fim_score(s, "who wrote it", "the author wrote it", params);
  EXPECT_EQ(f.fim, 0.0);
  EXPECT_EQ(f.loss, 0.0);
}

TEST(Fim, MatchesFiniteDifferenceGradientNorm) {
  auto params = small_params(8, 64, 5);
  // Move the query projection away from the document one.
  Rng rng(2);
  for (double& v : params.query_proj().data()) v += 0.1 * standard_normal(rng);
  const AugmentedSample s{"a_1", Side::kQuery, 1, "who penned the novel",
                          "a novel by an author", "d1", {}};
  const std::string oq = "who wrote the book", od = "a book by an author";
  const auto f = fim_score(s, oq, od, params);

  const auto xa = params.featurizer().featurize(s.query_text);
  const auto xo = params.featurizer().featurize(oq);
  const auto ea = encode_document(s.doc_text, params);
  const auto eo = encode_document(od, params);
  auto loss = [&](const Matrix& w) {
    auto score = [&](const SparseVector& x, const Vector& e) {
      double total = 0.0;
      for (std::size_t r = 0; r < w.rows(); ++r) {
        double q = 0.0;
        for (std::size_t k = 0; k < x.nnz(); ++k) q += w(r, x.index[k]) * x.value[k];
        total += q * e[r];
      }
      return total;
    };
    const double d = score(xa, ea) - score(xo, eo);
    return d * d;
  };
  const double h = 1e-5;
  double norm_sq = 0.0;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 64; ++c) {
      Matrix plus = params.query_proj(), minus = params.query_proj();
      plus(r, c) += h;
      minus(r, c) -= h;
      const double g = (loss(plus) - loss(minus)) / (2 * h);
      norm_sq += g * g;
    }
  }
  ASSERT_GT(f.fim, 0.0);
  EXPECT_NEAR(f.fim, norm_sq, 1e-4 * norm_sq);
  EXPECT_NEAR(f.loss, loss(params.query_proj()), 1e-12);
}

TEST(Fim, ScoreAllResolvesOriginals) {
  const auto params = small_params(8, 256);
  Session s;
  s.conv_id = "a";
  s.turns = {{"a_1", "who wrote it", std::nullopt}};
  Collection c;
  c.add({"d1", "the author wrote it"});
  const std::vector<AugmentedSample> samples = {
      {"a_1", Side::kDocument, 1, "who wrote it", "someone penned it", "d1", {}},
      {"a_1", Side::kQuery, 1, "which person authored it", "the author wrote it", "d1", {}}};
  const auto all = fim_score_all(samples, std::span(&s, 1), c, params, 2);
  ASSERT_EQ(all.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(all[i].fim,
              fim_score(samples[i], "who wrote it", "the author wrote it", params).fim);
  }
  const AugmentedSample orphan{"z_1", Side::kQuery, 1, "q", "d", "d1", {}};
  EXPECT_ERROR_KIND(fim_score_all(std::span(&orphan, 1), std::span(&s, 1), c, params),
                    ErrorKind::kResolution);
}

TEST(FimTopK, KeepsBestPerGroupWithKeyTieBreak) {
  const std::vector<FimScored> in = {
      scored(sample("a_1", Side::kQuery, 1), 5), scored(sample("a_1", Side::kQuery, 3), 3),
      scored(sample("a_1", Side::kQuery, 2), 3), scored(sample("a_1", Side::kQuery, 4), 1)};
  const auto out = fim_topk(in, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].fold, 1);
  EXPECT_EQ(out[1].fold, 2);
  EXPECT_EQ(out[0].fim_score, 5.0);
  EXPECT_EQ(out[1].fim_score, 3.0);
}

TEST(FimTopK, MatchesBruteForceAndIgnoresInputOrder) {
  Rng rng(17);
  std::vector<FimScored> in;
  for (int t = 1; t <= 4; ++t) {
    for (Side side : {Side::kQuery, Side::kDocument}) {
      for (int f = 1; f <= 6; ++f) {
        in.push_back(scored(sample("a_" + std::to_string(t), side, f),
                            static_cast<double>(uniform_index(rng, 4))));
      }
    }
  }
  const auto out = fim_topk(in, 3);
  // Oracle: for each group, sort members by (-fim, fold) and take three.
  std::map<std::pair<std::string, char>, std::vector<std::pair<double, int>>> groups;
  for (const auto& s : in) {
    groups[{s.sample.origin_turn_id, side_code(s.sample.side)}].push_back(
        {-s.fim, s.sample.fold});
  }
  std::set<std::tuple<std::string, char, int>> want;
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end());
    for (int i = 0; i < 3; ++i) want.insert({key.first, key.second, members[i].second});
  }
  std::set<std::tuple<std::string, char, int>> got;
  for (const auto& s : out) got.insert({s.origin_turn_id, side_code(s.side), s.fold});
  EXPECT_EQ(got, want);
  EXPECT_EQ(out.size(), 24u);

  auto shuffled = in;
  shuffle_in_place(shuffled, rng);
  EXPECT_EQ(fim_topk(shuffled, 3), out);
}

TEST(FimTopK, GlobalKeepsSameTotal) {
  std::vector<FimScored> in;
  for (int f = 1; f <= 4; ++f) in.push_back(scored(sample("a_1", Side::kQuery, f), 10 + f));
  for (int f = 1; f <= 4; ++f) in.push_back(scored(sample("a_2", Side::kQuery, f), f));
  const auto out = fim_topk(in, 2, true);
  ASSERT_EQ(out.size(), 4u);
  for (const auto& s : out) EXPECT_EQ(s.origin_turn_id, "a_1");
  EXPECT_EQ(fim_topk(in, 2, false).size(), 4u);
  EXPECT_TRUE(fim_topk(in, 0).empty());
}

TEST(FimTopK, GroupsSplitByDocument) {
  const std::vector<FimScored> in = {
      scored(sample("a_1", Side::kDocument, 1, "d1"), 1),
      scored(sample("a_1", Side::kDocument, 1, "d2"), 2),
      scored(sample("a_1", Side::kDocument, 2, "d2"), 3)};
  const auto out = fim_topk(in, 1);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].doc_id, "d1");
  EXPECT_EQ(out[1].fold, 2);
}

}  // namespace
}  // namespace convmix
