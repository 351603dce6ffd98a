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

#include "convmix/encoder.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

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

// Test-side 64-bit FNV-1a, written out from the published constants.
std::uint64_t oracle_fnv(const std::string& bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t oracle_seeded_state(std::uint64_t seed) {
  std::string le;
  for (int k = 0; k < 8; ++k) le.push_back(static_cast<char>((seed >> (8 * k)) & 0xFF));
  return oracle_fnv(le, 14695981039346656037ULL);
}

// Dense featurization computed from first principles.
std::vector<double> oracle_features(const std::vector<std::string>& tokens,
                                    std::size_t dim, std::uint64_t seed) {
  std::vector<double> v(dim, 0.0);
  const std::uint64_t state = oracle_seeded_state(seed);
  auto add = [&](const std::string& key) {
    const std::uint64_t h = oracle_fnv(key, state);
    v[h % dim] += (h >> 63) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add("\x01" + tokens[i]);
    if (i > 0) add("\x02" + tokens[i - 1] + "\x1f" + tokens[i]);
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0) {
    for (double& x : v) x /= n;
  }
  return v;
}

std::vector<double> densify(const SparseVector& s, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  for (std::size_t i = 0; i < s.nnz(); ++i) v[s.index[i]] = s.value[i];
  return v;
}

// Loss written directly from the definition, no shared helpers.
double naive_loss(const std::vector<TrainingExample>& batch, const Matrix& wq) {
  const std::size_t n = batch.size();
  std::vector<std::vector<double>> q(n, std::vector<double>(wq.rows(), 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& x = batch[i].query_features;
    for (std::size_t r = 0; r < wq.rows(); ++r) {
      for (std::size_t k = 0; k < x.nnz(); ++k) q[i][r] += wq(r, x.index[k]) * x.value[k];
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = 0.0;
      for (std::size_t r = 0; r < wq.rows(); ++r) s[j] += q[i][r] * batch[j].positive_doc[r];
    }
    double z = 0.0;
    for (double v : s) z += std::exp(v);
    total += std::log(z) - s[i];
  }
  return total / static_cast<double>(n);
}

std::vector<TrainingExample> random_batch(const EncoderParams& params,
                                          std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TrainingExample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    std::string q, d;
    for (int t = 0; t < 5; ++t) {
      q += "q" + std::to_string(uniform_index(rng, 40)) + " ";
      d += "d" + std::to_string(uniform_index(rng, 40)) + " ";
    }
    TrainingExample ex;
    ex.query_features = params.featurizer().featurize(q);
    ex.positive_doc = encode_document(d, params);
    for (double& v : ex.positive_doc) v *= 4.0;  // sharpen the softmax a little
    batch.push_back(std::move(ex));
  }
  return batch;
}

TEST(Featurizer, EmptyTextIsZeroVector) {
  const Featurizer f(1024);
  EXPECT_TRUE(f.featurize("").empty());
  EXPECT_TRUE(f.featurize("?! ...").empty());
  EXPECT_TRUE(f.featurize("[SEP]").empty());
}

TEST(Featurizer, RejectsNonPowerOfTwo) {
  EXPECT_ERROR_KIND(Featurizer(1000), ErrorKind::kShape);
}

TEST(Featurizer, UnitNormAndSortedIndices) {
  const Featurizer f;
  const auto x = f.featurize("who wrote the play hamlet and when");
  EXPECT_NEAR(x.norm(), 1.0, 1e-12);
  for (std::size_t i = 1; i < x.nnz(); ++i) EXPECT_LT(x.index[i - 1], x.index[i]);
}

TEST(Featurizer, MatchesIndependentHashOracle) {
  for (std::uint64_t seed : {0ULL, 7ULL}) {
    const Featurizer f(256, seed);
    const std::string text = "The quick brown fox jumps over the lazy dog the end";
    const auto got = densify(f.featurize(text), 256);
    const auto want = oracle_features(
        {"the", "quick", "brown", "fox", "jumps", "over", "the", "lazy", "dog",
         "the", "end"},
        256, seed);
    for (std::size_t i = 0; i < 256; ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << i;
  }
}

TEST(Featurizer, SeparatorBreaksBigrams) {
  const Featurizer f(4096);
  const auto joined = densify(f.featurize("alpha [SEP] beta"), 4096);
  const auto plain = oracle_features({"alpha"}, 4096, 0);
  const auto other = oracle_features({"beta"}, 4096, 0);
  // Two unigrams only, so the result is their normalized sum.
  std::vector<double> sum(4096);
  double n = 0.0;
  for (std::size_t i = 0; i < 4096; ++i) {
    sum[i] = plain[i] + other[i];
    n += sum[i] * sum[i];
  }
  for (std::size_t i = 0; i < 4096; ++i) {
    EXPECT_NEAR(joined[i], sum[i] / std::sqrt(n), 1e-12);
  }
}

TEST(EncoderParams, QueryProjectionStartsAsDocumentProjection) {
  const auto p = small_params(16, 256);
  EXPECT_EQ(p.query_proj(), p.doc_proj());
  EXPECT_EQ(p.embed_dim(), 16u);
  EXPECT_EQ(p.feature_dim(), 256u);
}

TEST(EncoderParams, InitVarianceMatchesFeatureDim) {
  const auto p = small_params(64, 1024, 11);
  double sum = 0.0, sq = 0.0;
  for (double v : p.doc_proj().data()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(p.doc_proj().data().size());
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(1.0 / 1024 / n));
  EXPECT_NEAR(var * 1024.0, 1.0, 0.02);
}

TEST(EncoderParams, DeterministicFromSeed) {
  EXPECT_EQ(small_params(8, 64, 5).doc_proj(), small_params(8, 64, 5).doc_proj());
  EXPECT_NE(small_params(8, 64, 5).doc_proj(), small_params(8, 64, 6).doc_proj());
  EXPECT_EQ(small_params(8, 64, 5).doc_fingerprint(),
            small_params(8, 64, 5).doc_fingerprint());
  EXPECT_NE(small_params(8, 64, 5).doc_fingerprint(),
            small_params(8, 64, 6).doc_fingerprint());
}

TEST(Encoder, ProjectionIsLinear) {
  const auto p = small_params(8, 64);
  const auto x = p.featurizer().featurize("some words here");
  const auto a = p.encode_query_features(x);
  const auto b = p.encode_query_features(x.scaled(2.5));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], 2.5 * a[i], 1e-12);
}

TEST(Encoder, DisjointTextsAreNearlyOrthogonal) {
  EncoderConfig config;
  config.init_seed = 1;
  const auto p = EncoderParams::initialize(config);
  double total = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::string a, b;
    for (int t = 0; t < 8; ++t) {
      a += "alpha" + std::to_string(i * 8 + t) + " ";
      b += "beta" + std::to_string(i * 8 + t) + " ";
    }
    const auto ea = encode_document(a, p);
    const auto eb = encode_document(b, p);
    total += std::abs(similarity(ea, eb)) /
             std::sqrt(similarity(ea, ea) * similarity(eb, eb));
  }
  EXPECT_LT(total / 100.0, 0.2);
}

TEST(Encoder, SharedTextScoresHigher) {
  EncoderConfig config;
  config.init_seed = 2;
  const auto p = EncoderParams::initialize(config);
  const auto q = encode_query_text("who wrote the play hamlet", p);
  const double hit = similarity(q, encode_document("hamlet is a play written by shakespeare", p));
  const double miss = similarity(q, encode_document("bread needs flour water and yeast", p));
  EXPECT_GT(hit, miss);
}

TEST(Encoder, DocumentTruncation) {
  const auto p = small_params(8, 1024);
  std::string head, tail;
  for (std::size_t i = 0; i < kDocumentTokenLimit; ++i) head += "w" + std::to_string(i) + " ";
  tail = head + "extra words past the limit";
  EXPECT_EQ(encode_document(head, p), encode_document(tail, p));
}

TEST(Encoder, SimilarityShapeMismatch) {
  const std::vector<double> a(3), b(4);
  EXPECT_ERROR_KIND(similarity(a, b), ErrorKind::kShape);
}

TEST(Loss, UniformScoresGiveLogBatchSize) {
  auto p = small_params(8, 64);
  for (double& v : p.query_proj().data()) v = 0.0;
  const auto batch = random_batch(p, 4, 1);
  const auto lg = loss_and_grad(batch, p);
  EXPECT_NEAR(lg.loss, std::log(4.0), 1e-12);
}

TEST(Loss, SingletonBatchIsZero) {
  const auto p = small_params(8, 64);
  const auto batch = random_batch(p, 1, 1);
  const auto lg = loss_and_grad(batch, p);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.grad.frobenius_norm_sq(), 0.0);
}

TEST(Loss, MatchesNaiveDefinition) {
  const auto p = small_params(8, 64);
  const auto batch = random_batch(p, 6, 2);
  EXPECT_NEAR(loss_and_grad(batch, p).loss, naive_loss(batch, p.query_proj()), 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  auto p = small_params(8, 64);
  const auto batch = random_batch(p, 6, 3);
  const auto lg = loss_and_grad(batch, p);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 64; ++c) {
      Matrix plus = p.query_proj(), minus = p.query_proj();
      plus(r, c) += h;
      minus(r, c) -= h;
      const double fd = (naive_loss(batch, plus) - naive_loss(batch, minus)) / (2 * h);
      const double g = lg.grad(r, c);
      const double scale = std::max(std::abs(fd), std::abs(g));
      if (scale > 1e-6) worst = std::max(worst, std::abs(fd - g) / scale);
      else EXPECT_NEAR(g, 0.0, 1e-8);
    }
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(Loss, ColumnsCoverNonzeroGradient) {
  const auto p = small_params(8, 64);
  const auto batch = random_batch(p, 5, 4);
  const auto lg = loss_and_grad(batch, p);
  std::vector<bool> listed(64, false);
  for (auto c : lg.columns) listed[c] = true;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 64; ++c) {
      if (!listed[c]) EXPECT_EQ(lg.grad(r, c), 0.0);
    }
  }
}

TEST(Loss, ReusedBufferMatchesFresh) {
  const auto p = small_params(8, 64);
  LossAndGrad buf;
  loss_and_grad_into(random_batch(p, 5, 5), p, buf);
  const auto second = random_batch(p, 5, 6);
  loss_and_grad_into(second, p, buf);
  const auto fresh = loss_and_grad(second, p);
  EXPECT_EQ(buf.loss, fresh.loss);
  EXPECT_EQ(buf.grad, fresh.grad);
}

TEST(Loss, NonFiniteInputRejected) {
  const auto p = small_params(8, 64);
  auto batch = random_batch(p, 3, 7);
  batch[1].positive_doc[0] = std::nan("");
  EXPECT_ERROR_KIND(loss_and_grad(batch, p), ErrorKind::kNumeric);
  batch = random_batch(p, 3, 7);
  batch[1].positive_doc.pop_back();
  EXPECT_ERROR_KIND(loss_and_grad(batch, p), ErrorKind::kShape);
}

TEST(Adam, ZeroGradientLeavesParamsButCountsStep) {
  auto p = small_params(8, 64);
  const Matrix before = p.query_proj();
  auto state = AdamState::zeros_like(p.query_proj());
  adam_step(p, Matrix(8, 64), state, 0.1);
  EXPECT_EQ(p.query_proj(), before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = small_params(8, 64);
  const Matrix before = p.query_proj();
  auto state = AdamState::zeros_like(p.query_proj());
  Matrix grad(8, 64);
  grad(0, 0) = 3.0;
  grad(1, 5) = -0.002;
  adam_step(p, grad, state, 0.01);
  // Bias-corrected first step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.query_proj()(0, 0) - before(0, 0), -0.01, 1e-9);
  EXPECT_NEAR(p.query_proj()(1, 5) - before(1, 5), 0.01, 1e-6);
  EXPECT_EQ(p.query_proj()(2, 2), before(2, 2));
  for (std::size_t i = 0; i < before.data().size(); ++i) {
    EXPECT_LE(std::abs(p.query_proj().data()[i] - before.data()[i]), 0.01 + 1e-12);
  }
}

TEST(Adam, SparseColumnsMatchDense) {
  auto dense = small_params(8, 64);
  auto sparse = small_params(8, 64);
  auto ds = AdamState::zeros_like(dense.query_proj());
  auto ss = AdamState::zeros_like(sparse.query_proj());
  for (int step = 0; step < 4; ++step) {
    const auto batch = random_batch(dense, 5, 10 + step);
    const auto g = loss_and_grad(batch, dense);
    adam_step(dense, g.grad, ds, 0.05);
    std::vector<std::uint32_t> cols = active_columns(ss);
    cols.insert(cols.end(), g.columns.begin(), g.columns.end());
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    adam_step(sparse, g.grad, ss, 0.05, cols);
  }
  EXPECT_EQ(dense.query_proj(), sparse.query_proj());
  EXPECT_EQ(ds, ss);
}

TEST(Adam, DocumentProjectionNeverMoves) {
  auto p = small_params(8, 64);
  const Matrix frozen = p.doc_proj();
  const auto fp = p.doc_fingerprint();
  auto state = AdamState::zeros_like(p.query_proj());
  for (int step = 0; step < 3; ++step) {
    adam_step(p, loss_and_grad(random_batch(p, 4, step), p).grad, state, 0.1);
  }
  EXPECT_EQ(p.doc_proj(), frozen);
  EXPECT_EQ(p.doc_fingerprint(), fp);
  EXPECT_NE(p.query_proj(), frozen);
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = testing::temp_dir();
  auto p = small_params(8, 64, 9);
  auto state = AdamState::zeros_like(p.query_proj());
  adam_step(p, loss_and_grad(random_batch(p, 4, 1), p).grad, state, 0.1);
  save_checkpoint({p, state}, dir / "m.ckpt");
  const Checkpoint back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.params.query_proj(), p.query_proj());
  EXPECT_EQ(back.params.doc_proj(), p.doc_proj());
  EXPECT_EQ(back.params.init_seed(), 9u);
  EXPECT_EQ(back.params.doc_fingerprint(), p.doc_fingerprint());
  EXPECT_EQ(back.adam, state);
}

TEST(Checkpoint, RejectsForeignFile) {
  const auto dir = testing::temp_dir();
  testing::write_text(dir / "bad.ckpt", "not a checkpoint at all");
  EXPECT_ERROR_KIND(load_checkpoint(dir / "bad.ckpt"), ErrorKind::kParse);
  EXPECT_ERROR_KIND(load_checkpoint(dir / "absent.ckpt"), ErrorKind::kMissingInput);
}

}  // namespace
}  // namespace convmix
