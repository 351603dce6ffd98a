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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>

#include "convmix/binary_io.h"
#include "convmix/error.h"
#include "convmix/io.h"
#include "convmix/random.h"
#include "convmix/text.h"

namespace convmix {

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'M', 'X', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

std::uint64_t fingerprint(const Featurizer& f, const Matrix& doc_proj) {
  std::uint64_t h = fnv1a_u64(f.dim());
  h = fnv1a_u64(f.hash_seed(), h);
  h = fnv1a_u64(doc_proj.rows(), h);
  auto data = doc_proj.data();
  return fnv1a(std::string_view(reinterpret_cast<const char*>(data.data()),
                                data.size() * sizeof(double)),
               h);
}

}  // namespace

double SparseVector::norm() const {
  double sum = 0.0;
  for (double v : value) sum += v * v;
  return std::sqrt(sum);
}

SparseVector SparseVector::scaled(double factor) const {
  SparseVector out = *this;
  for (double& v : out.value) v *= factor;
  return out;
}

Vector Matrix::apply(const SparseVector& x) const {
  Vector out(rows_, 0.0);
  for (std::size_t k = 0; k < x.nnz(); ++k) {
    const std::size_t c = x.index[k];
    if (c >= cols_) {
      throw Error(ErrorKind::kShape, "feature index " + std::to_string(c) +
                                         " exceeds dimension " +
                                         std::to_string(cols_));
    }
    const double v = x.value[k];
    for (std::size_t r = 0; r < rows_; ++r) out[r] += data_[r * cols_ + c] * v;
  }
  return out;
}

double Matrix::frobenius_norm_sq() const {
  double sum = 0.0;
  for (double v : data_) sum += v * v;
  return sum;
}

Featurizer::Featurizer(std::size_t dim, std::uint64_t hash_seed)
    : dim_(dim), hash_seed_(hash_seed) {
  if (dim == 0 || !std::has_single_bit(dim) || dim > (std::size_t{1} << 32)) {
    throw Error(ErrorKind::kShape,
                "feature dimension must be a power of two, got " +
                    std::to_string(dim));
  }
}

SparseVector Featurizer::featurize(std::string_view text) const {
  const auto tokens = tokenize(text);
  const std::uint64_t seeded = fnv1a_u64(hash_seed_);
  std::vector<std::pair<std::uint32_t, double>> hits;
  hits.reserve(tokens.size() * 2);
  auto add = [&](const std::string& key) {
    const std::uint64_t h = fnv1a(key, seeded);
    const auto bucket = static_cast<std::uint32_t>(h & (dim_ - 1));
    hits.emplace_back(bucket, (h >> 63) ? -1.0 : 1.0);
  };
  const std::string* prev = nullptr;
  for (const auto& tok : tokens) {
    if (tok == kSeparatorToken) {
      prev = nullptr;
      continue;
    }
    add("\x01" + tok);
    if (prev) add("\x02" + *prev + "\x1f" + tok);
    prev = &tok;
  }
  std::sort(hits.begin(), hits.end());
  SparseVector out;
  for (std::size_t i = 0; i < hits.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < hits.size() && hits[j].first == hits[i].first) {
      sum += hits[j].second;
      ++j;
    }
    if (sum != 0.0) {
      out.index.push_back(hits[i].first);
      out.value.push_back(sum);
    }
    i = j;
  }
  const double n = out.norm();
  if (n > 0.0) {
    for (double& v : out.value) v /= n;
  }
  return out;
}

EncoderParams EncoderParams::initialize(const EncoderConfig& config) {
  Featurizer featurizer(config.feature_dim, config.hash_seed);
  if (config.embed_dim == 0) {
    throw Error(ErrorKind::kShape, "embedding dimension must be positive");
  }
  Matrix doc_proj(config.embed_dim, config.feature_dim);
  Rng rng(config.init_seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.feature_dim));
  for (double& v : doc_proj.data()) v = standard_normal(rng) * scale;
  Matrix query_proj = doc_proj;
  return EncoderParams(featurizer, config.init_seed, std::move(query_proj),
                       std::move(doc_proj));
}

EncoderParams::EncoderParams(Featurizer featurizer, std::uint64_t init_seed,
                             Matrix query_proj, Matrix doc_proj)
    : featurizer_(featurizer),
      init_seed_(init_seed),
      query_proj_(std::move(query_proj)),
      doc_proj_(std::move(doc_proj)) {
  if (query_proj_.rows() != doc_proj_.rows() ||
      query_proj_.cols() != doc_proj_.cols() ||
      doc_proj_.cols() != featurizer_.dim()) {
    throw Error(ErrorKind::kShape,
                "query/document projections and featurizer disagree in shape");
  }
  doc_fingerprint_ = fingerprint(featurizer_, doc_proj_);
}

Vector encode_query(const ConcatQuery& query, const EncoderParams& params) {
  return encode_query_text(query.text, params);
}

Vector encode_query_text(std::string_view text, const EncoderParams& params) {
  return params.encode_query_features(params.featurizer().featurize(text));
}

Vector encode_document(std::string_view text, const EncoderParams& params) {
  return params.encode_document_features(params.featurizer().featurize(
      truncate_tokens(text, kDocumentTokenLimit)));
}

double sparse_dot(const SparseVector& a, const SparseVector& b) {
  double sum = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.index.size() && j < b.index.size()) {
    if (a.index[i] < b.index[j]) {
      ++i;
    } else if (b.index[j] < a.index[i]) {
      ++j;
    } else {
      sum += a.value[i++] * b.value[j++];
    }
  }
  return sum;
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kShape, "similarity of vectors with lengths " +
                                       std::to_string(a.size()) + " and " +
                                       std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

LossAndGrad loss_and_grad(std::span<const TrainingExample> batch,
                          const EncoderParams& params) {
  LossAndGrad out;
  loss_and_grad_into(batch, params, out);
  return out;
}

void loss_and_grad_into(std::span<const TrainingExample> batch,
                        const EncoderParams& params, LossAndGrad& out) {
  const std::size_t dim = params.embed_dim();
  const std::size_t n = batch.size();
  if (out.grad.rows() != dim || out.grad.cols() != params.feature_dim()) {
    out.grad = Matrix(dim, params.feature_dim());
  } else {
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::uint32_t c : out.columns) out.grad(r, c) = 0.0;
    }
  }
  out.columns.clear();
  out.loss = 0.0;
  if (n < 2) return;

  std::vector<Vector> queries;
  queries.reserve(n);
  for (const auto& ex : batch) {
    if (ex.positive_doc.size() != dim) {
      throw Error(ErrorKind::kShape, "document embedding has dimension " +
                                         std::to_string(ex.positive_doc.size()));
    }
    if (!all_finite(ex.query_features.value) || !all_finite(ex.positive_doc)) {
      throw Error(ErrorKind::kNumeric, "non-finite training input");
    }
    queries.push_back(params.encode_query_features(ex.query_features));
    out.columns.insert(out.columns.end(), ex.query_features.index.begin(),
                       ex.query_features.index.end());
  }
  std::sort(out.columns.begin(), out.columns.end());
  out.columns.erase(std::unique(out.columns.begin(), out.columns.end()),
                    out.columns.end());

  // dL/dq_i = (1/n) * sum_j (softmax_ij - [i == j]) e_j
  std::vector<double> scores(n);
  Vector dq(dim);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double max_score = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      scores[j] = similarity(queries[i], batch[j].positive_doc);
      max_score = std::max(max_score, scores[j]);
    }
    if (!std::isfinite(max_score)) {
      throw Error(ErrorKind::kNumeric, "non-finite similarity in batch row " +
                                           std::to_string(i));
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(scores[j] - max_score);
    const double log_z = max_score + std::log(z);
    total += log_z - scores[i];

    std::fill(dq.begin(), dq.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double coeff = std::exp(scores[j] - log_z) - (i == j ? 1.0 : 0.0);
      coeff /= static_cast<double>(n);
      const Vector& e = batch[j].positive_doc;
      for (std::size_t r = 0; r < dim; ++r) dq[r] += coeff * e[r];
    }
    const SparseVector& x = batch[i].query_features;
    for (std::size_t r = 0; r < dim; ++r) {
      for (std::size_t k = 0; k < x.nnz(); ++k) {
        out.grad(r, x.index[k]) += dq[r] * x.value[k];
      }
    }
  }
  out.loss = total / static_cast<double>(n);
  if (!std::isfinite(out.loss)) {
    throw Error(ErrorKind::kNumeric, "non-finite contrastive loss");
  }
}

AdamState AdamState::zeros_like(const Matrix& m) {
  AdamState s;
  s.first_moment = Matrix(m.rows(), m.cols());
  s.second_moment = Matrix(m.rows(), m.cols());
  return s;
}

namespace {

void check_adam_shapes(const Matrix& w, const Matrix& grad, AdamState& state) {
  if (grad.rows() != w.rows() || grad.cols() != w.cols()) {
    throw Error(ErrorKind::kShape, "gradient shape does not match parameters");
  }
  if (state.first_moment.rows() != w.rows() ||
      state.first_moment.cols() != w.cols()) {
    const AdamState fresh = AdamState::zeros_like(w);
    state.first_moment = fresh.first_moment;
    state.second_moment = fresh.second_moment;
  }
}

struct AdamUpdate {
  double beta1, beta2, epsilon, bias1, bias2, lr;

  void operator()(double& w, double g, double& m, double& v) const {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    w -= lr * (m / bias1) / (std::sqrt(v / bias2) + epsilon);
  }
};

AdamUpdate next_update(AdamState& state, double learning_rate) {
  state.step += 1;
  const double t = static_cast<double>(state.step);
  return {state.beta1,
          state.beta2,
          state.epsilon,
          1.0 - std::pow(state.beta1, t),
          1.0 - std::pow(state.beta2, t),
          learning_rate};
}

}  // namespace

void adam_step(EncoderParams& params, const Matrix& grad, AdamState& state,
               double learning_rate) {
  Matrix& w = params.query_proj();
  check_adam_shapes(w, grad, state);
  const AdamUpdate update = next_update(state, learning_rate);
  auto wd = w.data();
  auto gd = grad.data();
  auto m = state.first_moment.data();
  auto v = state.second_moment.data();
  for (std::size_t i = 0; i < wd.size(); ++i) update(wd[i], gd[i], m[i], v[i]);
}

void adam_step(EncoderParams& params, const Matrix& grad, AdamState& state,
               double learning_rate, std::span<const std::uint32_t> columns) {
  Matrix& w = params.query_proj();
  check_adam_shapes(w, grad, state);
  const AdamUpdate update = next_update(state, learning_rate);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::uint32_t c : columns) {
      update(w(r, c), grad(r, c), state.first_moment(r, c),
             state.second_moment(r, c));
    }
  }
}

std::vector<std::uint32_t> active_columns(const AdamState& state) {
  const Matrix& m = state.first_moment;
  const Matrix& v = state.second_moment;
  std::vector<char> active(m.cols(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (m(r, c) != 0.0 || v(r, c) != 0.0) active[c] = 1;
    }
  }
  std::vector<std::uint32_t> out;
  for (std::size_t c = 0; c < active.size(); ++c) {
    if (active[c]) out.push_back(static_cast<std::uint32_t>(c));
  }
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const EncoderParams& p = checkpoint.params;
  const AdamState& a = checkpoint.adam;
  BinaryWriter w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u64(p.embed_dim());
  w.u64(p.feature_dim());
  w.u64(p.featurizer().hash_seed());
  w.u64(p.init_seed());
  w.f64_array(p.query_proj().data());
  w.f64_array(p.doc_proj().data());
  w.f64(a.beta1);
  w.f64(a.beta2);
  w.f64(a.epsilon);
  w.u64(a.step);
  const bool has_moments = a.first_moment.rows() == p.embed_dim() &&
                           a.first_moment.cols() == p.feature_dim();
  w.u8(has_moments ? 1 : 0);
  if (has_moments) {
    w.f64_array(a.first_moment.data());
    w.f64_array(a.second_moment.data());
  }
  write_file(path, w.buffer());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(read_file(path), path.string());
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::kParse, path.string() + ": not a checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kParse, path.string() +
                                       ": unsupported checkpoint version " +
                                       std::to_string(version));
  }
  const std::uint64_t embed_dim = r.u64();
  const std::uint64_t feature_dim = r.u64();
  const std::uint64_t hash_seed = r.u64();
  const std::uint64_t init_seed = r.u64();
  Matrix query_proj(embed_dim, feature_dim);
  Matrix doc_proj(embed_dim, feature_dim);
  r.f64_array(query_proj.data());
  r.f64_array(doc_proj.data());
  AdamState adam;
  adam.beta1 = r.f64();
  adam.beta2 = r.f64();
  adam.epsilon = r.f64();
  adam.step = r.u64();
  if (r.u8() != 0) {
    adam.first_moment = Matrix(embed_dim, feature_dim);
    adam.second_moment = Matrix(embed_dim, feature_dim);
    r.f64_array(adam.first_moment.data());
    r.f64_array(adam.second_moment.data());
  }
  r.expect_end();
  return Checkpoint{
      EncoderParams(Featurizer(feature_dim, hash_seed), init_seed,
                    std::move(query_proj), std::move(doc_proj)),
      std::move(adam)};
}

}  // namespace convmix
