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

// Hashing dual encoder. Text is featurized into a signed-hash bag of
// unigrams and bigrams, then projected by a trainable query matrix or a
// frozen document matrix. Relevance is the raw dot product of the two
// projections.

#ifndef CONVMIX_ENCODER_H_
#define CONVMIX_ENCODER_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "convmix/corpus.h"

namespace convmix {

using Vector = std::vector<double>;

// Sorted, duplicate-free (index, value) pairs.
struct SparseVector {
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  std::size_t nnz() const { return index.size(); }
  bool empty() const { return index.empty(); }
  double norm() const;
  SparseVector scaled(double factor) const;

  bool operator==(const SparseVector&) const = default;
};

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // this * x for a sparse x of length cols().
  Vector apply(const SparseVector& x) const;
  double frobenius_norm_sq() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Featurizer {
 public:
  static constexpr std::size_t kDefaultDim = std::size_t{1} << 15;

  // Throws kShape unless dim is a power of two.
  explicit Featurizer(std::size_t dim = kDefaultDim,
                      std::uint64_t hash_seed = 0);

  std::size_t dim() const { return dim_; }
  std::uint64_t hash_seed() const { return hash_seed_; }

  // Token and adjacent-token-pair counts, each hashed to a bucket with a
  // sign taken from the top hash bit, then L2-normalized. [SEP] tokens are
  // not features and bigrams do not span them. Text without tokens maps to
  // the zero vector.
  SparseVector featurize(std::string_view text) const;

 private:
  std::size_t dim_;
  std::uint64_t hash_seed_;
};

struct EncoderConfig {
  std::size_t embed_dim = 128;
  std::size_t feature_dim = Featurizer::kDefaultDim;
  std::uint64_t hash_seed = 0;
  std::uint64_t init_seed = 0;
};

// The document projection is fixed at construction; only the query
// projection is mutable.
class EncoderParams {
 public:
  // Document projection drawn i.i.d. N(0, 1/feature_dim) from init_seed;
  // the query projection starts as a copy of it.
  static EncoderParams initialize(const EncoderConfig& config);

  EncoderParams(Featurizer featurizer, std::uint64_t init_seed,
                Matrix query_proj, Matrix doc_proj);

  const Featurizer& featurizer() const { return featurizer_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::size_t embed_dim() const { return doc_proj_.rows(); }
  std::size_t feature_dim() const { return doc_proj_.cols(); }

  Matrix& query_proj() { return query_proj_; }
  const Matrix& query_proj() const { return query_proj_; }
  const Matrix& doc_proj() const { return doc_proj_; }

  // Hash of the document projection and featurizer settings. Indexes built
  // with different document-side weights are rejected at search time.
  std::uint64_t doc_fingerprint() const { return doc_fingerprint_; }

  Vector encode_query_features(const SparseVector& x) const {
    return query_proj_.apply(x);
  }
  Vector encode_document_features(const SparseVector& x) const {
    return doc_proj_.apply(x);
  }

 private:
  Featurizer featurizer_;
  std::uint64_t init_seed_;
  Matrix query_proj_;
  Matrix doc_proj_;
  std::uint64_t doc_fingerprint_;
};

Vector encode_query(const ConcatQuery& query, const EncoderParams& params);
Vector encode_query_text(std::string_view text, const EncoderParams& params);
// Applies the document token limit before featurizing.
Vector encode_document(std::string_view text, const EncoderParams& params);

// Both operands must have ascending indices, as featurize produces.
double sparse_dot(const SparseVector& a, const SparseVector& b);

// Dot product. Throws kShape on length mismatch.
double similarity(std::span<const double> a, std::span<const double> b);

struct TrainingExample {
  SparseVector query_features;
  Vector positive_doc;  // frozen document embedding
};

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // d(mean loss) / d(query projection)
  // Feature columns the batch touches, ascending. grad is zero elsewhere.
  std::vector<std::uint32_t> columns;
};

// Mean in-batch-negative softmax cross-entropy: for query i the positives of
// every other example in the batch act as negatives. A batch of one has no
// negatives and yields zero loss and gradient. Throws kNumeric on non-finite
// inputs or results, kShape on dimension mismatch.
LossAndGrad loss_and_grad(std::span<const TrainingExample> batch,
                          const EncoderParams& params);

// Same, reusing `out`: only the columns of the previous call are cleared.
void loss_and_grad_into(std::span<const TrainingExample> batch,
                        const EncoderParams& params, LossAndGrad& out);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Matrix first_moment;
  Matrix second_moment;

  static AdamState zeros_like(const Matrix& m);
  bool operator==(const AdamState&) const = default;
};

inline constexpr double kDefaultLearningRate = 1e-5;

// Bias-corrected Adam update of the query projection.
void adam_step(EncoderParams& params, const Matrix& grad, AdamState& state,
               double learning_rate = kDefaultLearningRate);

// Adam restricted to `columns` (ascending). Bit-identical to the full update
// when every other column has zero gradient and zero moments, since such
// entries do not move.
void adam_step(EncoderParams& params, const Matrix& grad, AdamState& state,
               double learning_rate, std::span<const std::uint32_t> columns);

// Columns with a nonzero moment, ascending.
std::vector<std::uint32_t> active_columns(const AdamState& state);

struct Checkpoint {
  EncoderParams params;
  AdamState adam;
};

// Binary container: "CMXCKPT" tag, format version, dimensions, seeds, both
// projections row-major float64, then the optimizer state. Little-endian.
void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace convmix

#endif  // CONVMIX_ENCODER_H_
