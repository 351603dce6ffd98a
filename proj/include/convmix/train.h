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

#ifndef CONVMIX_TRAIN_H_
#define CONVMIX_TRAIN_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convmix/augment.h"
#include "convmix/corpus.h"
#include "convmix/encoder.h"

namespace convmix {

enum class PairOrigin { kOriginal, kAugQuery, kAugDocument };

std::string_view pair_origin_name(PairOrigin origin);

struct TrainingPair {
  std::string query_text;  // concatenated session, at most 512 tokens
  std::string doc_text;    // at most 384 tokens
  PairOrigin origin = PairOrigin::kOriginal;
  std::string turn_id;
  std::string doc_id;

  bool operator==(const TrainingPair&) const = default;
};

struct TrainConfig {
  int batch_size = 32;
  int epochs = 10;
  double learning_rate = kDefaultLearningRate;
  std::uint64_t shuffle_seed = 0;
  bool include_original = true;
  bool use_query_side = true;
  bool use_doc_side = true;
};

// Throws kConfig unless batch_size >= 2, epochs >= 1 and the learning rate
// is positive and finite.
void validate_train_config(const TrainConfig& config);

// Original judged (turn, doc) pairs in session order when include_original,
// then the samples of the enabled sides in sample_key_less order. Throws
// kResolution naming every doc id missing from the collection.
std::vector<TrainingPair> build_training_set(
    std::span<const Session> sessions, const Collection& collection,
    const RelevanceJudgments& qrels, std::span<const AugmentedSample> samples,
    const TrainConfig& config);

struct FitResult {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
  std::uint64_t steps = 0;
};

// Contrastive fine-tuning of the query projection with in-batch negatives.
// Each epoch reshuffles the pairs, cuts batches of batch_size, keeps a
// ragged tail of two or more and drops a tail of one. Throws kNumeric with
// the batch position and pair ids when a loss turns non-finite.
FitResult fit(std::span<const TrainingPair> pairs, EncoderParams& params,
              AdamState& adam, const TrainConfig& config, int workers = 1);

}  // namespace convmix

#endif  // CONVMIX_TRAIN_H_
