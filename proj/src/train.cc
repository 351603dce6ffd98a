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

#include "convmix/train.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "convmix/error.h"
#include "convmix/parallel.h"
#include "convmix/random.h"
#include "convmix/text.h"

namespace convmix {

std::string_view pair_origin_name(PairOrigin origin) {
  switch (origin) {
    case PairOrigin::kOriginal:
      return "original";
    case PairOrigin::kAugQuery:
      return "aug_q";
    case PairOrigin::kAugDocument:
      return "aug_d";
  }
  return "unknown";
}

void validate_train_config(const TrainConfig& config) {
  if (config.batch_size < 2) {
    throw Error(ErrorKind::kConfig, "batch size must be at least 2");
  }
  if (config.epochs < 1) throw Error(ErrorKind::kConfig, "epochs must be >= 1");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorKind::kConfig, "learning rate must be positive");
  }
}

std::vector<TrainingPair> build_training_set(
    std::span<const Session> sessions, const Collection& collection,
    const RelevanceJudgments& qrels, std::span<const AugmentedSample> samples,
    const TrainConfig& config) {
  std::vector<TrainingPair> pairs;
  std::set<std::string> missing;
  auto doc_text = [&](const std::string& id) -> std::string {
    const Document* doc = collection.find(id);
    if (!doc) {
      missing.insert(id);
      return {};
    }
    return truncate_tokens(doc->text, kDocumentTokenLimit);
  };

  if (config.include_original) {
    for (const auto& s : sessions) {
      for (std::size_t n = 0; n < s.turns.size(); ++n) {
        const auto relevant = qrels.relevant(s.turns[n].turn_id);
        if (relevant.empty()) continue;
        const std::string query = concat_session(s, static_cast<int>(n) + 1).text;
        for (const auto& d : relevant) {
          pairs.push_back({query, doc_text(d), PairOrigin::kOriginal,
                           s.turns[n].turn_id, d});
        }
      }
    }
  }

  std::vector<AugmentedSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), sample_key_less);
  for (const auto& sample : sorted) {
    const bool query_side = sample.side == Side::kQuery;
    if (query_side ? !config.use_query_side : !config.use_doc_side) continue;
    if (!collection.find(sample.doc_id)) missing.insert(sample.doc_id);
    pairs.push_back({truncate_tokens(sample.query_text, kSessionTokenLimit),
                     truncate_tokens(sample.doc_text, kDocumentTokenLimit),
                     query_side ? PairOrigin::kAugQuery : PairOrigin::kAugDocument,
                     sample.origin_turn_id, sample.doc_id});
  }

  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error(ErrorKind::kResolution,
                "training pairs reference unknown documents: " + list);
  }
  for (const auto& p : pairs) {
    if (trim(p.query_text).empty() || trim(p.doc_text).empty()) {
      throw Error(ErrorKind::kValidation,
                  "empty training text for " + p.turn_id + "/" + p.doc_id);
    }
  }
  return pairs;
}

FitResult fit(std::span<const TrainingPair> pairs, EncoderParams& params,
              AdamState& adam, const TrainConfig& config, int workers) {
  FitResult result;
  if (config.epochs <= 0) return result;
  validate_train_config(config);
  if (pairs.size() < static_cast<std::size_t>(config.batch_size)) {
    throw Error(ErrorKind::kValidation,
                std::to_string(pairs.size()) + " training pairs for batch size " +
                    std::to_string(config.batch_size));
  }
  if (adam.first_moment.rows() != params.query_proj().rows() ||
      adam.first_moment.cols() != params.query_proj().cols()) {
    adam = AdamState::zeros_like(params.query_proj());
  }

  // The document side is frozen, so its embeddings are computed once.
  std::vector<TrainingExample> examples(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) {
    examples[i].query_features = params.featurizer().featurize(pairs[i].query_text);
    examples[i].positive_doc = encode_document(pairs[i].doc_text, params);
  });

  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::vector<std::size_t> order(pairs.size());
  std::vector<TrainingExample> chunk;
  LossAndGrad lg;
  // Columns that ever carried gradient. Adam leaves every other entry alone.
  std::vector<std::uint32_t> active = active_columns(adam);
  std::vector<std::uint32_t> merged;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    shuffle_in_place(order, rng);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      if (end - start < 2) break;
      chunk.clear();
      for (std::size_t i = start; i < end; ++i) chunk.push_back(examples[order[i]]);
      loss_and_grad_into(chunk, params, lg);
      if (!std::isfinite(lg.loss)) {
        std::string ids;
        for (std::size_t i = start; i < end; ++i) {
          ids += (ids.empty() ? "" : " ") + pairs[order[i]].turn_id + "/" +
                 pairs[order[i]].doc_id;
        }
        throw Error(ErrorKind::kNumeric,
                    "non-finite loss at epoch " + std::to_string(epoch + 1) +
                        " batch " + std::to_string(batches) + ": " + ids);
      }
      merged.clear();
      std::set_union(active.begin(), active.end(), lg.columns.begin(),
                     lg.columns.end(), std::back_inserter(merged));
      active.swap(merged);
      adam_step(params, lg.grad, adam, config.learning_rate, active);
      loss_sum += lg.loss;
      ++batches;
      ++result.steps;
    }
    result.epoch_loss.push_back(batches ? loss_sum / batches : 0.0);
    spdlog::debug("[train] epoch {} mean loss {:.6f}", epoch + 1,
                  result.epoch_loss.back());
  }
  return result;
}

}  // namespace convmix
