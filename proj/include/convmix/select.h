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

// Quality control over generated variants: k-means diversity sampling and
// gradient-norm (Fisher information) ranking of augmented pairs.

#ifndef CONVMIX_SELECT_H_
#define CONVMIX_SELECT_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convmix/augment.h"
#include "convmix/corpus.h"
#include "convmix/encoder.h"

namespace convmix {

struct ClusterResult {
  std::vector<int> assignments;  // point -> cluster in [0, k)
  std::vector<Vector> centroids;
  double inertia = 0.0;
  // Inertia after each assignment step. Non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations until no centroid moves
// by tol or more, or max_iters is reached. A cluster that empties out takes
// the point farthest from its current centroid. Throws kInsufficientPoints
// and kShape.
ClusterResult kmeans(std::span<const Vector> points, int k, std::uint64_t seed,
                     int max_iters = 100, double tol = 1e-6);

// Embeds the variants with the document projection, clusters them into k
// groups and draws one member of each uniformly. Returns min(k, m) texts in
// cluster order; with m <= k the variants come back as they are.
std::vector<std::string> diversity_select(const VariantSet& variants, int k,
                                          std::uint64_t seed,
                                          const EncoderParams& params);

// diversity_select over every set. Each set gets its own seed derived from
// `seed` and the set key, so results do not depend on `workers`.
std::vector<VariantSet> diversity_select_all(std::span<const VariantSet> sets,
                                             int k, std::uint64_t seed,
                                             const EncoderParams& params,
                                             int workers = 1);

struct FimScored {
  AugmentedSample sample;
  double s = 0.0;     // score of the augmented pair
  double r = 0.0;     // score of the original pair
  double loss = 0.0;  // (s - r)^2
  double fim = 0.0;   // squared Frobenius norm of d loss / d query projection
};

// Scores one sample against its original pair (session prefix text and
// judged document text). Throws kNumeric on non-finite scores.
FimScored fim_score(const AugmentedSample& sample,
                    const std::string& original_query,
                    const std::string& original_doc,
                    const EncoderParams& params);

// fim_score for every sample, resolving originals from the sessions and the
// collection. Output order matches input.
std::vector<FimScored> fim_score_all(std::span<const AugmentedSample> samples,
                                     std::span<const Session> sessions,
                                     const Collection& collection,
                                     const EncoderParams& params,
                                     int workers = 1);

// Keeps the k highest-scoring samples of every (turn, side, doc) group; ties
// fall back to sample_key_less. With `global`, keeps the best k * groups
// overall instead. Output is grouped by key and descending in fim within a
// group, and carries fim_score.
std::vector<AugmentedSample> fim_topk(std::span<const FimScored> scored, int k,
                                      bool global = false);

}  // namespace convmix

#endif  // CONVMIX_SELECT_H_
