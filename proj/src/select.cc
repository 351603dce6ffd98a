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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include "convmix/error.h"
#include "convmix/parallel.h"
#include "convmix/random.h"
#include "convmix/text.h"

namespace convmix {

namespace {

double squared_distance(const Vector& a, const Vector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

// Index drawn with probability proportional to weights[i].
std::size_t weighted_index(const std::vector<double>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) return uniform_index(rng, weights.size());
  double target = uniform_unit(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    if (target < weights[i]) return i;
    target -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

std::vector<Vector> seed_centroids(std::span<const Vector> points, int k,
                                   Rng& rng) {
  std::vector<Vector> centroids;
  centroids.push_back(points[uniform_index(rng, points.size())]);
  std::vector<double> nearest(points.size(),
                              std::numeric_limits<double>::infinity());
  while (static_cast<int>(centroids.size()) < k) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], centroids.back()));
    }
    centroids.push_back(points[weighted_index(nearest, rng)]);
  }
  return centroids;
}

double assign(std::span<const Vector> points, const std::vector<Vector>& centroids,
              std::vector<int>& assignments) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    int best = 0;
    double best_d = squared_distance(points[i], centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
      const double d = squared_distance(points[i], centroids[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    assignments[i] = best;
    inertia += best_d;
  }
  return inertia;
}

// Moves the point farthest from its centroid into every empty cluster. The
// donor cluster must keep at least one member.
void repair_empty(std::span<const Vector> points, std::vector<Vector>& centroids,
                  std::vector<int>& assignments) {
  const std::size_t k = centroids.size();
  std::vector<int> sizes(k, 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto owner = static_cast<std::size_t>(assignments[i]);
      if (sizes[owner] < 2) continue;
      const double d = squared_distance(points[i], centroids[owner]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far == points.size()) break;  // cannot happen while |points| >= k
    --sizes[static_cast<std::size_t>(assignments[far])];
    assignments[far] = static_cast<int>(c);
    sizes[c] = 1;
    centroids[c] = points[far];
  }
}

double inertia_of(std::span<const Vector> points,
                  const std::vector<Vector>& centroids,
                  const std::vector<int>& assignments) {
  double sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sum += squared_distance(points[i],
                            centroids[static_cast<std::size_t>(assignments[i])]);
  }
  return sum;
}

std::uint64_t set_seed(std::uint64_t seed, const VariantSet& set) {
  std::uint64_t h = fnv1a(set.origin_turn_id);
  const char code = side_code(set.side);
  h = fnv1a(std::string_view(&code, 1), h);
  h = fnv1a(set.origin_doc_id, h);
  return mix_seed(seed, h);
}

}  // namespace

ClusterResult kmeans(std::span<const Vector> points, int k, std::uint64_t seed,
                     int max_iters, double tol) {
  if (k < 1 || points.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorKind::kInsufficientPoints,
                "k-means with k=" + std::to_string(k) + " on " +
                    std::to_string(points.size()) + " points");
  }
  const std::size_t dim = points.front().size();
  if (dim == 0) throw Error(ErrorKind::kShape, "k-means on zero-dim points");
  for (const auto& p : points) {
    if (p.size() != dim) {
      throw Error(ErrorKind::kShape, "k-means points of mixed dimension");
    }
  }

  Rng rng(seed);
  ClusterResult result;
  result.centroids = seed_centroids(points, k, rng);
  result.assignments.assign(points.size(), 0);

  for (int iter = 0; iter < max_iters; ++iter) {
    assign(points, result.centroids, result.assignments);
    repair_empty(points, result.centroids, result.assignments);
    result.inertia_history.push_back(
        inertia_of(points, result.centroids, result.assignments));
    ++result.iterations;

    std::vector<Vector> next(static_cast<std::size_t>(k), Vector(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(result.assignments[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) next[c][d] += points[i][d];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < next.size(); ++c) {
      for (double& v : next[c]) v /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(squared_distance(next[c], result.centroids[c])));
    }
    result.centroids = std::move(next);
    if (shift < tol) break;
  }
  // Final assignment against the final centroids can only lower inertia.
  std::vector<int> final_assign(points.size());
  assign(points, result.centroids, final_assign);
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (int a : final_assign) ++sizes[static_cast<std::size_t>(a)];
  if (std::all_of(sizes.begin(), sizes.end(), [](int s) { return s > 0; })) {
    result.assignments = std::move(final_assign);
  }
  result.inertia = inertia_of(points, result.centroids, result.assignments);
  result.inertia_history.push_back(result.inertia);
  return result;
}

std::vector<std::string> diversity_select(const VariantSet& variants, int k,
                                          std::uint64_t seed,
                                          const EncoderParams& params) {
  const auto& texts = variants.variants;
  if (texts.empty()) {
    throw Error(ErrorKind::kInsufficientPoints, "no variants for " +
                                                    variants.origin_turn_id);
  }
  if (k < 1) throw Error(ErrorKind::kValidation, "diversity k must be >= 1");
  if (texts.size() <= static_cast<std::size_t>(k)) return texts;

  std::vector<Vector> points;
  points.reserve(texts.size());
  for (const auto& t : texts) points.push_back(encode_document(t, params));
  const ClusterResult clusters = kmeans(points, k, seed);

  Rng rng(mix_seed(seed, 0x5e1ec7));
  std::vector<std::string> out;
  for (int c = 0; c < k; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (clusters.assignments[i] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    out.push_back(texts[members[uniform_index(rng, members.size())]]);
  }
  return out;
}

std::vector<VariantSet> diversity_select_all(std::span<const VariantSet> sets,
                                             int k, std::uint64_t seed,
                                             const EncoderParams& params,
                                             int workers) {
  std::vector<VariantSet> out(sets.begin(), sets.end());
  parallel_for(out.size(), workers, [&](std::size_t i) {
    out[i].variants = diversity_select(sets[i], k, set_seed(seed, sets[i]), params);
  });
  return out;
}

FimScored fim_score(const AugmentedSample& sample,
                    const std::string& original_query,
                    const std::string& original_doc,
                    const EncoderParams& params) {
  const Featurizer& f = params.featurizer();
  const SparseVector x_aug = f.featurize(sample.query_text);
  const SparseVector x_orig = f.featurize(original_query);
  const Vector e_aug = encode_document(sample.doc_text, params);
  const Vector e_orig = encode_document(original_doc, params);

  FimScored out;
  out.sample = sample;
  out.s = similarity(params.encode_query_features(x_aug), e_aug);
  out.r = similarity(params.encode_query_features(x_orig), e_orig);
  if (!std::isfinite(out.s) || !std::isfinite(out.r)) {
    throw Error(ErrorKind::kNumeric,
                "non-finite score for " + sample.origin_turn_id + "/" +
                    sample.doc_id);
  }
  const double diff = out.s - out.r;
  out.loss = diff * diff;
  if (diff == 0.0) return out;

  // grad = 2 diff (e_aug x_aug^T - e_orig x_orig^T), and
  // ||a b^T - c d^T||^2 = |a|^2 |b|^2 + |c|^2 |d|^2 - 2 (a.c)(b.d).
  const double aa = similarity(e_aug, e_aug);
  const double cc = similarity(e_orig, e_orig);
  const double ac = similarity(e_aug, e_orig);
  const double bb = sparse_dot(x_aug, x_aug);
  const double dd = sparse_dot(x_orig, x_orig);
  const double bd = sparse_dot(x_aug, x_orig);
  const double outer = std::max(0.0, aa * bb + cc * dd - 2.0 * ac * bd);
  out.fim = 4.0 * out.loss * outer;
  if (!std::isfinite(out.fim)) {
    throw Error(ErrorKind::kNumeric,
                "non-finite FIM for " + sample.origin_turn_id + "/" +
                    sample.doc_id);
  }
  return out;
}

std::vector<FimScored> fim_score_all(std::span<const AugmentedSample> samples,
                                     std::span<const Session> sessions,
                                     const Collection& collection,
                                     const EncoderParams& params, int workers) {
  std::map<std::string, std::string> concat;
  for (const auto& s : sessions) {
    for (std::size_t n = 0; n < s.turns.size(); ++n) {
      concat[s.turns[n].turn_id] = concat_session(s, static_cast<int>(n) + 1).text;
    }
  }
  std::vector<FimScored> out(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const auto& sample = samples[i];
    auto it = concat.find(sample.origin_turn_id);
    if (it == concat.end()) {
      throw Error(ErrorKind::kResolution,
                  "sample turn " + sample.origin_turn_id + " not in sessions");
    }
    out[i] = fim_score(sample, it->second, collection.at(sample.doc_id).text,
                       params);
  });
  return out;
}

std::vector<AugmentedSample> fim_topk(std::span<const FimScored> scored, int k,
                                      bool global) {
  if (k < 0) throw Error(ErrorKind::kValidation, "fim k must be >= 0");
  auto group_of = [](const AugmentedSample& s) {
    return std::tie(s.origin_turn_id, s.side, s.doc_id);
  };
  auto better = [](const FimScored* a, const FimScored* b) {
    if (a->fim != b->fim) return a->fim > b->fim;
    return sample_key_less(a->sample, b->sample);
  };
  using Key = std::tuple<std::string, Side, std::string>;
  std::map<Key, std::vector<const FimScored*>> groups;
  for (const auto& s : scored) {
    if (!std::isfinite(s.fim)) {
      throw Error(ErrorKind::kNumeric, "non-finite FIM score in selection");
    }
    groups[Key(group_of(s.sample))].push_back(&s);
  }

  std::vector<const FimScored*> kept;
  if (global) {
    std::vector<const FimScored*> all;
    for (auto& [key, members] : groups) all.insert(all.end(), members.begin(), members.end());
    std::sort(all.begin(), all.end(), better);
    const std::size_t limit =
        std::min(all.size(), static_cast<std::size_t>(k) * groups.size());
    kept.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(limit));
    std::stable_sort(kept.begin(), kept.end(),
                     [&](const FimScored* a, const FimScored* b) {
                       if (group_of(a->sample) != group_of(b->sample)) {
                         return group_of(a->sample) < group_of(b->sample);
                       }
                       return better(a, b);
                     });
  } else {
    for (auto& [key, members] : groups) {
      std::sort(members.begin(), members.end(), better);
      const std::size_t limit = std::min(members.size(), static_cast<std::size_t>(k));
      kept.insert(kept.end(), members.begin(),
                  members.begin() + static_cast<std::ptrdiff_t>(limit));
    }
  }
  std::vector<AugmentedSample> out;
  out.reserve(kept.size());
  for (const FimScored* s : kept) {
    out.push_back(s->sample);
    out.back().fim_score = s->fim;
  }
  return out;
}

}  // namespace convmix
