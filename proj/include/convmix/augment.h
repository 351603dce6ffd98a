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

// Two-sided relevance-judgment augmentation. Query side: every turn of a
// session is reformulated and the f-th chosen reformulation of each turn forms
// the f-th parallel session, which inherits the original judgments. Document
// side: each judged-relevant document is rewritten into new positives for the
// unchanged session. Also the topic-block shuffle of whole sessions.

#ifndef CONVMIX_AUGMENT_H_
#define CONVMIX_AUGMENT_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convmix/corpus.h"
#include "convmix/error.h"
#include "convmix/genclient.h"

namespace convmix {

enum class Side { kQuery, kDocument };

char side_code(Side side);       // 'Q' or 'D'
Side parse_side(std::string_view code);

struct VariantSet {
  std::string origin_turn_id;
  Side side = Side::kQuery;
  // The judged positive: the document rewritten (side D), or the turn's first
  // relevant document (side Q, empty when the turn has no judgment).
  std::string origin_doc_id;
  std::vector<std::string> variants;

  bool operator==(const VariantSet&) const = default;
};

struct AugmentedSample {
  std::string origin_turn_id;
  Side side = Side::kQuery;
  int fold = 1;
  std::string query_text;  // concatenated session
  std::string doc_text;
  std::string doc_id;      // the original judged document
  std::optional<double> fim_score;

  bool operator==(const AugmentedSample&) const = default;
};

// Total order used for every persisted sample list.
bool sample_key_less(const AugmentedSample& a, const AugmentedSample& b);

class UnderGenerationError : public Error {
 public:
  UnderGenerationError(const std::string& message,
                       std::vector<std::string> partial)
      : Error(ErrorKind::kUnderGeneration, message),
        partial_(std::move(partial)) {}

  const std::vector<std::string>& partial() const { return partial_; }

 private:
  std::vector<std::string> partial_;
};

// Splits on newlines, strips a leading "1." / "2)" / "document3:" / "-"
// marker, and drops empty lines.
std::vector<std::string> parse_all_variants(std::string_view raw);

// First m survivors of parse_all_variants; throws UnderGenerationError with
// the survivors when there are fewer than m.
std::vector<std::string> parse_variants(std::string_view raw, int m);

struct GenerationOptions {
  double temperature = kDefaultTemperature;
  int max_new_tokens = 2048;
  std::optional<std::uint64_t> seed;
};

VariantSet reformulate_query(const Turn& turn, std::span<const Turn> context,
                             int m, Backend& backend,
                             const GenerationOptions& options = {});

// Variants byte-identical to the source document are dropped and count as
// missing.
VariantSet rewrite_document(const Document& doc, const Turn& turn,
                            std::span<const Turn> context, int m,
                            Backend& backend,
                            const GenerationOptions& options = {});

// Permutes topic blocks with a uniformly drawn non-identity permutation.
// Turns are renumbered under conv_id + "-shuf" and remember their origin.
// Throws kMissingTopics / kTooFewTopics.
Session shuffle_topics(const Session& session, std::uint64_t seed);

// The fold-th parallel session: turn i takes variant fold-1 of set i. The
// conv id gains "-q<fold>". Throws kFoldExhausted when a set is too small
// and kValidation when the sets do not line up with the turns.
Session expand_session_q(const Session& session,
                         std::span<const VariantSet> per_turn, int fold);

// Copies judgments of origin turns onto derived turns.
RelevanceJudgments transfer_qrels(std::span<const Session> derived,
                                  const RelevanceJudgments& qrels);

struct AugmentConfig {
  int m = 10;
  bool query_side = true;
  bool doc_side = true;
  std::uint64_t seed = 0;
  int workers = 1;
  // Extra generation rounds (with a perturbed seed) after under-generation.
  int regenerate_attempts = 2;
  GenerationOptions generation;
};

// One side-Q set per turn of every session (context for later folds) and one
// side-D set per judged (turn, relevant doc). Sorted by (turn, side, doc).
std::vector<VariantSet> generate_variants(std::span<const Session> sessions,
                                          const Collection& collection,
                                          const RelevanceJudgments& qrels,
                                          const AugmentConfig& config,
                                          Backend& backend);

// Materializes folds 1..folds from variant sets: side Q through
// expand_session_q, side D by pairing each rewrite with the original
// session prefix. Only judged (turn, relevant doc) pairs produce samples.
std::vector<AugmentedSample> build_samples(std::span<const Session> sessions,
                                           const Collection& collection,
                                           const RelevanceJudgments& qrels,
                                           std::span<const VariantSet> variants,
                                           int folds);

// Side Q keeps the judged document text, side D keeps the original session
// text, and every (turn, doc) origin is a judged relevant pair. Throws
// kValidation.
void check_sample_invariants(std::span<const AugmentedSample> samples,
                             std::span<const Session> sessions,
                             const Collection& collection,
                             const RelevanceJudgments& qrels);

void write_variant_sets(std::span<const VariantSet> sets,
                        const std::filesystem::path& path);
std::vector<VariantSet> load_variant_sets(const std::filesystem::path& path);
void write_samples(std::span<const AugmentedSample> samples,
                   const std::filesystem::path& path);
std::vector<AugmentedSample> load_samples(const std::filesystem::path& path);

}  // namespace convmix

#endif  // CONVMIX_AUGMENT_H_
