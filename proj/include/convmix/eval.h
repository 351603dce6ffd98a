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

// trec_eval-style ranking metrics and paired significance testing.
//
// A turn is evaluated when it appears in both the run and the judgments.
// Run turns without judgments are skipped with a warning. A document counts
// as relevant at grade >= 1.

#ifndef CONVMIX_EVAL_H_
#define CONVMIX_EVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convmix/corpus.h"

namespace convmix {

struct MetricResult {
  double mean = 0.0;
  std::map<std::string, double> per_query;

  bool operator==(const MetricResult&) const = default;
};

// Reciprocal rank of the first relevant document, 0 when none is retrieved
// (within the first `cutoff` ranks if given).
MetricResult mrr(const RunFile& run, const RelevanceJudgments& qrels,
                 std::optional<int> cutoff = std::nullopt);

// Linear-gain NDCG over the first `cutoff` ranks. Turns whose ideal DCG is
// zero score 0.
MetricResult ndcg_at(const RunFile& run, const RelevanceJudgments& qrels,
                     int cutoff = 3);

// Fraction of relevant documents found in the first `cutoff` ranks, averaged
// over turns with at least one relevant document.
MetricResult recall_at(const RunFile& run, const RelevanceJudgments& qrels,
                       int cutoff);

inline const std::vector<std::string> kDefaultMetrics = {
    "mrr", "ndcg_cut_3", "recall_10", "recall_100"};

// Accepts "mrr", "ndcg_cut_<c>" and "recall_<c>". Throws kConfig otherwise.
MetricResult evaluate_metric(const std::string& name, const RunFile& run,
                             const RelevanceJudgments& qrels,
                             std::optional<int> mrr_cutoff = std::nullopt);

using Report = std::map<std::string, MetricResult>;

Report evaluate(const RunFile& run, const RelevanceJudgments& qrels,
                const std::vector<std::string>& metrics,
                std::optional<int> mrr_cutoff = std::nullopt);

// {metric: {"mean": x, "per_query": {turn: x}}}
nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& json);
// One "<metric>\tall\t<mean>" line per metric.
std::string report_to_tsv(const Report& report);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-tailed
  int dof = 0;
};

// Paired t-test on a - b. Throws kAlignment on length mismatch and
// kDegenerate when n < 2 or the differences have zero variance.
TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b);

// Pairs per-query values by turn id. Throws kAlignment unless both results
// cover the same turns.
TTestResult paired_t_test(const MetricResult& a, const MetricResult& b);

}  // namespace convmix

#endif  // CONVMIX_EVAL_H_
