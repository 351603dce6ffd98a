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

#include "convmix/eval.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <functional>
#include <set>

#include <boost/math/special_functions/beta.hpp>
#include <spdlog/spdlog.h>

#include "convmix/error.h"

namespace convmix {

namespace {

using PerTurn = std::function<std::optional<double>(
    const std::vector<std::string>& ranked, const RelevanceJudgments::Grades&)>;

MetricResult aggregate(const RunFile& run, const RelevanceJudgments& qrels,
                       const std::string& name, const PerTurn& per_turn) {
  MetricResult out;
  std::size_t skipped = 0;
  bool evaluable = false;
  for (const auto& [turn, ranked] : run.ranked_lists()) {
    const auto* grades = qrels.find(turn);
    if (!grades) {
      ++skipped;
      continue;
    }
    evaluable = true;
    if (auto value = per_turn(ranked, *grades)) out.per_query[turn] = *value;
  }
  if (skipped > 0) {
    spdlog::warn("[eval] {}: {} run turns have no judgments and were skipped",
                 name, skipped);
  }
  if (!evaluable || out.per_query.empty()) {
    throw Error(ErrorKind::kNoEvaluableQueries,
                name + ": no run turn has usable judgments");
  }
  double sum = 0.0;
  for (const auto& [turn, v] : out.per_query) sum += v;
  out.mean = sum / static_cast<double>(out.per_query.size());
  return out;
}

int grade_of(const RelevanceJudgments::Grades& grades, const std::string& doc) {
  auto it = grades.find(doc);
  return it == grades.end() ? 0 : it->second;
}

std::size_t relevant_count(const RelevanceJudgments::Grades& grades) {
  return static_cast<std::size_t>(std::count_if(
      grades.begin(), grades.end(), [](const auto& g) { return g.second >= 1; }));
}

std::optional<int> suffix_number(const std::string& name,
                                 const std::string& prefix) {
  if (name.rfind(prefix, 0) != 0) return std::nullopt;
  int value = 0;
  const char* begin = name.data() + prefix.size();
  const char* end = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end || value < 1) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

MetricResult mrr(const RunFile& run, const RelevanceJudgments& qrels,
                 std::optional<int> cutoff) {
  return aggregate(run, qrels, "mrr",
                   [&](const auto& ranked, const auto& grades) {
                     std::size_t limit = ranked.size();
                     if (cutoff) limit = std::min(limit, static_cast<std::size_t>(*cutoff));
                     for (std::size_t i = 0; i < limit; ++i) {
                       if (grade_of(grades, ranked[i]) >= 1) {
                         return std::optional<double>(1.0 / static_cast<double>(i + 1));
                       }
                     }
                     return std::optional<double>(0.0);
                   });
}

MetricResult ndcg_at(const RunFile& run, const RelevanceJudgments& qrels,
                     int cutoff) {
  if (cutoff < 1) throw Error(ErrorKind::kConfig, "NDCG cutoff must be >= 1");
  const auto c = static_cast<std::size_t>(cutoff);
  return aggregate(
      run, qrels, "ndcg_cut_" + std::to_string(cutoff),
      [&](const auto& ranked, const auto& grades) {
        double dcg = 0.0;
        for (std::size_t i = 0; i < std::min(c, ranked.size()); ++i) {
          dcg += grade_of(grades, ranked[i]) / std::log2(static_cast<double>(i) + 2.0);
        }
        std::vector<int> ideal;
        for (const auto& [doc, g] : grades) {
          if (g > 0) ideal.push_back(g);
        }
        std::sort(ideal.rbegin(), ideal.rend());
        double idcg = 0.0;
        for (std::size_t i = 0; i < std::min(c, ideal.size()); ++i) {
          idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
        }
        return std::optional<double>(idcg > 0.0 ? dcg / idcg : 0.0);
      });
}

MetricResult recall_at(const RunFile& run, const RelevanceJudgments& qrels,
                       int cutoff) {
  if (cutoff < 1) throw Error(ErrorKind::kConfig, "recall cutoff must be >= 1");
  const auto c = static_cast<std::size_t>(cutoff);
  return aggregate(run, qrels, "recall_" + std::to_string(cutoff),
                   [&](const auto& ranked, const auto& grades) {
                     const std::size_t total = relevant_count(grades);
                     if (total == 0) return std::optional<double>();
                     std::size_t found = 0;
                     for (std::size_t i = 0; i < std::min(c, ranked.size()); ++i) {
                       if (grade_of(grades, ranked[i]) >= 1) ++found;
                     }
                     return std::optional<double>(static_cast<double>(found) /
                                                  static_cast<double>(total));
                   });
}

MetricResult evaluate_metric(const std::string& name, const RunFile& run,
                             const RelevanceJudgments& qrels,
                             std::optional<int> mrr_cutoff) {
  if (name == "mrr") return mrr(run, qrels, mrr_cutoff);
  if (auto c = suffix_number(name, "ndcg_cut_")) return ndcg_at(run, qrels, *c);
  if (auto c = suffix_number(name, "recall_")) return recall_at(run, qrels, *c);
  throw Error(ErrorKind::kConfig, "unknown metric '" + name +
                                      "' (expected mrr, ndcg_cut_<k>, recall_<k>)");
}

Report evaluate(const RunFile& run, const RelevanceJudgments& qrels,
                const std::vector<std::string>& metrics,
                std::optional<int> mrr_cutoff) {
  Report report;
  for (const auto& m : metrics) report[m] = evaluate_metric(m, run, qrels, mrr_cutoff);
  return report;
}

nlohmann::json report_to_json(const Report& report) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, result] : report) {
    out[name] = {{"mean", result.mean}, {"per_query", result.per_query}};
  }
  return out;
}

Report report_from_json(const nlohmann::json& json) {
  Report report;
  try {
    for (const auto& [name, value] : json.items()) {
      MetricResult r;
      r.mean = value.at("mean").get<double>();
      r.per_query = value.at("per_query").get<std::map<std::string, double>>();
      report[name] = std::move(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("malformed report: ") + e.what());
  }
  return report;
}

std::string report_to_tsv(const Report& report) {
  std::string out;
  for (const auto& [name, result] : report) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", result.mean);
    out += name + "\tall\t" + buf + "\n";
  }
  return out;
}

TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kAlignment,
                "paired t-test on " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()) + " scores");
  }
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorKind::kDegenerate, "paired t-test needs n >= 2");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double var = ss / static_cast<double>(n - 1);
  if (!(var > 0.0)) {
    throw Error(ErrorKind::kDegenerate,
                "paired differences have zero variance; t is undefined");
  }
  TTestResult out;
  out.dof = static_cast<int>(n - 1);
  out.t = mean / std::sqrt(var / static_cast<double>(n));
  const double nu = out.dof;
  // P(|T| > t) = I_{nu / (nu + t^2)}(nu / 2, 1 / 2).
  out.p = boost::math::ibeta(nu / 2.0, 0.5, nu / (nu + out.t * out.t));
  return out;
}

TTestResult paired_t_test(const MetricResult& a, const MetricResult& b) {
  std::vector<double> va, vb;
  for (const auto& [turn, v] : a.per_query) {
    auto it = b.per_query.find(turn);
    if (it == b.per_query.end()) {
      throw Error(ErrorKind::kAlignment, "turn " + turn + " missing from run B");
    }
    va.push_back(v);
    vb.push_back(it->second);
  }
  if (a.per_query.size() != b.per_query.size()) {
    throw Error(ErrorKind::kAlignment, "run B has turns missing from run A");
  }
  return paired_t_test(va, vb);
}

}  // namespace convmix
