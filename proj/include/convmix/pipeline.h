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

// Pipeline stages over files. Each stage reads its inputs, writes its
// artifacts and a "<artifact>.manifest.json" next to the main one that
// records input content hashes, seeds and parameters. Manifests carry no
// timestamps, so reruns are byte-identical.

#ifndef CONVMIX_PIPELINE_H_
#define CONVMIX_PIPELINE_H_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "convmix/augment.h"
#include "convmix/encoder.h"
#include "convmix/eval.h"
#include "convmix/genclient.h"
#include "convmix/train.h"

namespace convmix {

namespace fs = std::filesystem;

// "mock" or "remote" (configured from the environment).
std::unique_ptr<Backend> make_backend(const std::string& generator,
                                      std::uint64_t seed);

// Throws kMissingInput naming the subcommand that produces the file.
void require_input(const fs::path& path, const std::string& producer);

fs::path manifest_path(const fs::path& artifact);

struct AugmentStage {
  fs::path sessions;
  fs::path collection;
  fs::path qrels;
  fs::path variants_out;
  fs::path samples_out;
  std::string generator = "mock";
  int folds = 3;
  AugmentConfig augment;
};

nlohmann::json run_augment(const AugmentStage& stage);

struct ShuffleStage {
  fs::path sessions;
  fs::path qrels;  // optional; judgments are carried over when given
  fs::path sessions_out;
  fs::path qrels_out;
  std::uint64_t seed = 0;
};

nlohmann::json run_shuffle_topics(const ShuffleStage& stage);

enum class SelectMethod { kDiversity, kFim, kBoth };
SelectMethod parse_select_method(const std::string& name);
std::string select_method_name(SelectMethod method);

struct SelectStage {
  fs::path sessions;
  fs::path collection;
  fs::path qrels;
  fs::path variants;
  // Scoring model for FIM. Empty: a fresh encoder from `encoder`.
  fs::path checkpoint;
  fs::path out;
  SelectMethod method = SelectMethod::kBoth;
  int diversity_k = 3;
  int fim_k = 3;
  bool fim_global = false;
  std::uint64_t seed = 0;
  int workers = 1;
  EncoderConfig encoder;
};

nlohmann::json run_select(const SelectStage& stage);

struct TrainStage {
  fs::path sessions;
  fs::path collection;
  fs::path qrels;
  fs::path samples;          // optional
  fs::path init_checkpoint;  // optional; fresh encoder otherwise
  fs::path checkpoint_out;
  TrainConfig train;
  EncoderConfig encoder;
  int workers = 1;
};

nlohmann::json run_train(const TrainStage& stage);

struct IndexStage {
  fs::path collection;
  fs::path checkpoint;
  fs::path out;
  int workers = 1;
};

nlohmann::json run_index(const IndexStage& stage);

struct SearchStage {
  fs::path sessions;
  fs::path index;
  fs::path checkpoint;
  fs::path out;
  std::size_t top_k = 100;
  std::string tag = "convmix";
  int workers = 1;
};

nlohmann::json run_search(const SearchStage& stage);

struct EvalStage {
  fs::path run;
  fs::path qrels;
  fs::path report_out;  // optional JSON report
  std::vector<std::string> metrics = kDefaultMetrics;
  std::optional<int> mrr_cutoff;
};

Report run_eval(const EvalStage& stage);

struct PipelineConfig {
  fs::path data_dir;  // layout written by write_toy_corpus
  fs::path work_dir;
  std::string generator = "mock";
  std::uint64_t seed = 13;
  int m = 10;
  bool query_side = true;
  bool doc_side = true;
  SelectMethod method = SelectMethod::kBoth;
  int diversity_k = 3;
  int fim_k = 3;
  bool fim_global = false;
  TrainConfig train;
  EncoderConfig encoder;
  std::size_t top_k = 100;
  std::vector<std::string> metrics = kDefaultMetrics;
  int workers = 1;
};

struct PipelineResult {
  Report trained;
  Report untrained;
  nlohmann::json manifest;
};

// encoder_init.ckpt, variants.jsonl, augmented.jsonl, selected.jsonl,
// model.ckpt, index.bin, run.trec, report.json plus the untrained baseline
// run_init.trec and report_init.json. Fails fast on the first error.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace convmix

#endif  // CONVMIX_PIPELINE_H_
