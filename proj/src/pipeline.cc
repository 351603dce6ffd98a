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

#include "convmix/pipeline.h"

#include <algorithm>
#include <map>

#include <spdlog/spdlog.h>

#include "convmix/error.h"
#include "convmix/io.h"
#include "convmix/retrieval.h"
#include "convmix/select.h"
#include "convmix/text.h"

namespace convmix {

using nlohmann::json;

namespace {

json file_entry(const fs::path& path) {
  return {{"path", path.generic_string()}, {"hash", content_hash(path)}};
}

json encoder_json(const EncoderConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"feature_dim", c.feature_dim},
          {"hash_seed", c.hash_seed},
          {"init_seed", c.init_seed}};
}

json train_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"shuffle_seed", c.shuffle_seed},
          {"include_original", c.include_original},
          {"use_query_side", c.use_query_side},
          {"use_doc_side", c.use_doc_side}};
}

void write_manifest(const fs::path& artifact, const json& manifest) {
  write_file(manifest_path(artifact), manifest.dump(2) + "\n");
}

std::vector<Session> load_checked_sessions(const fs::path& path,
                                           const std::string& producer) {
  require_input(path, producer);
  return load_sessions(path);
}

Checkpoint load_or_init(const fs::path& path, const EncoderConfig& encoder) {
  if (path.empty()) {
    EncoderParams params = EncoderParams::initialize(encoder);
    AdamState adam = AdamState::zeros_like(params.query_proj());
    return Checkpoint{std::move(params), std::move(adam)};
  }
  require_input(path, "train");
  return load_checkpoint(path);
}

std::size_t smallest_set(std::span<const VariantSet> sets) {
  std::size_t n = 0;
  for (const auto& s : sets) {
    n = n == 0 ? s.variants.size() : std::min(n, s.variants.size());
  }
  return n;
}

std::size_t variant_total(std::span<const VariantSet> sets) {
  std::size_t n = 0;
  for (const auto& s : sets) n += s.variants.size();
  return n;
}

json side_counts(std::span<const AugmentedSample> samples) {
  std::size_t q = 0, d = 0;
  for (const auto& s : samples) (s.side == Side::kQuery ? q : d)++;
  return {{"Q", q}, {"D", d}};
}

}  // namespace

std::unique_ptr<Backend> make_backend(const std::string& generator,
                                      std::uint64_t seed) {
  if (generator == "mock") return std::make_unique<MockBackend>(seed);
  if (generator == "remote") {
    return std::make_unique<RemoteBackend>(RemoteConfig::from_env());
  }
  throw Error(ErrorKind::kConfig,
              "unknown generator '" + generator + "' (expected mock or remote)");
}

void require_input(const fs::path& path, const std::string& producer) {
  if (path.empty() || !fs::exists(path)) {
    throw Error(ErrorKind::kMissingInput,
                "missing input '" + path.generic_string() +
                    "'; produce it with `convmix " + producer + "`");
  }
}

fs::path manifest_path(const fs::path& artifact) {
  return fs::path(artifact.string() + ".manifest.json");
}

json run_augment(const AugmentStage& stage) {
  const auto sessions = load_checked_sessions(stage.sessions, "make-toy");
  require_input(stage.collection, "make-toy");
  require_input(stage.qrels, "make-toy");
  const Collection collection = load_collection(stage.collection);
  const RelevanceJudgments qrels = load_qrels(stage.qrels);
  qrels.check_resolvable(collection);
  if (stage.folds < 1 || stage.folds > stage.augment.m) {
    throw Error(ErrorKind::kConfig, "folds must lie in [1, m]");
  }

  auto backend = make_backend(stage.generator, stage.augment.seed);
  spdlog::info("[augment] {} sessions, m={}, generator={}", sessions.size(),
               stage.augment.m, backend->id());
  const auto variants =
      generate_variants(sessions, collection, qrels, stage.augment, *backend);
  const auto samples =
      build_samples(sessions, collection, qrels, variants, stage.folds);
  check_sample_invariants(samples, sessions, collection, qrels);
  write_variant_sets(variants, stage.variants_out);
  write_samples(samples, stage.samples_out);

  json manifest = {
      {"stage", "augment"},
      {"inputs",
       {{"sessions", file_entry(stage.sessions)},
        {"collection", file_entry(stage.collection)},
        {"qrels", file_entry(stage.qrels)}}},
      {"params",
       {{"generator", backend->id()},
        {"m", stage.augment.m},
        {"folds", stage.folds},
        {"query_side", stage.augment.query_side},
        {"doc_side", stage.augment.doc_side},
        {"seed", stage.augment.seed},
        {"temperature", stage.augment.generation.temperature},
        {"max_new_tokens", stage.augment.generation.max_new_tokens}}},
      {"outputs",
       {{"variants", file_entry(stage.variants_out)},
        {"samples", file_entry(stage.samples_out)}}},
      {"counts",
       {{"variant_sets", variants.size()}, {"samples", side_counts(samples)}}}};
  write_manifest(stage.samples_out, manifest);
  spdlog::info("[augment] {} variant sets, {} samples", variants.size(),
               samples.size());
  return manifest;
}

json run_shuffle_topics(const ShuffleStage& stage) {
  const auto sessions = load_checked_sessions(stage.sessions, "make-toy");
  std::vector<Session> shuffled;
  shuffled.reserve(sessions.size());
  for (const auto& s : sessions) shuffled.push_back(shuffle_topics(s, stage.seed));
  write_sessions(shuffled, stage.sessions_out);
  json manifest = {{"stage", "shuffle-topics"},
                   {"inputs", {{"sessions", file_entry(stage.sessions)}}},
                   {"params", {{"seed", stage.seed}}},
                   {"outputs", {{"sessions", file_entry(stage.sessions_out)}}}};
  if (!stage.qrels.empty()) {
    require_input(stage.qrels, "make-toy");
    write_qrels(transfer_qrels(shuffled, load_qrels(stage.qrels)), stage.qrels_out);
    manifest["inputs"]["qrels"] = file_entry(stage.qrels);
    manifest["outputs"]["qrels"] = file_entry(stage.qrels_out);
  }
  write_manifest(stage.sessions_out, manifest);
  return manifest;
}

SelectMethod parse_select_method(const std::string& name) {
  if (name == "diversity") return SelectMethod::kDiversity;
  if (name == "fim") return SelectMethod::kFim;
  if (name == "both") return SelectMethod::kBoth;
  throw Error(ErrorKind::kConfig, "unknown selection method '" + name +
                                      "' (expected diversity, fim or both)");
}

std::string select_method_name(SelectMethod method) {
  switch (method) {
    case SelectMethod::kDiversity:
      return "diversity";
    case SelectMethod::kFim:
      return "fim";
    case SelectMethod::kBoth:
      return "both";
  }
  return "both";
}

json run_select(const SelectStage& stage) {
  const auto sessions = load_checked_sessions(stage.sessions, "make-toy");
  require_input(stage.collection, "make-toy");
  require_input(stage.qrels, "make-toy");
  require_input(stage.variants, "augment");
  const Collection collection = load_collection(stage.collection);
  const RelevanceJudgments qrels = load_qrels(stage.qrels);
  std::vector<VariantSet> sets = load_variant_sets(stage.variants);
  const Checkpoint model = load_or_init(stage.checkpoint, stage.encoder);
  const std::size_t variants_before = variant_total(sets);

  if (stage.method != SelectMethod::kFim) {
    sets = diversity_select_all(sets, stage.diversity_k, stage.seed, model.params,
                                stage.workers);
  }
  const int folds = static_cast<int>(smallest_set(sets));
  std::vector<AugmentedSample> samples =
      folds > 0 ? build_samples(sessions, collection, qrels, sets, folds)
                : std::vector<AugmentedSample>{};
  const std::size_t samples_before = samples.size();
  if (stage.method != SelectMethod::kDiversity) {
    const auto scored =
        fim_score_all(samples, sessions, collection, model.params, stage.workers);
    samples = fim_topk(scored, stage.fim_k, stage.fim_global);
  }
  std::sort(samples.begin(), samples.end(), sample_key_less);
  check_sample_invariants(samples, sessions, collection, qrels);
  write_samples(samples, stage.out);

  json inputs = {{"sessions", file_entry(stage.sessions)},
                 {"collection", file_entry(stage.collection)},
                 {"qrels", file_entry(stage.qrels)},
                 {"variants", file_entry(stage.variants)}};
  if (!stage.checkpoint.empty()) inputs["checkpoint"] = file_entry(stage.checkpoint);
  json manifest = {
      {"stage", "select"},
      {"inputs", inputs},
      {"params",
       {{"method", select_method_name(stage.method)},
        {"diversity_k", stage.diversity_k},
        {"fim_k", stage.fim_k},
        {"fim_global", stage.fim_global},
        {"seed", stage.seed},
        {"encoder", encoder_json(stage.encoder)},
        {"doc_fingerprint", hex64(model.params.doc_fingerprint())}}},
      {"outputs", {{"selected", file_entry(stage.out)}}},
      {"counts",
       {{"variant_sets", sets.size()},
        {"variants_before", variants_before},
        {"variants_after", variant_total(sets)},
        {"folds", folds},
        {"samples_before", samples_before},
        {"samples_after", side_counts(samples)}}}};
  write_manifest(stage.out, manifest);
  spdlog::info("[select] {} -> {} samples ({})", samples_before, samples.size(),
               select_method_name(stage.method));
  return manifest;
}

json run_train(const TrainStage& stage) {
  validate_train_config(stage.train);
  const auto sessions = load_checked_sessions(stage.sessions, "make-toy");
  require_input(stage.collection, "make-toy");
  require_input(stage.qrels, "make-toy");
  const Collection collection = load_collection(stage.collection);
  const RelevanceJudgments qrels = load_qrels(stage.qrels);
  std::vector<AugmentedSample> samples;
  if (!stage.samples.empty()) {
    require_input(stage.samples, "select");
    samples = load_samples(stage.samples);
  }
  Checkpoint model = load_or_init(stage.init_checkpoint, stage.encoder);
  const auto pairs =
      build_training_set(sessions, collection, qrels, samples, stage.train);
  std::map<std::string, std::size_t> by_origin;
  for (const auto& p : pairs) ++by_origin[std::string(pair_origin_name(p.origin))];
  spdlog::info("[train] {} pairs, {} epochs, lr {}", pairs.size(),
               stage.train.epochs, stage.train.learning_rate);

  const FitResult fitted =
      fit(pairs, model.params, model.adam, stage.train, stage.workers);
  save_checkpoint(model, stage.checkpoint_out);

  json inputs = {{"sessions", file_entry(stage.sessions)},
                 {"collection", file_entry(stage.collection)},
                 {"qrels", file_entry(stage.qrels)}};
  if (!stage.samples.empty()) inputs["samples"] = file_entry(stage.samples);
  if (!stage.init_checkpoint.empty()) {
    inputs["init_checkpoint"] = file_entry(stage.init_checkpoint);
  }
  json manifest = {{"stage", "train"},
                   {"inputs", inputs},
                   {"params",
                    {{"train", train_json(stage.train)},
                     {"encoder", encoder_json(stage.encoder)}}},
                   {"outputs", {{"checkpoint", file_entry(stage.checkpoint_out)}}},
                   {"pairs", by_origin},
                   {"steps", fitted.steps},
                   {"epoch_loss", fitted.epoch_loss}};
  write_manifest(stage.checkpoint_out, manifest);
  if (!fitted.epoch_loss.empty()) {
    spdlog::info("[train] loss {:.4f} -> {:.4f}", fitted.epoch_loss.front(),
                 fitted.epoch_loss.back());
  }
  return manifest;
}

json run_index(const IndexStage& stage) {
  require_input(stage.collection, "make-toy");
  require_input(stage.checkpoint, "train");
  const Collection collection = load_collection(stage.collection);
  if (collection.empty()) throw Error(ErrorKind::kValidation, "empty collection");
  const Checkpoint model = load_checkpoint(stage.checkpoint);
  const DenseIndex index = build_index(collection, model.params, stage.workers);
  save_index(index, stage.out);
  json manifest = {{"stage", "index"},
                   {"inputs",
                    {{"collection", file_entry(stage.collection)},
                     {"checkpoint", file_entry(stage.checkpoint)}}},
                   {"params", {{"doc_fingerprint", hex64(index.fingerprint)}}},
                   {"outputs", {{"index", file_entry(stage.out)}}},
                   {"documents", index.size()}};
  write_manifest(stage.out, manifest);
  spdlog::info("[index] {} documents", index.size());
  return manifest;
}

json run_search(const SearchStage& stage) {
  const auto sessions = load_checked_sessions(stage.sessions, "make-toy");
  require_input(stage.index, "index");
  require_input(stage.checkpoint, "train");
  const DenseIndex index = load_index(stage.index);
  const Checkpoint model = load_checkpoint(stage.checkpoint);
  const RunFile run = batch_search(sessions, index, model.params, stage.top_k,
                                   stage.tag, stage.workers);
  validate_run(run);
  write_run(run, stage.out);
  json manifest = {{"stage", "search"},
                   {"inputs",
                    {{"sessions", file_entry(stage.sessions)},
                     {"index", file_entry(stage.index)},
                     {"checkpoint", file_entry(stage.checkpoint)}}},
                   {"params", {{"top_k", stage.top_k}, {"tag", stage.tag}}},
                   {"outputs", {{"run", file_entry(stage.out)}}},
                   {"rows", run.rows.size()}};
  write_manifest(stage.out, manifest);
  spdlog::info("[search] {} run rows", run.rows.size());
  return manifest;
}

Report run_eval(const EvalStage& stage) {
  require_input(stage.run, "search");
  require_input(stage.qrels, "make-toy");
  const Report report = evaluate(load_run(stage.run), load_qrels(stage.qrels),
                                 stage.metrics, stage.mrr_cutoff);
  if (!stage.report_out.empty()) {
    write_file(stage.report_out, report_to_json(report).dump(2) + "\n");
  }
  return report;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  const fs::path& data = config.data_dir;
  const fs::path& work = config.work_dir;
  fs::create_directories(work);
  const fs::path collection = data / "collection.tsv";
  const fs::path train_sessions = data / "train_sessions.jsonl";
  const fs::path train_qrels = data / "train_qrels.txt";
  const fs::path test_sessions = data / "test_sessions.jsonl";
  const fs::path test_qrels = data / "test_qrels.txt";

  const fs::path init_ckpt = work / "encoder_init.ckpt";
  {
    EncoderParams params = EncoderParams::initialize(config.encoder);
    AdamState adam = AdamState::zeros_like(params.query_proj());
    save_checkpoint(Checkpoint{std::move(params), std::move(adam)}, init_ckpt);
  }

  AugmentStage augment;
  augment.sessions = train_sessions;
  augment.collection = collection;
  augment.qrels = train_qrels;
  augment.variants_out = work / "variants.jsonl";
  augment.samples_out = work / "augmented.jsonl";
  augment.generator = config.generator;
  augment.folds = std::min(config.diversity_k, config.m);
  augment.augment.m = config.m;
  augment.augment.query_side = config.query_side;
  augment.augment.doc_side = config.doc_side;
  augment.augment.seed = config.seed;
  augment.augment.workers = config.workers;
  const bool augmenting = config.query_side || config.doc_side;
  if (augmenting) run_augment(augment);

  SelectStage select;
  select.sessions = train_sessions;
  select.collection = collection;
  select.qrels = train_qrels;
  select.variants = augment.variants_out;
  select.checkpoint = init_ckpt;
  select.out = work / "selected.jsonl";
  select.method = config.method;
  select.diversity_k = config.diversity_k;
  select.fim_k = config.fim_k;
  select.fim_global = config.fim_global;
  select.seed = config.seed;
  select.workers = config.workers;
  select.encoder = config.encoder;
  if (augmenting) run_select(select);

  TrainStage train;
  train.sessions = train_sessions;
  train.collection = collection;
  train.qrels = train_qrels;
  if (augmenting) train.samples = select.out;
  train.init_checkpoint = init_ckpt;
  train.checkpoint_out = work / "model.ckpt";
  train.train = config.train;
  train.train.use_query_side = config.query_side;
  train.train.use_doc_side = config.doc_side;
  train.encoder = config.encoder;
  train.workers = config.workers;
  const json train_manifest = run_train(train);

  IndexStage index{collection, train.checkpoint_out, work / "index.bin",
                   config.workers};
  run_index(index);

  PipelineResult result;
  SearchStage search{test_sessions, index.out, train.checkpoint_out,
                     work / "run.trec", config.top_k, "convmix", config.workers};
  run_search(search);
  result.trained = run_eval({search.out, test_qrels, work / "report.json",
                             config.metrics, std::nullopt});

  // Untrained baseline. The document side is frozen, so the same index
  // serves both checkpoints.
  SearchStage baseline{test_sessions, index.out, init_ckpt,
                       work / "run_init.trec", config.top_k, "untrained",
                       config.workers};
  run_search(baseline);
  result.untrained = run_eval({baseline.out, test_qrels,
                               work / "report_init.json", config.metrics,
                               std::nullopt});

  result.manifest = {
      {"stage", "pipeline"},
      {"params",
       {{"generator", config.generator},
        {"seed", config.seed},
        {"m", config.m},
        {"query_side", config.query_side},
        {"doc_side", config.doc_side},
        {"method", select_method_name(config.method)},
        {"diversity_k", config.diversity_k},
        {"fim_k", config.fim_k},
        {"fim_global", config.fim_global},
        {"train", train_json(config.train)},
        {"encoder", encoder_json(config.encoder)},
        {"top_k", config.top_k}}},
      {"epoch_loss", train_manifest["epoch_loss"]},
      {"outputs",
       {{"run", file_entry(search.out)}, {"checkpoint", file_entry(train.checkpoint_out)}}},
      {"trained", report_to_json(result.trained)},
      {"untrained", report_to_json(result.untrained)}};
  for (auto& [name, metric] : result.manifest["trained"].items()) {
    metric.erase("per_query");
  }
  for (auto& [name, metric] : result.manifest["untrained"].items()) {
    metric.erase("per_query");
  }
  write_file(work / "pipeline.manifest.json", result.manifest.dump(2) + "\n");
  return result;
}

}  // namespace convmix
