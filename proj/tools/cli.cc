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

#include "cli.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "convmix/error.h"
#include "convmix/eval.h"
#include "convmix/pipeline.h"
#include "convmix/toy.h"

namespace convmix::cli {

namespace {

struct Sides {
  bool q = true;
  bool d = true;
};

Sides parse_sides(const std::string& text) {
  if (text == "both") return {true, true};
  if (text == "none" || text.empty()) return {false, false};
  Sides out{false, false};
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part == "q" || part == "Q") {
      out.q = true;
    } else if (part == "d" || part == "D") {
      out.d = true;
    } else {
      throw Error(ErrorKind::kConfig, "unknown side '" + part +
                                          "' (expected q, d, both or none)");
    }
  }
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

void add_encoder_options(CLI::App* app, EncoderConfig& encoder) {
  app->add_option("--embed-dim", encoder.embed_dim, "Embedding dimension");
  app->add_option("--feature-dim", encoder.feature_dim,
                  "Hashed feature dimension (power of two)");
  app->add_option("--hash-seed", encoder.hash_seed, "Featurizer hash seed");
  app->add_option("--init-seed", encoder.init_seed, "Projection init seed");
}

// Applies "[section] key = value" entries to options the command line left
// unset. Sections name subcommands; [encoder] feeds the encoder options of
// whichever subcommand has them; keys outside any section feed global
// options. `pipeline` reads every section.
void apply_config(const std::string& path, CLI::App& app, CLI::App& active) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::kMissingInput, "cannot open config file " + path);
  }
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw Error(ErrorKind::kConfig, path + ": " + e.what());
  }
  const bool pipeline = active.get_name() == "pipeline";
  static const std::set<std::string> kStages = {
      "augment", "shuffle-topics", "select", "train", "index",
      "search",  "eval",           "ttest",  "pipeline", "make-toy", "encoder"};
  std::map<std::string, std::vector<std::string>> applied;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    CLI::App* target = &active;
    std::string section = item.parents.empty() ? "" : item.parents.front();
    if (item.parents.size() > 1) {
      throw Error(ErrorKind::kConfig, path + ": nested section " + item.fullname());
    }
    if (section.empty()) {
      target = &app;
    } else if (!kStages.count(section)) {
      throw Error(ErrorKind::kConfig, path + ": unknown section [" + section + "]");
    } else if (!pipeline && section != active.get_name() && section != "encoder") {
      continue;
    }
    CLI::Option* opt = target->get_option_no_throw("--" + item.name);
    if (!opt && section == "encoder") continue;  // stage without an encoder
    if (!opt) {
      throw Error(ErrorKind::kConfig, path + ": unknown key '" + item.fullname() +
                                          "' for " + active.get_name());
    }
    if (auto prior = applied.find(item.name); prior != applied.end()) {
      if (prior->second != item.inputs) {
        throw Error(ErrorKind::kConfig,
                    path + ": conflicting values for '" + item.name + "'");
      }
      continue;
    }
    applied[item.name] = item.inputs;
    if (opt->count() > 0) continue;  // flags win
    for (const auto& v : item.inputs) opt->add_result(v);
    opt->run_callback();
  }
}

void configure_logging(std::ostream& err, bool quiet, bool verbose) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("convmix", sink);
  logger->set_pattern("%v");
  logger->set_level(quiet     ? spdlog::level::warn
                    : verbose ? spdlog::level::debug
                              : spdlog::level::info);
  spdlog::set_default_logger(logger);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"convmix: augmented training data for conversational dense retrieval",
               "convmix"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  int workers = 1;
  bool quiet = false;
  bool verbose = false;
  app.add_option("--config", config_path, "Config file ([section] key = value)");
  app.add_option("--workers", workers, "Worker threads per stage")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "Only warnings and errors on stderr");
  app.add_flag("--verbose", verbose, "Debug logging on stderr");

  // make-toy
  ToyConfig toy;
  std::string toy_out;
  auto* make_toy = app.add_subcommand("make-toy", "Write the synthetic toy corpus");
  make_toy->add_option("--out", toy_out, "Output directory")->required();
  make_toy->add_option("--seed", toy.seed, "Generator seed");
  make_toy->add_option("--entities", toy.entities, "Entities (5 documents each)");
  make_toy->add_option("--train-sessions", toy.train_sessions);
  make_toy->add_option("--test-sessions", toy.test_sessions);
  make_toy->add_option("--turns", toy.turns, "Turns per session (1-5)");

  // augment
  AugmentStage augment;
  std::string augment_side = "both";
  auto* augment_cmd = app.add_subcommand("augment", "Generate query and document variants");
  augment_cmd->add_option("--sessions", augment.sessions)->required();
  augment_cmd->add_option("--collection", augment.collection)->required();
  augment_cmd->add_option("--qrels", augment.qrels)->required();
  augment_cmd->add_option("--variants-out", augment.variants_out)->required();
  augment_cmd->add_option("--out", augment.samples_out)->required();
  augment_cmd->add_option("--side", augment_side, "q, d or both");
  augment_cmd->add_option("--folds", augment.folds, "Samples per judgment and side");
  augment_cmd->add_option("--generator", augment.generator, "mock or remote");
  augment_cmd->add_option("--m", augment.augment.m, "Variants generated per item");
  augment_cmd->add_option("--seed", augment.augment.seed);
  augment_cmd->add_option("--temperature", augment.augment.generation.temperature);
  augment_cmd->add_option("--max-new-tokens", augment.augment.generation.max_new_tokens);
  augment_cmd->add_option("--regenerate-attempts", augment.augment.regenerate_attempts);

  // shuffle-topics
  ShuffleStage shuffle;
  auto* shuffle_cmd = app.add_subcommand("shuffle-topics", "Permute topic blocks of sessions");
  shuffle_cmd->add_option("--sessions", shuffle.sessions)->required();
  shuffle_cmd->add_option("--out", shuffle.sessions_out)->required();
  shuffle_cmd->add_option("--qrels", shuffle.qrels);
  shuffle_cmd->add_option("--qrels-out", shuffle.qrels_out);
  shuffle_cmd->add_option("--seed", shuffle.seed);

  // select
  SelectStage select;
  std::string select_method = "both";
  std::optional<int> select_k;
  auto* select_cmd = app.add_subcommand("select", "Diversity and FIM selection");
  select_cmd->add_option("--sessions", select.sessions)->required();
  select_cmd->add_option("--collection", select.collection)->required();
  select_cmd->add_option("--qrels", select.qrels)->required();
  select_cmd->add_option("--variants", select.variants)->required();
  select_cmd->add_option("--checkpoint", select.checkpoint,
                         "Scoring model (default: fresh encoder)");
  select_cmd->add_option("--out", select.out)->required();
  select_cmd->add_option("--method", select_method, "diversity, fim or both");
  select_cmd->add_option("--k", select_k, "k for both selections");
  select_cmd->add_option("--diversity-k", select.diversity_k);
  select_cmd->add_option("--fim-k", select.fim_k);
  select_cmd->add_flag("--fim-global", select.fim_global,
                       "Global FIM top-k instead of per turn");
  select_cmd->add_option("--seed", select.seed);
  add_encoder_options(select_cmd, select.encoder);

  // train
  TrainStage train;
  std::string train_sides = "q,d";
  auto* train_cmd = app.add_subcommand("train", "Fine-tune the query encoder");
  train_cmd->add_option("--sessions", train.sessions)->required();
  train_cmd->add_option("--collection", train.collection)->required();
  train_cmd->add_option("--qrels", train.qrels)->required();
  train_cmd->add_option("--samples", train.samples, "Selected augmented samples");
  train_cmd->add_option("--init", train.init_checkpoint, "Starting checkpoint");
  train_cmd->add_option("--out", train.checkpoint_out)->required();
  train_cmd->add_option("--epochs", train.train.epochs);
  train_cmd->add_option("--batch", train.train.batch_size);
  train_cmd->add_option("--lr", train.train.learning_rate);
  train_cmd->add_option("--seed", train.train.shuffle_seed, "Shuffle seed");
  train_cmd->add_option("--sides", train_sides, "q,d / q / d / none");
  train_cmd->add_option("--include-original", train.train.include_original,
                        "Train on the original judgments too (true/false)");
  add_encoder_options(train_cmd, train.encoder);

  // index
  IndexStage index;
  auto* index_cmd = app.add_subcommand("index", "Embed the collection");
  index_cmd->add_option("--collection", index.collection)->required();
  index_cmd->add_option("--checkpoint", index.checkpoint)->required();
  index_cmd->add_option("--out", index.out)->required();

  // search
  SearchStage search;
  auto* search_cmd = app.add_subcommand("search", "Retrieve for every session turn");
  search_cmd->add_option("--sessions", search.sessions)->required();
  search_cmd->add_option("--index", search.index)->required();
  search_cmd->add_option("--checkpoint", search.checkpoint)->required();
  search_cmd->add_option("--out", search.out)->required();
  search_cmd->add_option("--topk", search.top_k);
  search_cmd->add_option("--tag", search.tag);

  // eval
  EvalStage eval;
  std::string eval_metrics = "mrr,ndcg_cut_3,recall_10,recall_100";
  auto* eval_cmd = app.add_subcommand("eval", "Score a run against judgments");
  eval_cmd->add_option("--run", eval.run)->required();
  eval_cmd->add_option("--qrels", eval.qrels)->required();
  eval_cmd->add_option("--metrics", eval_metrics);
  eval_cmd->add_option("--mrr-cutoff", eval.mrr_cutoff);
  eval_cmd->add_option("--report", eval.report_out, "JSON report path");

  // ttest
  std::string run_a, run_b, ttest_qrels, ttest_metric = "mrr";
  auto* ttest_cmd = app.add_subcommand("ttest", "Paired t-test between two runs");
  ttest_cmd->add_option("--run-a", run_a)->required();
  ttest_cmd->add_option("--run-b", run_b)->required();
  ttest_cmd->add_option("--qrels", ttest_qrels)->required();
  ttest_cmd->add_option("--metric", ttest_metric);

  // pipeline
  PipelineConfig pipe;
  std::string pipe_side = "both", pipe_method = "both", pipe_metrics = eval_metrics;
  std::optional<int> pipe_k;
  auto* pipe_cmd = app.add_subcommand("pipeline", "Run every stage on a data directory");
  pipe_cmd->add_option("--data", pipe.data_dir, "Directory written by make-toy")->required();
  pipe_cmd->add_option("--work", pipe.work_dir, "Artifact directory")->required();
  pipe_cmd->add_option("--generator", pipe.generator);
  pipe_cmd->add_option("--seed", pipe.seed);
  pipe_cmd->add_option("--m", pipe.m);
  pipe_cmd->add_option("--side", pipe_side, "q, d, both or none");
  pipe_cmd->add_option("--method", pipe_method);
  pipe_cmd->add_option("--k", pipe_k);
  pipe_cmd->add_option("--diversity-k", pipe.diversity_k);
  pipe_cmd->add_option("--fim-k", pipe.fim_k);
  pipe_cmd->add_flag("--fim-global", pipe.fim_global);
  pipe_cmd->add_option("--epochs", pipe.train.epochs);
  pipe_cmd->add_option("--batch", pipe.train.batch_size);
  pipe_cmd->add_option("--lr", pipe.train.learning_rate);
  pipe_cmd->add_option("--include-original", pipe.train.include_original);
  pipe_cmd->add_option("--topk", pipe.top_k);
  pipe_cmd->add_option("--metrics", pipe_metrics);
  add_encoder_options(pipe_cmd, pipe.encoder);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::stringstream o, eout;
    const int code = app.exit(e, o, eout);
    out << o.str();
    if (code != 0) err << "error[usage]: " << eout.str();
    return code;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (!config_path.empty()) apply_config(config_path, app, *active);
    configure_logging(err, quiet, verbose);
    const std::string name = active->get_name();
    if (name == "make-toy") {
      write_toy_corpus(make_toy_corpus(toy), toy_out);
      spdlog::info("[make-toy] wrote {}", toy_out);
    } else if (name == "augment") {
      const Sides sides = parse_sides(augment_side);
      augment.augment.query_side = sides.q;
      augment.augment.doc_side = sides.d;
      augment.augment.workers = workers;
      run_augment(augment);
    } else if (name == "shuffle-topics") {
      if (!shuffle.qrels.empty() && shuffle.qrels_out.empty()) {
        throw Error(ErrorKind::kConfig, "--qrels needs --qrels-out");
      }
      run_shuffle_topics(shuffle);
    } else if (name == "select") {
      select.method = parse_select_method(select_method);
      if (select_k) select.diversity_k = select.fim_k = *select_k;
      select.workers = workers;
      run_select(select);
    } else if (name == "train") {
      const Sides sides = parse_sides(train_sides);
      train.train.use_query_side = sides.q;
      train.train.use_doc_side = sides.d;
      if ((sides.q || sides.d) && train.samples.empty()) {
        spdlog::warn("[train] no --samples given; training on original pairs only");
      }
      train.workers = workers;
      run_train(train);
    } else if (name == "index") {
      index.workers = workers;
      run_index(index);
    } else if (name == "search") {
      search.workers = workers;
      run_search(search);
    } else if (name == "eval") {
      eval.metrics = split_list(eval_metrics);
      out << report_to_tsv(run_eval(eval));
    } else if (name == "ttest") {
      require_input(run_a, "search");
      require_input(run_b, "search");
      require_input(ttest_qrels, "make-toy");
      const auto qrels = load_qrels(ttest_qrels);
      const auto a = evaluate_metric(ttest_metric, load_run(run_a), qrels);
      const auto b = evaluate_metric(ttest_metric, load_run(run_b), qrels);
      const TTestResult t = paired_t_test(a, b);
      out << ttest_metric << "\tmean_a\t" << format_double(a.mean) << "\n"
          << ttest_metric << "\tmean_b\t" << format_double(b.mean) << "\n"
          << "t\t" << format_double(t.t) << "\n"
          << "p\t" << format_double(t.p) << "\n"
          << "dof\t" << t.dof << "\n";
    } else if (name == "pipeline") {
      const Sides sides = parse_sides(pipe_side);
      pipe.query_side = sides.q;
      pipe.doc_side = sides.d;
      pipe.method = parse_select_method(pipe_method);
      if (pipe_k) pipe.diversity_k = pipe.fim_k = *pipe_k;
      pipe.metrics = split_list(pipe_metrics);
      pipe.train.shuffle_seed = pipe.seed;
      pipe.workers = workers;
      const PipelineResult result = run_pipeline(pipe);
      out << report_to_tsv(result.trained);
    }
  } catch (const Error& e) {
    err << "error[" << error_kind_name(e.kind()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace convmix::cli
