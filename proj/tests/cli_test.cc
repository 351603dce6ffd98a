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

#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "convmix/augment.h"
#include "test_util.h"

namespace convmix {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& path) { return path.string(); }

// A small toy corpus in dir/data.
std::filesystem::path make_data(const std::filesystem::path& dir) {
  const auto data = dir / "data";
  const auto r = run({"make-toy", "--out", p(data), "--entities", "6",
                      "--train-sessions", "3", "--test-sessions", "2", "--turns", "3"});
  EXPECT_EQ(r.code, 0) << r.err;
  return data;
}

TEST(Cli, EvalPrintsDefaultMetrics) {
  const auto dir = testing::temp_dir();
  testing::write_text(dir / "q.txt", "t_1 0 a 1\nt_2 0 b 1\n");
  testing::write_text(dir / "r.trec", "t_1 Q0 a 1 2 x\nt_2 Q0 c 1 2 x\nt_2 Q0 b 2 1 x\n");
  const auto r = run({"eval", "--run", p(dir / "r.trec"), "--qrels", p(dir / "q.txt"),
                      "--report", p(dir / "rep.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out,
            "mrr\tall\t0.7500\nndcg_cut_3\tall\t0.8155\nrecall_10\tall\t1.0000\n"
            "recall_100\tall\t1.0000\n");
  EXPECT_TRUE(std::filesystem::exists(dir / "rep.json"));
}

TEST(Cli, MissingInputNamesProducer) {
  const auto dir = testing::temp_dir();
  const auto r = run({"index", "--collection", p(dir / "nope.tsv"), "--checkpoint",
                      p(dir / "model.ckpt"), "--out", p(dir / "i.bin")});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error[missing_input]", 0), 0u) << r.err;
  EXPECT_NE(r.err.find("convmix make-toy"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run({}).code, 0);
  const auto r = run({"eval", "--run", "x"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("error[usage]"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigFillsUnsetOptionsAndFlagsWin) {
  const auto dir = testing::temp_dir();
  testing::write_text(dir / "q.txt", "t_1 0 a 1\n");
  testing::write_text(dir / "r.trec", "t_1 Q0 b 1 2 x\nt_1 Q0 a 2 1 x\n");
  testing::write_text(dir / "c.ini", "[eval]\nmetrics = mrr\n[train]\nlr = 0.5\n");
  const std::vector<std::string> base = {"--config", p(dir / "c.ini"), "eval", "--run",
                                         p(dir / "r.trec"), "--qrels", p(dir / "q.txt")};
  auto r = run(base);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "mrr\tall\t0.5000\n");
  auto with_flag = base;
  with_flag.insert(with_flag.end(), {"--metrics", "recall_1"});
  r = run(with_flag);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "recall_1\tall\t0.0000\n");
}

TEST(Cli, ConfigRejectsUnknownKeysAndConflicts) {
  const auto dir = testing::temp_dir();
  testing::write_text(dir / "q.txt", "t_1 0 a 1\n");
  testing::write_text(dir / "r.trec", "t_1 Q0 a 1 2 x\n");
  const std::vector<std::string> tail = {"eval", "--run", p(dir / "r.trec"), "--qrels",
                                         p(dir / "q.txt")};
  auto with = [&](const std::string& ini) {
    testing::write_text(dir / "c.ini", ini);
    std::vector<std::string> args = {"--config", p(dir / "c.ini")};
    args.insert(args.end(), tail.begin(), tail.end());
    return run(args);
  };
  auto r = with("[eval]\nbogus = 1\n");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error[config]"), std::string::npos) << r.err;
  r = with("[nowhere]\nx = 1\n");
  EXPECT_NE(r.err.find("error[config]"), std::string::npos) << r.err;
  testing::write_text(dir / "c.ini", "[augment]\nseed = 1\n[select]\nseed = 2\n");
  r = run({"--config", p(dir / "c.ini"), "pipeline", "--data", p(dir), "--work", p(dir / "w")});
  EXPECT_NE(r.err.find("error[config]"), std::string::npos) << r.err;
}

TEST(Cli, SelectKeepsKPerGroup) {
  const auto dir = testing::temp_dir();
  const auto data = make_data(dir);
  auto r = run({"augment", "--sessions", p(data / "train_sessions.jsonl"), "--collection",
                p(data / "collection.tsv"), "--qrels", p(data / "train_qrels.txt"),
                "--variants-out", p(dir / "variants.jsonl"), "--out",
                p(dir / "augmented.jsonl"), "--m", "6", "--folds", "6", "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"select", "--sessions", p(data / "train_sessions.jsonl"), "--collection",
           p(data / "collection.tsv"), "--qrels", p(data / "train_qrels.txt"), "--variants",
           p(dir / "variants.jsonl"), "--out", p(dir / "selected.jsonl"), "--method", "fim",
           "--k", "3", "--embed-dim", "16", "--feature-dim", "4096"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("[select]"), std::string::npos);
  std::map<std::tuple<std::string, char, std::string>, int> groups;
  for (const auto& s : load_samples(dir / "selected.jsonl")) {
    ++groups[{s.origin_turn_id, side_code(s.side), s.doc_id}];
    EXPECT_TRUE(s.fim_score.has_value());
  }
  EXPECT_EQ(groups.size(), 9u * 2u);  // 3 sessions x 3 turns, both sides
  for (const auto& [key, n] : groups) EXPECT_EQ(n, 3);
  EXPECT_TRUE(std::filesystem::exists(dir / "selected.jsonl.manifest.json"));
}

TEST(Cli, ShuffleTopicsWritesSessionsAndQrels) {
  const auto dir = testing::temp_dir();
  const auto data = make_data(dir);
  const auto r = run({"shuffle-topics", "--sessions", p(data / "train_sessions.jsonl"),
                      "--out", p(dir / "shuf.jsonl"), "--qrels",
                      p(data / "train_qrels.txt"), "--qrels-out", p(dir / "shuf_qrels.txt"),
                      "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto sessions = load_sessions(dir / "shuf.jsonl");
  ASSERT_EQ(sessions.size(), 3u);
  EXPECT_EQ(sessions[0].conv_id.substr(sessions[0].conv_id.size() - 5), "-shuf");
  const auto qrels = load_qrels(dir / "shuf_qrels.txt");
  for (const auto& t : sessions[0].turns) EXPECT_TRUE(qrels.contains(t.turn_id));
}

}  // namespace
}  // namespace convmix
