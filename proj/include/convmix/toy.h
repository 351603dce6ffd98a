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

// Synthetic corpus with planted lexical relevance. Every entity has one
// document per aspect (population, history, economy, climate, cuisine).
// Queries ask about aspects in a conversational dialect whose words never
// occur in documents, so only fine-tuning can connect the two. Test sessions
// revisit training entities with a fresh choice of aspects, and half of
// their asks are reworded with vocabulary the training queries never use.

#ifndef CONVMIX_TOY_H_
#define CONVMIX_TOY_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "convmix/corpus.h"

namespace convmix {

struct ToyConfig {
  int entities = 40;
  int train_sessions = 20;
  int test_sessions = 10;
  int turns = 4;  // aspects per session, at most 5
  std::uint64_t seed = 13;
};

struct ToyCorpus {
  Collection collection;
  std::vector<Session> train_sessions;
  RelevanceJudgments train_qrels;
  // New sessions about the first test_sessions training entities.
  std::vector<Session> test_sessions;
  RelevanceJudgments test_qrels;
};

// Throws kConfig when the entity budget cannot cover both splits.
ToyCorpus make_toy_corpus(const ToyConfig& config = {});

// collection.tsv, train_sessions.jsonl, train_qrels.txt,
// test_sessions.jsonl, test_qrels.txt
void write_toy_corpus(const ToyCorpus& corpus, const std::filesystem::path& dir);

}  // namespace convmix

#endif  // CONVMIX_TOY_H_
