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

// Exact maximum-inner-product search over document embeddings.

#ifndef CONVMIX_RETRIEVAL_H_
#define CONVMIX_RETRIEVAL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "convmix/corpus.h"
#include "convmix/encoder.h"

namespace convmix {

struct DenseIndex {
  std::vector<std::string> doc_ids;
  std::size_t dim = 0;
  std::vector<float> embeddings;  // doc_ids.size() x dim, row-major
  std::uint64_t fingerprint = 0;  // EncoderParams::doc_fingerprint()

  std::size_t size() const { return doc_ids.size(); }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(embeddings).subspan(i * dim, dim);
  }

  bool operator==(const DenseIndex&) const = default;
};

DenseIndex build_index(const Collection& collection, const EncoderParams& params,
                       int workers = 1);

struct SearchHit {
  std::string doc_id;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

// Top min(top_k, |docs|) rows by dot product, accumulated in double; score
// descending, then doc id ascending.
std::vector<SearchHit> search_embedding(std::span<const double> query,
                                        const DenseIndex& index,
                                        std::size_t top_k);

// Throws kStaleIndex when the index was built with another document side.
std::vector<SearchHit> search(const ConcatQuery& query, const DenseIndex& index,
                              const EncoderParams& params,
                              std::size_t top_k = 100);

// One ranked list per turn of every session, as run rows tagged `tag`.
RunFile batch_search(std::span<const Session> sessions, const DenseIndex& index,
                     const EncoderParams& params, std::size_t top_k,
                     const std::string& tag, int workers = 1);

void save_index(const DenseIndex& index, const std::filesystem::path& path);
DenseIndex load_index(const std::filesystem::path& path);

}  // namespace convmix

#endif  // CONVMIX_RETRIEVAL_H_
