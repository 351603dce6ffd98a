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

#include "convmix/retrieval.h"

#include <algorithm>
#include <numeric>

#include "convmix/binary_io.h"
#include "convmix/error.h"
#include "convmix/io.h"
#include "convmix/parallel.h"
#include "convmix/text.h"

namespace convmix {

namespace {

constexpr char kIndexMagic[8] = {'C', 'M', 'X', 'I', 'N', 'D', 'X', '\0'};
constexpr std::uint32_t kIndexVersion = 1;

}  // namespace

DenseIndex build_index(const Collection& collection, const EncoderParams& params,
                       int workers) {
  DenseIndex index;
  index.dim = params.embed_dim();
  index.fingerprint = params.doc_fingerprint();
  const auto& docs = collection.documents();
  index.doc_ids.reserve(docs.size());
  for (const auto& d : docs) index.doc_ids.push_back(d.doc_id);
  index.embeddings.resize(docs.size() * index.dim);
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    const Vector e = encode_document(docs[i].text, params);
    std::transform(e.begin(), e.end(), index.embeddings.begin() +
                                           static_cast<std::ptrdiff_t>(i * index.dim),
                   [](double v) { return static_cast<float>(v); });
  });
  return index;
}

std::vector<SearchHit> search_embedding(std::span<const double> query,
                                        const DenseIndex& index,
                                        std::size_t top_k) {
  if (query.size() != index.dim) {
    throw Error(ErrorKind::kShape, "query embedding of length " +
                                       std::to_string(query.size()) +
                                       " against index dim " +
                                       std::to_string(index.dim));
  }
  std::vector<double> scores(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto row = index.row(i);
    double sum = 0.0;
    for (std::size_t d = 0; d < index.dim; ++d) {
      sum += query[d] * static_cast<double>(row[d]);
    }
    scores[i] = sum;
  }
  std::vector<std::size_t> order(index.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return index.doc_ids[a] < index.doc_ids[b];
                    });
  std::vector<SearchHit> hits;
  hits.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    hits.push_back({index.doc_ids[order[i]], scores[order[i]]});
  }
  return hits;
}

std::vector<SearchHit> search(const ConcatQuery& query, const DenseIndex& index,
                              const EncoderParams& params, std::size_t top_k) {
  if (index.fingerprint != params.doc_fingerprint()) {
    throw Error(ErrorKind::kStaleIndex,
                "index fingerprint " + hex64(index.fingerprint) +
                    " does not match encoder " + hex64(params.doc_fingerprint()) +
                    "; rebuild it with `convmix index`");
  }
  return search_embedding(encode_query(query, params), index, top_k);
}

RunFile batch_search(std::span<const Session> sessions, const DenseIndex& index,
                     const EncoderParams& params, std::size_t top_k,
                     const std::string& tag, int workers) {
  std::vector<ConcatQuery> queries;
  for (const auto& s : sessions) {
    for (std::size_t n = 0; n < s.turns.size(); ++n) {
      queries.push_back(concat_session(s, static_cast<int>(n) + 1));
    }
  }
  std::vector<std::vector<SearchHit>> results(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    results[i] = search(queries[i], index, params, top_k);
  });
  RunFile run;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    int rank = 0;
    for (auto& hit : results[i]) {
      run.rows.push_back({queries[i].turn_id, std::move(hit.doc_id), ++rank,
                          hit.score, tag});
    }
  }
  return run;
}

void save_index(const DenseIndex& index, const std::filesystem::path& path) {
  BinaryWriter w;
  w.bytes(kIndexMagic, sizeof(kIndexMagic));
  w.u32(kIndexVersion);
  w.u64(index.dim);
  w.u64(index.size());
  w.u64(index.fingerprint);
  for (const auto& id : index.doc_ids) w.str(id);
  w.f32_array(index.embeddings);
  write_file(path, w.buffer());
}

DenseIndex load_index(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  BinaryReader r(bytes, path.string());
  char magic[sizeof(kIndexMagic)];
  r.bytes(magic, sizeof(magic));
  if (!std::equal(magic, magic + sizeof(magic), kIndexMagic)) {
    throw Error(ErrorKind::kParse, path.string() + ": not an index file");
  }
  if (const auto version = r.u32(); version != kIndexVersion) {
    throw Error(ErrorKind::kParse, path.string() + ": unsupported index version " +
                                       std::to_string(version));
  }
  DenseIndex index;
  index.dim = r.u64();
  const std::uint64_t count = r.u64();
  index.fingerprint = r.u64();
  if (index.dim == 0 || count > bytes.size() ||
      count * index.dim > bytes.size() / sizeof(float)) {
    throw Error(ErrorKind::kParse, path.string() + ": corrupt index header");
  }
  index.doc_ids.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) index.doc_ids.push_back(r.str());
  index.embeddings.resize(count * index.dim);
  r.f32_array(index.embeddings);
  r.expect_end();
  return index;
}

}  // namespace convmix
