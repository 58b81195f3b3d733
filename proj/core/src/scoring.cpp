#include "mvlens/scoring.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "mvlens/error.hpp"
#include "mvlens/parallel.hpp"

namespace mvlens {
namespace {

void require_same_dim(const EmbeddingView& q, const EmbeddingView& c) {
  if (q.dim != c.dim) {
    throw Error(ErrorCode::DimMismatch,
                "query '" + std::string(q.id) + "' has dim " +
                    std::to_string(q.dim) + " but chunk '" +
                    std::string(c.id) + "' has dim " + std::to_string(c.dim));
  }
}

}  // namespace

double dot(std::span<const float> a, std::span<const float> b) {
  // Four fixed lanes: vectorizes without reassociation, so results do not
  // depend on optimization flags.
  const std::size_t n = a.size();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t d = 0;
  for (; d + 4 <= n; d += 4) {
    s0 += static_cast<double>(a[d]) * b[d];
    s1 += static_cast<double>(a[d + 1]) * b[d + 1];
    s2 += static_cast<double>(a[d + 2]) * b[d + 2];
    s3 += static_cast<double>(a[d + 3]) * b[d + 3];
  }
  for (; d < n; ++d) s0 += static_cast<double>(a[d]) * b[d];
  return (s0 + s1) + (s2 + s3);
}

double maxsim(const EmbeddingView& query, const EmbeddingView& chunk) {
  require_same_dim(query, chunk);
  double total = 0.0;
  for (std::size_t i = 0; i < query.n_vectors; ++i) {
    const auto q = query.row(i);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < chunk.n_vectors; ++j) {
      best = std::max(best, dot(q, chunk.row(j)));
    }
    total += best;
  }
  return total;
}

ScoreMatrix score_matrix(const EmbeddingView& query, const EmbeddingView& chunk) {
  require_same_dim(query, chunk);
  ScoreMatrix m;
  m.rows = query.n_vectors;
  m.cols = chunk.n_vectors;
  m.values.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      m.values[i * m.cols + j] = dot(query.row(i), chunk.row(j));
    }
  }
  return m;
}

RetrievalRun::RetrievalRun(std::vector<std::string> chunk_ids,
                           std::vector<ScoredList> lists, std::size_t k)
    : lists_(std::move(lists)), k_(k) {
  auto ids = std::make_shared<const std::vector<std::string>>(std::move(chunk_ids));
  auto index = std::make_shared<std::unordered_map<std::string_view, ChunkIndex>>();
  index->reserve(ids->size());
  for (std::size_t c = 0; c < ids->size(); ++c) {
    if (!index->emplace((*ids)[c], static_cast<ChunkIndex>(c)).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate chunk id '" + (*ids)[c] + "'");
    }
  }
  query_index_.reserve(lists_.size());
  for (std::size_t q = 0; q < lists_.size(); ++q) {
    if (!query_index_.emplace(lists_[q].query_id, q).second) {
      throw Error(ErrorCode::DuplicateId,
                  "duplicate query id '" + lists_[q].query_id + "'");
    }
    for (const auto& e : lists_[q].entries) {
      if (e.chunk >= ids->size()) {
        throw Error(ErrorCode::UnknownChunk, "chunk index out of range in run");
      }
    }
  }
  chunk_ids_ = std::move(ids);
  chunk_index_ = std::move(index);
}

std::optional<ChunkIndex> RetrievalRun::find_chunk(std::string_view id) const {
  auto it = chunk_index_->find(id);
  if (it == chunk_index_->end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> RetrievalRun::find_query(std::string_view query_id) const {
  auto it = query_index_.find(std::string(query_id));
  if (it == query_index_.end()) return std::nullopt;
  return it->second;
}

const ScoredList& RetrievalRun::list(std::string_view query_id) const {
  auto q = find_query(query_id);
  if (!q) {
    throw Error(ErrorCode::UnknownQuery,
                "query '" + std::string(query_id) + "' is not in the run");
  }
  return lists_[*q];
}

bool RetrievalRun::is_full() const {
  const std::size_t n = chunk_ids_->size();
  std::vector<std::uint32_t> seen(n, 0);
  std::uint32_t stamp = 0;
  for (const auto& l : lists_) {
    if (l.entries.size() != n) return false;
    ++stamp;
    for (const auto& e : l.entries) {
      if (seen[e.chunk] == stamp) return false;
      seen[e.chunk] = stamp;
    }
  }
  return true;
}

RetrievalRun retrieve(std::span<const EmbeddingView> queries,
                      std::span<const EmbeddingView> corpus, std::size_t k,
                      const RetrieveOptions& options) {
  if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus is empty");
  for (const auto& q : queries) require_same_dim(q, corpus.front());
  for (const auto& c : corpus) require_same_dim(corpus.front(), c);

  const std::size_t n = corpus.size();
  std::vector<std::string> chunk_ids;
  chunk_ids.reserve(n);
  for (const auto& c : corpus) chunk_ids.emplace_back(c.id);

  // Position of each chunk in ascending id order, the tie-break key.
  std::vector<ChunkIndex> by_id(n);
  std::iota(by_id.begin(), by_id.end(), ChunkIndex{0});
  std::sort(by_id.begin(), by_id.end(), [&](ChunkIndex a, ChunkIndex b) {
    return chunk_ids[a] < chunk_ids[b];
  });
  std::vector<ChunkIndex> id_rank(n);
  for (std::size_t r = 0; r < n; ++r) id_rank[by_id[r]] = static_cast<ChunkIndex>(r);

  const std::size_t keep = (k == 0 || k > n) ? n : k;
  std::vector<ScoredList> lists(queries.size());
  parallel_for(queries.size(), options.threads, [&](std::size_t qi) {
    std::vector<ScoredEntry> all(n);
    for (std::size_t c = 0; c < n; ++c) {
      all[c] = {static_cast<ChunkIndex>(c), maxsim(queries[qi], corpus[c])};
    }
    auto better = [&](const ScoredEntry& a, const ScoredEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return id_rank[a.chunk] < id_rank[b.chunk];
    };
    if (keep < n) {
      std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep),
                        all.end(), better);
      all.resize(keep);
    } else {
      std::sort(all.begin(), all.end(), better);
    }
    lists[qi].query_id = std::string(queries[qi].id);
    lists[qi].entries = std::move(all);
  });
  return RetrievalRun(std::move(chunk_ids), std::move(lists), k);
}

RetrievalRun retrieve(const EmbeddingStore& queries,
                      const EmbeddingStore& corpus, std::size_t k,
                      const RetrieveOptions& options) {
  if (corpus.size() == 0) throw Error(ErrorCode::EmptyCorpus, "corpus is empty");
  if (queries.dim() != corpus.dim()) {
    throw Error(ErrorCode::DimMismatch,
                "query store dim " + std::to_string(queries.dim()) +
                    " != corpus dim " + std::to_string(corpus.dim()));
  }
  std::vector<EmbeddingView> q, c;
  q.reserve(queries.size());
  c.reserve(corpus.size());
  for (std::size_t i = 0; i < queries.size(); ++i) q.push_back(queries.at(i));
  for (std::size_t i = 0; i < corpus.size(); ++i) c.push_back(corpus.at(i));
  return retrieve(q, c, k, options);
}

std::optional<std::size_t> rank_of(const RetrievalRun& run,
                                   std::string_view query_id,
                                   std::string_view chunk_id) {
  const auto& list = run.list(query_id);
  const auto c = run.find_chunk(chunk_id);
  if (!c) return std::nullopt;
  for (std::size_t r = 0; r < list.entries.size(); ++r) {
    if (list.entries[r].chunk == *c) return r + 1;
  }
  return std::nullopt;
}

}  // namespace mvlens
