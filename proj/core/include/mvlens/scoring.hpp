#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mvlens/embedstore.hpp"

namespace mvlens {

/// Inner product of two equal-length rows, accumulated in double.
double dot(std::span<const float> a, std::span<const float> b);

/// Late-interaction score: the sum over query rows of the best inner product
/// against any chunk row. Reduces to a plain inner product when both sides
/// hold a single vector. Throws DimMismatch.
double maxsim(const EmbeddingView& query, const EmbeddingView& chunk);

/// Dense [n_query_rows x n_chunk_rows] matrix of row inner products.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double operator()(std::size_t i, std::size_t j) const {
    return values[i * cols + j];
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * cols, cols);
  }
};

/// All pre-max similarities. Summing the row maxima reproduces maxsim()
/// exactly. Throws DimMismatch.
ScoreMatrix score_matrix(const EmbeddingView& query, const EmbeddingView& chunk);

/// Index into RetrievalRun::chunk_ids().
using ChunkIndex = std::uint32_t;

struct ScoredEntry {
  ChunkIndex chunk = 0;
  double score = 0.0;
};

/// One query's ranking, best first. Retrieval orders entries by
/// (score desc, chunk_id asc); lists read from run files keep file order.
struct ScoredList {
  std::string query_id;
  std::vector<ScoredEntry> entries;
};

/// Rankings for a set of queries over a shared chunk-id table.
class RetrievalRun {
 public:
  RetrievalRun() = default;

  /// Throws DuplicateId for repeated query ids or chunk ids, and
  /// UnknownChunk for entries outside the table.
  RetrievalRun(std::vector<std::string> chunk_ids,
               std::vector<ScoredList> lists, std::size_t k);

  const std::vector<std::string>& chunk_ids() const { return *chunk_ids_; }
  std::string_view chunk_id(ChunkIndex c) const { return (*chunk_ids_)[c]; }
  std::optional<ChunkIndex> find_chunk(std::string_view id) const;

  const std::vector<ScoredList>& lists() const { return lists_; }
  std::optional<std::size_t> find_query(std::string_view query_id) const;

  /// Throws UnknownQuery.
  const ScoredList& list(std::string_view query_id) const;

  /// Cutoff used when the run was produced; 0 means full rankings.
  std::size_t k() const { return k_; }

  /// True when every list ranks every chunk in the table exactly once.
  bool is_full() const;

 private:
  std::shared_ptr<const std::vector<std::string>> chunk_ids_ =
      std::make_shared<const std::vector<std::string>>();
  std::shared_ptr<const std::unordered_map<std::string_view, ChunkIndex>>
      chunk_index_ = std::make_shared<
          const std::unordered_map<std::string_view, ChunkIndex>>();
  std::vector<ScoredList> lists_;
  std::unordered_map<std::string, std::size_t> query_index_;
  std::size_t k_ = 0;
};

struct RetrieveOptions {
  std::size_t threads = 1;  // 0 = hardware concurrency
};

/// Exhaustively scores every corpus item for every query and keeps the top
/// k (all of them when k == 0). Output is independent of the thread count.
/// Throws EmptyCorpus or DimMismatch.
RetrievalRun retrieve(const EmbeddingStore& queries,
                      const EmbeddingStore& corpus, std::size_t k,
                      const RetrieveOptions& options = {});

/// Same, with queries given as views (used by synthetic experiments).
RetrievalRun retrieve(std::span<const EmbeddingView> queries,
                      std::span<const EmbeddingView> corpus, std::size_t k,
                      const RetrieveOptions& options = {});

/// 1-based rank of chunk_id in the query's list; nullopt when absent.
/// Throws UnknownQuery.
std::optional<std::size_t> rank_of(const RetrievalRun& run,
                                   std::string_view query_id,
                                   std::string_view chunk_id);

}  // namespace mvlens
