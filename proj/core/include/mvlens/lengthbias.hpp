#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mvlens/embedstore.hpp"
#include "mvlens/metrics.hpp"
#include "mvlens/scoring.hpp"

namespace mvlens {

struct QuantileBin {
  double low = 0.0;   // smallest value in the bin
  double high = 0.0;  // largest value in the bin
  std::size_t count = 0;
};

/// Equal-count partition of items by a scalar (token length).
struct QuantileBinning {
  std::vector<QuantileBin> bins;
  std::vector<std::string> order;        // items sorted by (value, id)
  std::vector<std::size_t> starts;       // first position of each bin in `order`
  std::unordered_map<std::string, std::size_t> assignment;

  std::size_t n_bins() const { return bins.size(); }
  std::optional<std::size_t> bin_of(std::string_view id) const;

  /// n_bins + 1 boundaries: each bin's low, then the last bin's high.
  std::vector<double> edges() const;

  /// Bin holding the item at `position` of `order`.
  std::size_t bin_at(std::size_t position) const;
};

/// Sorts items by (value asc, id asc) and cuts them into n_bins contiguous
/// groups whose sizes differ by at most one. Throws InvalidConfig when
/// n_bins < 2, TooFewItems when there are fewer items than bins, and
/// DuplicateId for repeated ids.
QuantileBinning quantile_bins(
    std::span<const std::pair<std::string, std::int64_t>> lengths,
    std::size_t n_bins);
QuantileBinning quantile_bins(
    std::span<const std::pair<std::string, double>> values, std::size_t n_bins);

/// Which irrelevant chunks count as retrieval errors for a query.
struct FpMode {
  enum class Kind { AbovePositive, TopK };
  Kind kind = Kind::AbovePositive;
  std::size_t k = 10;

  /// "above-positive" or "topk:<k>". Throws InvalidConfig.
  static FpMode parse(std::string_view text);
  std::string to_string() const;
};

/// Irrelevant chunks ranked strictly above the best-ranked positive, in rank
/// order. Throws NoPositiveInRanking.
std::vector<ChunkIndex> false_positive_indices(const RetrievalRun& run,
                                               const ScoredList& list,
                                               const GradeMap& grades);
std::vector<std::string> false_positives(const RetrievalRun& run,
                                         const ScoredList& list,
                                         const GradeMap& grades);

/// False positives under `mode`; TopK returns irrelevant chunks in the top k.
std::vector<ChunkIndex> false_positive_indices(const RetrievalRun& run,
                                               const ScoredList& list,
                                               const GradeMap& grades,
                                               const FpMode& mode);

struct QuantileFpStats {
  double edge_low = 0.0;   // mean relevant length of the first query
  double edge_high = 0.0;  // ... and of the last query in this quantile
  std::size_t n_queries = 0;
  std::size_t n_fps = 0;
  std::optional<double> mean_fp_length;  // empty when the quantile has no FPs
  std::size_t n_relevant = 0;
  double mean_relevant_length = 0.0;
};

struct FPLengthReport {
  FpMode mode;
  std::vector<QuantileFpStats> quantiles;
  double corpus_mean_length = 0.0;
  std::size_t n_queries = 0;
  std::size_t skipped_no_positive = 0;             // no judged positive in corpus
  std::size_t skipped_no_positive_in_ranking = 0;
};

/// Groups queries into quantiles by the mean token length of their relevant
/// chunks and compares false-positive length with relevant length per
/// quantile. Requires a full run over `corpus` (TruncatedRun otherwise).
FPLengthReport fp_length_report(const RetrievalRun& run, const Qrels& qrels,
                                const EmbeddingStore& corpus,
                                std::size_t n_query_quantiles,
                                const FpMode& mode = {});

/// chunk_id -> summed nDCG@k gain from deleting the chunk, over all queries.
using HarmMap = std::map<std::string, double, std::less<>>;

/// Presence penalty of every chunk in a full run: for each query, the nDCG@k
/// after deleting the chunk (lower ranks shift up) minus the nDCG@k with it,
/// summed over queries in run order. Only deletions within the top k change
/// anything, so the rest are never evaluated. Throws TruncatedRun.
HarmMap chunk_harm(const RetrievalRun& run_full, const Qrels& qrels,
                   std::size_t k, std::size_t threads = 1);

struct BinStat {
  double edge_low = 0.0;
  double edge_high = 0.0;
  double observed = 0.0;
  double baseline_mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n_items = 0;
};

struct BinReport {
  std::string statistic;  // "mean_harm" or "fp_count"
  std::vector<BinStat> bins;
  std::size_t n_permutations = 0;
  double ci_level = 0.9;
  std::uint64_t seed = 0;
  std::size_t total = 0;  // items (harm) or FP occurrences (counts)
  std::size_t skipped_queries = 0;
};

/// Per-trial per-bin statistics of a permutation null: [trial][bin].
using NullSamples = std::vector<std::vector<double>>;

/// Shuffles `values` across the fixed bin labels n_permutations times and
/// records each bin's mean. Trial t draws from derive_seed(seed, t), so the
/// result is independent of `threads`.
NullSamples permuted_bin_means(std::span<const double> values,
                               std::span<const std::size_t> bin_of,
                               std::size_t n_bins, std::size_t n_permutations,
                               std::uint64_t seed, std::size_t threads = 1);

/// Observed mean harm per length bin against a shuffled-harm baseline.
/// ci_low/ci_high are the (1-ci_level)/2 and 1-(1-ci_level)/2 empirical
/// quantiles of the null, widened if needed to contain baseline_mean.
/// Throws UnbinnedChunk or InvalidConfig (n_permutations < 100, ci_level
/// outside (0, 1)).
BinReport harm_report(const HarmMap& harm, const QuantileBinning& binning,
                      std::size_t n_permutations, double ci_level,
                      std::uint64_t seed, std::size_t threads = 1);

/// False-positive occurrences per chunk-length bin against a baseline that
/// assigns every occurrence to the bin of a uniformly drawn binned chunk.
BinReport error_count_report(const RetrievalRun& run, const Qrels& qrels,
                             const QuantileBinning& binning,
                             std::size_t n_permutations, double ci_level,
                             std::uint64_t seed, const FpMode& mode = {},
                             std::size_t threads = 1);

/// Equal-count binning of every corpus chunk by token length.
QuantileBinning corpus_length_bins(const EmbeddingStore& corpus,
                                   std::size_t n_bins);

}  // namespace mvlens
