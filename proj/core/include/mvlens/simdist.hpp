#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvlens/embedstore.hpp"
#include "mvlens/metrics.hpp"
#include "mvlens/scoring.hpp"

namespace mvlens {

/// Mean sorted document-token similarity against fraction of document tokens.
/// values[g] is the curve at grid[g] = g / (P - 1); values never increase.
struct SimCurve {
  std::vector<double> grid;
  std::vector<double> values;
  std::size_t n_queries = 0;
  std::size_t n_query_tokens = 0;
};

/// Fixed fractional grid of `grid_size` points spanning [0, 1].
std::vector<double> fraction_grid(std::size_t grid_size);

/// For every query row, sorts its similarities to the chunk rows in
/// descending order, resamples them onto the fractional grid (token j of m
/// sits at (j - 1) / (m - 1), linear in between, constant when m == 1) and
/// averages the rows. n_queries of the result is 1. Throws DimMismatch or
/// InvalidConfig (grid_size < 2).
SimCurve token_similarity_curve(const EmbeddingView& query,
                                const EmbeddingView& chunk,
                                std::size_t grid_size);

/// Count-carrying pointwise sum of curves. Adding curves in a fixed order
/// gives a deterministic mean; merge() of partial accumulators is linear.
class CurveAccumulator {
 public:
  explicit CurveAccumulator(std::size_t grid_size);

  /// Adds a curve weighted by its n_queries.
  void add(const SimCurve& curve);
  void merge(const CurveAccumulator& other);

  std::size_t n_queries() const { return n_queries_; }

  /// Pointwise mean. Throws EmptyInput when nothing was added.
  SimCurve mean() const;

 private:
  std::size_t grid_size_;
  std::vector<double> sums_;
  std::size_t n_queries_ = 0;
  std::size_t n_query_tokens_ = 0;
};

/// Pointwise mean of the per-pair curves. Throws EmptyInput.
SimCurve aggregate_curves(
    std::span<const std::pair<EmbeddingView, EmbeddingView>> entries,
    std::size_t grid_size);

/// Best rank (1-based) of a positive in the query's list, or 0 when none.
std::size_t best_positive_rank(const RetrievalRun& run, const ScoredList& list,
                               const GradeMap& grades);

/// Queries whose best-ranked positive sits below `cutoff`. Queries without a
/// judged positive in their ranking are left out.
std::vector<std::string> select_failed_queries(const RetrievalRun& run,
                                               const Qrels& qrels,
                                               std::size_t cutoff);

/// Queries whose best-ranked positive is within the top `cutoff`.
std::vector<std::string> select_successful_queries(const RetrievalRun& run,
                                                   const Qrels& qrels,
                                                   std::size_t cutoff);

struct ComparisonSet {
  std::string query_id;
  std::size_t positive_rank = 0;
  std::string positive;
  std::string top1_negative;            // best-ranked irrelevant chunk
  std::string below_positive_negative;  // first irrelevant chunk after the positive
  std::string worst_negative;           // last-ranked irrelevant chunk
};

/// Picks the positive and the three reference negatives of one query.
/// Throws UnknownQuery, NoPositive, or NoNegativeBelowPositive.
ComparisonSet comparison_set(const RetrievalRun& run, const Qrels& qrels,
                             std::string_view query_id);

enum class CurveRole { Positive = 0, Top1 = 1, BelowPositive = 2, Worst = 3 };
inline constexpr std::array<CurveRole, 4> kCurveRoles = {
    CurveRole::Positive, CurveRole::Top1, CurveRole::BelowPositive,
    CurveRole::Worst};
std::string_view role_name(CurveRole role);

enum class SimMode { Failed, Success };
std::string_view mode_name(SimMode mode);
SimMode parse_sim_mode(std::string_view text);

using RoleCurves = std::array<SimCurve, 4>;  // indexed by CurveRole

struct SimDistReport {
  SimMode mode = SimMode::Failed;
  std::size_t cutoff = 10;
  std::size_t grid_size = 100;
  std::map<std::string, RoleCurves> per_dataset;
  RoleCurves pooled;
  std::size_t n_queries = 0;
  std::size_t skipped_no_negative_below = 0;
};

/// Curves for the positive and the three negatives over every qualifying
/// query, per query dataset tag and pooled. Throws TruncatedRun,
/// NoQualifyingQueries, UnknownQuery, or UnknownChunk.
SimDistReport simdist_report(const RetrievalRun& run, const Qrels& qrels,
                             const EmbeddingStore& queries,
                             const EmbeddingStore& corpus, SimMode mode,
                             std::size_t cutoff, std::size_t grid_size,
                             std::size_t threads = 1);

}  // namespace mvlens
