#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvlens/scoring.hpp"

namespace mvlens {

/// chunk_id -> relevance grade for one query.
using GradeMap = std::map<std::string, int, std::less<>>;

/// Ground-truth judgments: query_id -> GradeMap.
class Qrels {
 public:
  /// Throws MalformedQrels for negative grades.
  void set(std::string query_id, std::string chunk_id, int grade);

  /// nullptr when the query has no judgments.
  const GradeMap* find(std::string_view query_id) const;

  /// True when the query has at least one grade > 0.
  bool has_positive(std::string_view query_id) const;

  const std::map<std::string, GradeMap, std::less<>>& queries() const {
    return grades_;
  }
  std::size_t size() const { return grades_.size(); }

 private:
  std::map<std::string, GradeMap, std::less<>> grades_;
};

inline int grade_of(const GradeMap& grades, std::string_view chunk_id) {
  auto it = grades.find(chunk_id);
  return it == grades.end() ? 0 : it->second;
}

/// Linear-gain DCG over the first k gains: sum of gain[i] / log2(i + 2).
double dcg(std::span<const double> gains, std::size_t k);

/// DCG@k of the ideal ordering of every graded item, including items that
/// never appear in a run.
double ideal_dcg(const GradeMap& grades, std::size_t k);

/// Gains of the first `limit` entries of a ranking (0 for unjudged chunks).
std::vector<double> ranked_gains(const RetrievalRun& run, const ScoredList& list,
                                 const GradeMap& grades, std::size_t limit);

/// nDCG@k of one ranking; 0 when the query has no positive grade.
/// Throws InvalidConfig when k == 0.
double ndcg_at_k(const RetrievalRun& run, const ScoredList& list,
                 const GradeMap& grades, std::size_t k);

/// Same, for a ranking given directly as chunk ids.
double ndcg_at_k(std::span<const std::string> ranked_ids, const GradeMap& grades,
                 std::size_t k);

struct MetricReport {
  std::size_t k = 10;
  std::vector<std::pair<std::string, double>> per_query;  // run order
  double mean = 0.0;
  std::size_t skipped_not_in_qrels = 0;    // run queries without judgments
  std::size_t skipped_no_positive = 0;     // judged, but no grade > 0
  std::size_t missing_from_run = 0;        // judged queries the run lacks
};

/// Per-query nDCG@k and their mean. Throws EmptyIntersection when no query
/// can be evaluated.
MetricReport evaluate_run(const RetrievalRun& run, const Qrels& qrels,
                          std::size_t k);

}  // namespace mvlens
