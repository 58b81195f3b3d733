#include "mvlens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mvlens/error.hpp"

namespace mvlens {

void Qrels::set(std::string query_id, std::string chunk_id, int grade) {
  if (grade < 0) {
    throw Error(ErrorCode::MalformedQrels,
                "negative grade for (" + query_id + ", " + chunk_id + ")");
  }
  grades_[std::move(query_id)][std::move(chunk_id)] = grade;
}

const GradeMap* Qrels::find(std::string_view query_id) const {
  auto it = grades_.find(query_id);
  return it == grades_.end() ? nullptr : &it->second;
}

bool Qrels::has_positive(std::string_view query_id) const {
  const GradeMap* g = find(query_id);
  if (g == nullptr) return false;
  return std::any_of(g->begin(), g->end(),
                     [](const auto& kv) { return kv.second > 0; });
}

double dcg(std::span<const double> gains, std::size_t k) {
  const std::size_t n = std::min(k, gains.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gains[i] != 0.0) sum += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return sum;
}

double ideal_dcg(const GradeMap& grades, std::size_t k) {
  std::vector<double> ideal;
  ideal.reserve(grades.size());
  for (const auto& [id, g] : grades) {
    if (g > 0) ideal.push_back(static_cast<double>(g));
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  return dcg(ideal, k);
}

std::vector<double> ranked_gains(const RetrievalRun& run, const ScoredList& list,
                                 const GradeMap& grades, std::size_t limit) {
  const std::size_t n = std::min(limit, list.entries.size());
  std::vector<double> gains(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    gains[i] = grade_of(grades, run.chunk_id(list.entries[i].chunk));
  }
  return gains;
}

namespace {

void require_cutoff(std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "nDCG cutoff k must be >= 1");
}

}  // namespace

double ndcg_at_k(const RetrievalRun& run, const ScoredList& list,
                 const GradeMap& grades, std::size_t k) {
  require_cutoff(k);
  const double ideal = ideal_dcg(grades, k);
  if (ideal == 0.0) return 0.0;
  return dcg(ranked_gains(run, list, grades, k), k) / ideal;
}

double ndcg_at_k(std::span<const std::string> ranked_ids, const GradeMap& grades,
                 std::size_t k) {
  require_cutoff(k);
  const double ideal = ideal_dcg(grades, k);
  if (ideal == 0.0) return 0.0;
  const std::size_t n = std::min(k, ranked_ids.size());
  std::vector<double> gains(n);
  for (std::size_t i = 0; i < n; ++i) gains[i] = grade_of(grades, ranked_ids[i]);
  return dcg(gains, k) / ideal;
}

MetricReport evaluate_run(const RetrievalRun& run, const Qrels& qrels,
                          std::size_t k) {
  require_cutoff(k);
  MetricReport report;
  report.k = k;
  double sum = 0.0;
  for (const auto& list : run.lists()) {
    const GradeMap* grades = qrels.find(list.query_id);
    if (grades == nullptr) {
      ++report.skipped_not_in_qrels;
      continue;
    }
    if (!qrels.has_positive(list.query_id)) {
      ++report.skipped_no_positive;
      continue;
    }
    const double v = ndcg_at_k(run, list, *grades, k);
    report.per_query.emplace_back(list.query_id, v);
    sum += v;
  }
  for (const auto& [qid, grades] : qrels.queries()) {
    if (!run.find_query(qid) && qrels.has_positive(qid)) ++report.missing_from_run;
  }
  if (report.per_query.empty()) {
    throw Error(ErrorCode::EmptyIntersection,
                "no run query has judgments with a positive grade");
  }
  report.mean = sum / static_cast<double>(report.per_query.size());
  return report;
}

}  // namespace mvlens
