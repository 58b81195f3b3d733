#include "mvlens/simdist.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mvlens/error.hpp"
#include "mvlens/parallel.hpp"

namespace mvlens {

std::vector<double> fraction_grid(std::size_t grid_size) {
  std::vector<double> grid(grid_size);
  for (std::size_t g = 0; g < grid_size; ++g) {
    grid[g] = static_cast<double>(g) / static_cast<double>(grid_size - 1);
  }
  return grid;
}

SimCurve token_similarity_curve(const EmbeddingView& query,
                                const EmbeddingView& chunk,
                                std::size_t grid_size) {
  if (grid_size < 2) throw Error(ErrorCode::InvalidConfig, "grid_size must be >= 2");
  const ScoreMatrix sims = score_matrix(query, chunk);
  const std::size_t m = sims.cols;

  SimCurve curve;
  curve.grid = fraction_grid(grid_size);
  curve.values.assign(grid_size, 0.0);
  curve.n_queries = 1;
  curve.n_query_tokens = sims.rows;

  std::vector<double> sorted(m);
  for (std::size_t i = 0; i < sims.rows; ++i) {
    const auto row = sims.row(i);
    std::copy(row.begin(), row.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    for (std::size_t g = 0; g < grid_size; ++g) {
      double v;
      if (m == 1) {
        v = sorted[0];
      } else {
        const double x = curve.grid[g] * static_cast<double>(m - 1);
        const auto lo = std::min(static_cast<std::size_t>(x), m - 1);
        const std::size_t hi = std::min(lo + 1, m - 1);
        const double t = x - static_cast<double>(lo);
        v = sorted[lo] + t * (sorted[hi] - sorted[lo]);
        // Rounding may leave the segment; clamping keeps the curve monotone.
        v = std::clamp(v, sorted[hi], sorted[lo]);
      }
      curve.values[g] += v;
    }
  }
  for (auto& v : curve.values) v /= static_cast<double>(sims.rows);
  return curve;
}

CurveAccumulator::CurveAccumulator(std::size_t grid_size)
    : grid_size_(grid_size), sums_(grid_size, 0.0) {}

void CurveAccumulator::add(const SimCurve& curve) {
  if (curve.values.size() != grid_size_) {
    throw Error(ErrorCode::InvalidConfig, "curve grid sizes differ");
  }
  const double w = static_cast<double>(curve.n_queries);
  for (std::size_t g = 0; g < grid_size_; ++g) sums_[g] += w * curve.values[g];
  n_queries_ += curve.n_queries;
  n_query_tokens_ += curve.n_query_tokens;
}

void CurveAccumulator::merge(const CurveAccumulator& other) {
  if (other.grid_size_ != grid_size_) {
    throw Error(ErrorCode::InvalidConfig, "curve grid sizes differ");
  }
  for (std::size_t g = 0; g < grid_size_; ++g) sums_[g] += other.sums_[g];
  n_queries_ += other.n_queries_;
  n_query_tokens_ += other.n_query_tokens_;
}

SimCurve CurveAccumulator::mean() const {
  if (n_queries_ == 0) throw Error(ErrorCode::EmptyInput, "no curves to aggregate");
  SimCurve out;
  out.grid = fraction_grid(grid_size_);
  out.values.resize(grid_size_);
  for (std::size_t g = 0; g < grid_size_; ++g) {
    out.values[g] = sums_[g] / static_cast<double>(n_queries_);
  }
  out.n_queries = n_queries_;
  out.n_query_tokens = n_query_tokens_;
  return out;
}

SimCurve aggregate_curves(
    std::span<const std::pair<EmbeddingView, EmbeddingView>> entries,
    std::size_t grid_size) {
  if (entries.empty()) throw Error(ErrorCode::EmptyInput, "no (query, chunk) pairs");
  CurveAccumulator acc(grid_size);
  for (const auto& [q, c] : entries) acc.add(token_similarity_curve(q, c, grid_size));
  return acc.mean();
}

std::size_t best_positive_rank(const RetrievalRun& run, const ScoredList& list,
                               const GradeMap& grades) {
  for (std::size_t r = 0; r < list.entries.size(); ++r) {
    if (grade_of(grades, run.chunk_id(list.entries[r].chunk)) > 0) return r + 1;
  }
  return 0;
}

namespace {

template <typename Pred>
std::vector<std::string> select_queries(const RetrievalRun& run, const Qrels& qrels,
                                        Pred keep) {
  std::vector<std::string> out;
  for (const auto& list : run.lists()) {
    const GradeMap* grades = qrels.find(list.query_id);
    if (grades == nullptr) continue;
    const std::size_t rank = best_positive_rank(run, list, *grades);
    if (rank > 0 && keep(rank)) out.push_back(list.query_id);
  }
  return out;
}

}  // namespace

std::vector<std::string> select_failed_queries(const RetrievalRun& run,
                                               const Qrels& qrels,
                                               std::size_t cutoff) {
  return select_queries(run, qrels, [&](std::size_t r) { return r > cutoff; });
}

std::vector<std::string> select_successful_queries(const RetrievalRun& run,
                                                   const Qrels& qrels,
                                                   std::size_t cutoff) {
  return select_queries(run, qrels, [&](std::size_t r) { return r <= cutoff; });
}

ComparisonSet comparison_set(const RetrievalRun& run, const Qrels& qrels,
                             std::string_view query_id) {
  const auto& list = run.list(query_id);
  static const GradeMap kNoGrades;
  const GradeMap* found = qrels.find(query_id);
  const GradeMap& grades = found ? *found : kNoGrades;

  ComparisonSet set;
  set.query_id = std::string(query_id);
  set.positive_rank = best_positive_rank(run, list, grades);
  if (set.positive_rank == 0) {
    throw Error(ErrorCode::NoPositive,
                "query '" + set.query_id + "' has no positive in its ranking");
  }
  auto irrelevant = [&](std::size_t r) {
    return grade_of(grades, run.chunk_id(list.entries[r].chunk)) == 0;
  };
  auto id_at = [&](std::size_t r) {
    return std::string(run.chunk_id(list.entries[r].chunk));
  };
  const std::size_t pos = set.positive_rank - 1;
  set.positive = id_at(pos);

  std::size_t below = list.entries.size();
  for (std::size_t r = pos + 1; r < list.entries.size(); ++r) {
    if (irrelevant(r)) {
      below = r;
      break;
    }
  }
  if (below == list.entries.size()) {
    throw Error(ErrorCode::NoNegativeBelowPositive,
                "query '" + set.query_id + "' has no irrelevant chunk below its positive");
  }
  set.below_positive_negative = id_at(below);
  for (std::size_t r = 0; r < list.entries.size(); ++r) {
    if (irrelevant(r)) {
      set.top1_negative = id_at(r);
      break;
    }
  }
  for (std::size_t r = list.entries.size(); r-- > 0;) {
    if (irrelevant(r)) {
      set.worst_negative = id_at(r);
      break;
    }
  }
  return set;
}

std::string_view role_name(CurveRole role) {
  switch (role) {
    case CurveRole::Positive: return "positive";
    case CurveRole::Top1: return "top1";
    case CurveRole::BelowPositive: return "below_positive";
    case CurveRole::Worst: return "worst";
  }
  return "unknown";
}

std::string_view mode_name(SimMode mode) {
  return mode == SimMode::Failed ? "failed" : "success";
}

SimMode parse_sim_mode(std::string_view text) {
  if (text == "failed") return SimMode::Failed;
  if (text == "success") return SimMode::Success;
  throw Error(ErrorCode::InvalidConfig,
              "mode must be 'failed' or 'success', got '" + std::string(text) + "'");
}

SimDistReport simdist_report(const RetrievalRun& run, const Qrels& qrels,
                             const EmbeddingStore& queries,
                             const EmbeddingStore& corpus, SimMode mode,
                             std::size_t cutoff, std::size_t grid_size,
                             std::size_t threads) {
  if (grid_size < 2) throw Error(ErrorCode::InvalidConfig, "grid_size must be >= 2");
  if (!run.is_full()) {
    throw Error(ErrorCode::TruncatedRun,
                "similarity analysis needs a full ranking for every query");
  }
  const auto selected = mode == SimMode::Failed
                            ? select_failed_queries(run, qrels, cutoff)
                            : select_successful_queries(run, qrels, cutoff);

  SimDistReport report;
  report.mode = mode;
  report.cutoff = cutoff;
  report.grid_size = grid_size;

  struct Item {
    std::string dataset;
    std::array<SimCurve, 4> curves;
    bool used = false;
  };
  std::vector<Item> items(selected.size());

  auto chunk_view = [&](const std::string& id) {
    auto idx = corpus.find(id);
    if (!idx) throw Error(ErrorCode::UnknownChunk, "chunk '" + id + "' is not in the corpus");
    return corpus.at(*idx);
  };

  parallel_for(selected.size(), threads, [&](std::size_t i) {
    ComparisonSet set;
    try {
      set = comparison_set(run, qrels, selected[i]);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoNegativeBelowPositive) return;
      throw;
    }
    auto qidx = queries.find(selected[i]);
    if (!qidx) {
      throw Error(ErrorCode::UnknownQuery,
                  "query '" + selected[i] + "' is not in the query store");
    }
    const auto q = queries.at(*qidx);
    items[i].dataset = std::string(q.dataset);
    const std::array<const std::string*, 4> ids = {
        &set.positive, &set.top1_negative, &set.below_positive_negative,
        &set.worst_negative};
    for (std::size_t r = 0; r < 4; ++r) {
      items[i].curves[r] = token_similarity_curve(q, chunk_view(*ids[r]), grid_size);
    }
    items[i].used = true;
  });

  std::map<std::string, std::array<CurveAccumulator, 4>> per_dataset;
  auto fresh = [&] {
    return std::array<CurveAccumulator, 4>{
        CurveAccumulator(grid_size), CurveAccumulator(grid_size),
        CurveAccumulator(grid_size), CurveAccumulator(grid_size)};
  };
  auto pooled = fresh();
  for (const auto& item : items) {
    if (!item.used) {
      ++report.skipped_no_negative_below;
      continue;
    }
    auto it = per_dataset.find(item.dataset);
    if (it == per_dataset.end()) it = per_dataset.emplace(item.dataset, fresh()).first;
    for (std::size_t r = 0; r < 4; ++r) {
      it->second[r].add(item.curves[r]);
      pooled[r].add(item.curves[r]);
    }
    ++report.n_queries;
  }
  if (report.n_queries == 0) {
    throw Error(ErrorCode::NoQualifyingQueries,
                std::string("no ") + std::string(mode_name(mode)) +
                    " queries at cutoff " + std::to_string(cutoff));
  }
  for (const auto& [dataset, accs] : per_dataset) {
    auto& curves = report.per_dataset[dataset];
    for (std::size_t r = 0; r < 4; ++r) curves[r] = accs[r].mean();
  }
  for (std::size_t r = 0; r < 4; ++r) report.pooled[r] = pooled[r].mean();
  return report;
}

}  // namespace mvlens
