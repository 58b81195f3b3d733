#include "mvlens/lengthbias.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "mvlens/error.hpp"
#include "mvlens/parallel.hpp"
#include "mvlens/random.hpp"
#include "mvlens/stats.hpp"

namespace mvlens {

// ---- binning ---------------------------------------------------------------

std::optional<std::size_t> QuantileBinning::bin_of(std::string_view id) const {
  auto it = assignment.find(std::string(id));
  if (it == assignment.end()) return std::nullopt;
  return it->second;
}

std::vector<double> QuantileBinning::edges() const {
  std::vector<double> e;
  e.reserve(bins.size() + 1);
  for (const auto& b : bins) e.push_back(b.low);
  if (!bins.empty()) e.push_back(bins.back().high);
  return e;
}

std::size_t QuantileBinning::bin_at(std::size_t position) const {
  auto it = std::upper_bound(starts.begin(), starts.end(), position);
  return static_cast<std::size_t>(it - starts.begin()) - 1;
}

QuantileBinning quantile_bins(
    std::span<const std::pair<std::string, double>> values, std::size_t n_bins) {
  if (n_bins < 2) throw Error(ErrorCode::InvalidConfig, "n_bins must be >= 2");
  if (values.size() < n_bins) {
    throw Error(ErrorCode::TooFewItems,
                std::to_string(values.size()) + " items cannot fill " +
                    std::to_string(n_bins) + " bins");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (values[a].second != values[b].second) return values[a].second < values[b].second;
    return values[a].first < values[b].first;
  });

  QuantileBinning out;
  const std::size_t n = values.size();
  out.order.reserve(n);
  out.assignment.reserve(n);
  out.bins.resize(n_bins);
  out.starts.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t begin = b * n / n_bins;
    const std::size_t end = (b + 1) * n / n_bins;
    out.starts[b] = begin;
    out.bins[b] = {values[idx[begin]].second, values[idx[end - 1]].second,
                   end - begin};
    for (std::size_t p = begin; p < end; ++p) {
      const auto& id = values[idx[p]].first;
      if (!out.assignment.emplace(id, b).second) {
        throw Error(ErrorCode::DuplicateId, "duplicate item '" + id + "' in binning");
      }
      out.order.push_back(id);
    }
  }
  return out;
}

QuantileBinning quantile_bins(
    std::span<const std::pair<std::string, std::int64_t>> lengths,
    std::size_t n_bins) {
  std::vector<std::pair<std::string, double>> values;
  values.reserve(lengths.size());
  for (const auto& [id, len] : lengths) values.emplace_back(id, static_cast<double>(len));
  return quantile_bins(std::span<const std::pair<std::string, double>>(values), n_bins);
}

QuantileBinning corpus_length_bins(const EmbeddingStore& corpus, std::size_t n_bins) {
  std::vector<std::pair<std::string, std::int64_t>> lengths;
  lengths.reserve(corpus.size());
  for (const auto& item : corpus.manifest().items) {
    lengths.emplace_back(item.id, item.token_length);
  }
  return quantile_bins(std::span<const std::pair<std::string, std::int64_t>>(lengths),
                       n_bins);
}

// ---- false positives -------------------------------------------------------

FpMode FpMode::parse(std::string_view text) {
  if (text == "above-positive") return {};
  constexpr std::string_view prefix = "topk:";
  if (text.substr(0, prefix.size()) == prefix) {
    const auto digits = text.substr(prefix.size());
    std::size_t k = 0;
    auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && p == digits.data() + digits.size() && k > 0) {
      return {Kind::TopK, k};
    }
  }
  throw Error(ErrorCode::InvalidConfig,
              "fp mode must be 'above-positive' or 'topk:<k>', got '" +
                  std::string(text) + "'");
}

std::string FpMode::to_string() const {
  return kind == Kind::AbovePositive ? "above-positive" : "topk:" + std::to_string(k);
}

std::vector<ChunkIndex> false_positive_indices(const RetrievalRun& run,
                                               const ScoredList& list,
                                               const GradeMap& grades) {
  std::vector<ChunkIndex> fps;
  for (const auto& e : list.entries) {
    if (grade_of(grades, run.chunk_id(e.chunk)) > 0) return fps;
    fps.push_back(e.chunk);
  }
  throw Error(ErrorCode::NoPositiveInRanking,
              "query '" + list.query_id + "' has no positive in its ranking");
}

std::vector<ChunkIndex> false_positive_indices(const RetrievalRun& run,
                                               const ScoredList& list,
                                               const GradeMap& grades,
                                               const FpMode& mode) {
  if (mode.kind == FpMode::Kind::AbovePositive) {
    return false_positive_indices(run, list, grades);
  }
  std::vector<ChunkIndex> fps;
  const std::size_t n = std::min(mode.k, list.entries.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto c = list.entries[r].chunk;
    if (grade_of(grades, run.chunk_id(c)) == 0) fps.push_back(c);
  }
  return fps;
}

std::vector<std::string> false_positives(const RetrievalRun& run,
                                         const ScoredList& list,
                                         const GradeMap& grades) {
  std::vector<std::string> out;
  for (auto c : false_positive_indices(run, list, grades)) {
    out.emplace_back(run.chunk_id(c));
  }
  return out;
}

namespace {

void require_full(const RetrievalRun& run) {
  if (!run.is_full()) {
    throw Error(ErrorCode::TruncatedRun,
                "analysis needs a full ranking of every chunk for every query");
  }
}

// Run chunk index -> token length, checking the run ranks exactly the corpus.
std::vector<std::int64_t> run_chunk_lengths(const RetrievalRun& run,
                                            const EmbeddingStore& corpus) {
  require_full(run);
  if (!run.lists().empty() && run.chunk_ids().size() != corpus.size()) {
    throw Error(ErrorCode::TruncatedRun,
                "run ranks " + std::to_string(run.chunk_ids().size()) +
                    " chunks but the corpus holds " + std::to_string(corpus.size()));
  }
  std::vector<std::int64_t> lengths(run.chunk_ids().size());
  for (std::size_t c = 0; c < lengths.size(); ++c) {
    auto idx = corpus.find(run.chunk_ids()[c]);
    if (!idx) {
      throw Error(ErrorCode::UnknownChunk,
                  "run chunk '" + run.chunk_ids()[c] + "' is not in the corpus");
    }
    lengths[c] = corpus.manifest().items[*idx].token_length;
  }
  return lengths;
}

void check_permutation_args(std::size_t n_permutations, double ci_level) {
  if (n_permutations < 100) {
    throw Error(ErrorCode::InvalidConfig, "n_permutations must be >= 100");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "ci_level must lie in (0, 1)");
  }
}

// Fills baseline_mean / ci_low / ci_high of every bin from null samples.
void summarize_null(const NullSamples& samples, double ci_level,
                    std::vector<BinStat>& bins) {
  const double tail = (1.0 - ci_level) / 2.0;
  std::vector<double> column(samples.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    RunningMean m;
    for (std::size_t t = 0; t < samples.size(); ++t) {
      column[t] = samples[t][b];
      m.add(column[t]);
    }
    if (std::isnan(m.value())) {
      // empty bin
      bins[b].baseline_mean = bins[b].ci_low = bins[b].ci_high = m.value();
      continue;
    }
    std::sort(column.begin(), column.end());
    bins[b].baseline_mean = m.value();
    bins[b].ci_low = std::min(quantile_sorted(column, tail), m.value());
    bins[b].ci_high = std::max(quantile_sorted(column, 1.0 - tail), m.value());
  }
}

}  // namespace

FPLengthReport fp_length_report(const RetrievalRun& run, const Qrels& qrels,
                                const EmbeddingStore& corpus,
                                std::size_t n_query_quantiles,
                                const FpMode& mode) {
  const auto chunk_lengths = run_chunk_lengths(run, corpus);

  struct QueryStats {
    std::vector<std::int64_t> relevant;
    std::vector<std::int64_t> fps;
  };
  FPLengthReport report;
  report.mode = mode;
  std::vector<std::pair<std::string, double>> keys;
  std::unordered_map<std::string, QueryStats> per_query;

  for (const auto& list : run.lists()) {
    const GradeMap* grades = qrels.find(list.query_id);
    QueryStats qs;
    if (grades != nullptr) {
      for (const auto& [cid, g] : *grades) {
        if (g <= 0) continue;
        if (auto idx = corpus.find(cid)) {
          qs.relevant.push_back(corpus.manifest().items[*idx].token_length);
        }
      }
    }
    if (qs.relevant.empty()) {
      ++report.skipped_no_positive;
      continue;
    }
    std::vector<ChunkIndex> fps;
    try {
      fps = false_positive_indices(run, list, *grades, mode);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPositiveInRanking) throw;
      ++report.skipped_no_positive_in_ranking;
      continue;
    }
    for (auto c : fps) qs.fps.push_back(chunk_lengths[c]);
    RunningMean rel;
    for (auto len : qs.relevant) rel.add(static_cast<double>(len));
    keys.emplace_back(list.query_id, rel.value());
    per_query.emplace(list.query_id, std::move(qs));
  }
  report.n_queries = keys.size();

  const auto binning = quantile_bins(
      std::span<const std::pair<std::string, double>>(keys), n_query_quantiles);
  report.quantiles.resize(binning.n_bins());
  for (std::size_t b = 0; b < binning.n_bins(); ++b) {
    auto& out = report.quantiles[b];
    out.edge_low = binning.bins[b].low;
    out.edge_high = binning.bins[b].high;
    out.n_queries = binning.bins[b].count;
    RunningMean fp, rel;
    const std::size_t end =
        b + 1 < binning.n_bins() ? binning.starts[b + 1] : binning.order.size();
    for (std::size_t p = binning.starts[b]; p < end; ++p) {
      const auto& qs = per_query.at(binning.order[p]);
      for (auto len : qs.fps) fp.add(static_cast<double>(len));
      for (auto len : qs.relevant) rel.add(static_cast<double>(len));
    }
    out.n_fps = fp.count();
    if (fp.count() > 0) out.mean_fp_length = fp.value();
    out.n_relevant = rel.count();
    out.mean_relevant_length = rel.value();
  }

  RunningMean corpus_mean;
  for (const auto& item : corpus.manifest().items) {
    corpus_mean.add(static_cast<double>(item.token_length));
  }
  report.corpus_mean_length = corpus_mean.value();
  return report;
}

// ---- harm ------------------------------------------------------------------

HarmMap chunk_harm(const RetrievalRun& run_full, const Qrels& qrels,
                   std::size_t k, std::size_t threads) {
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "nDCG cutoff k must be >= 1");
  require_full(run_full);

  const auto& lists = run_full.lists();
  using Delta = std::pair<ChunkIndex, double>;
  std::vector<std::vector<Delta>> deltas(lists.size());

  parallel_for(lists.size(), threads, [&](std::size_t q) {
    const auto& list = lists[q];
    const GradeMap* grades = qrels.find(list.query_id);
    if (grades == nullptr) return;
    const double ideal = ideal_dcg(*grades, k);
    if (ideal == 0.0) return;

    const auto gains = ranked_gains(run_full, list, *grades, k + 1);
    const double base = dcg(gains, k) / ideal;
    const std::size_t window = std::min(k, gains.size());
    std::vector<double> edited;
    edited.reserve(gains.size());
    for (std::size_t r = 0; r < window; ++r) {
      edited.assign(gains.begin(), gains.end());
      edited.erase(edited.begin() + static_cast<std::ptrdiff_t>(r));
      deltas[q].emplace_back(list.entries[r].chunk, dcg(edited, k) / ideal - base);
    }
  });

  std::vector<double> total(run_full.chunk_ids().size(), 0.0);
  for (const auto& per_query : deltas) {
    for (const auto& [c, d] : per_query) total[c] += d;
  }
  HarmMap harm;
  for (std::size_t c = 0; c < total.size(); ++c) {
    harm.emplace(run_full.chunk_ids()[c], total[c]);
  }
  return harm;
}

NullSamples permuted_bin_means(std::span<const double> values,
                               std::span<const std::size_t> bin_of,
                               std::size_t n_bins, std::size_t n_permutations,
                               std::uint64_t seed, std::size_t threads) {
  NullSamples samples(n_permutations);
  parallel_for(n_permutations, threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<double> shuffled(values.begin(), values.end());
    rng.shuffle(std::span<double>(shuffled));
    std::vector<RunningMean> means(n_bins);
    for (std::size_t i = 0; i < shuffled.size(); ++i) means[bin_of[i]].add(shuffled[i]);
    samples[t].resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
      samples[t][b] = means[b].count() > 0 ? means[b].value()
                                           : std::numeric_limits<double>::quiet_NaN();
    }
  });
  return samples;
}

BinReport harm_report(const HarmMap& harm, const QuantileBinning& binning,
                      std::size_t n_permutations, double ci_level,
                      std::uint64_t seed, std::size_t threads) {
  check_permutation_args(n_permutations, ci_level);
  const std::size_t n_bins = binning.n_bins();
  std::vector<double> values;
  std::vector<std::size_t> bin_of;
  values.reserve(harm.size());
  bin_of.reserve(harm.size());
  for (const auto& [id, h] : harm) {
    auto b = binning.bin_of(id);
    if (!b) throw Error(ErrorCode::UnbinnedChunk, "chunk '" + id + "' has no bin");
    values.push_back(h);
    bin_of.push_back(*b);
  }

  BinReport report;
  report.statistic = "mean_harm";
  report.n_permutations = n_permutations;
  report.ci_level = ci_level;
  report.seed = seed;
  report.total = values.size();
  report.bins.resize(n_bins);
  std::vector<RunningMean> observed(n_bins);
  for (std::size_t i = 0; i < values.size(); ++i) observed[bin_of[i]].add(values[i]);
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& stat = report.bins[b];
    stat.edge_low = binning.bins[b].low;
    stat.edge_high = binning.bins[b].high;
    stat.n_items = observed[b].count();
    stat.observed = observed[b].count() > 0 ? observed[b].value()
                                            : std::numeric_limits<double>::quiet_NaN();
  }
  const auto samples =
      permuted_bin_means(values, bin_of, n_bins, n_permutations, seed, threads);
  summarize_null(samples, ci_level, report.bins);
  return report;
}

BinReport error_count_report(const RetrievalRun& run, const Qrels& qrels,
                             const QuantileBinning& binning,
                             std::size_t n_permutations, double ci_level,
                             std::uint64_t seed, const FpMode& mode,
                             std::size_t threads) {
  check_permutation_args(n_permutations, ci_level);
  require_full(run);
  const std::size_t n_bins = binning.n_bins();

  BinReport report;
  report.statistic = "fp_count";
  report.n_permutations = n_permutations;
  report.ci_level = ci_level;
  report.seed = seed;
  report.bins.resize(n_bins);

  // Bin of each run chunk, resolved lazily.
  std::vector<std::optional<std::size_t>> chunk_bin(run.chunk_ids().size());
  std::vector<bool> resolved(run.chunk_ids().size(), false);
  std::vector<std::size_t> counts(n_bins, 0);
  for (const auto& list : run.lists()) {
    const GradeMap* grades = qrels.find(list.query_id);
    if (grades == nullptr || !qrels.has_positive(list.query_id)) {
      ++report.skipped_queries;
      continue;
    }
    std::vector<ChunkIndex> fps;
    try {
      fps = false_positive_indices(run, list, *grades, mode);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPositiveInRanking) throw;
      ++report.skipped_queries;
      continue;
    }
    for (auto c : fps) {
      if (!resolved[c]) {
        chunk_bin[c] = binning.bin_of(run.chunk_id(c));
        resolved[c] = true;
      }
      if (!chunk_bin[c]) {
        throw Error(ErrorCode::UnbinnedChunk,
                    "chunk '" + std::string(run.chunk_id(c)) + "' has no bin");
      }
      ++counts[*chunk_bin[c]];
      ++report.total;
    }
  }
  for (std::size_t b = 0; b < n_bins; ++b) {
    auto& stat = report.bins[b];
    stat.edge_low = binning.bins[b].low;
    stat.edge_high = binning.bins[b].high;
    stat.n_items = binning.bins[b].count;
    stat.observed = static_cast<double>(counts[b]);
  }

  const std::size_t population = binning.order.size();
  NullSamples samples(n_permutations);
  parallel_for(n_permutations, threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> drawn(n_bins, 0);
    for (std::size_t i = 0; i < report.total; ++i) {
      ++drawn[binning.bin_at(static_cast<std::size_t>(rng.below(population)))];
    }
    samples[t].assign(drawn.begin(), drawn.end());
  });
  summarize_null(samples, ci_level, report.bins);
  return report;
}

}  // namespace mvlens
