#include "mvlens/synthlab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "mvlens/error.hpp"
#include "mvlens/parallel.hpp"
#include "mvlens/scoring.hpp"
#include "mvlens/stats.hpp"

namespace mvlens {
namespace {

void invalid(const std::string& what) {
  throw Error(ErrorCode::InvalidConfig, "invalid synthetic config: " + what);
}

std::string padded_id(char prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%06zu", prefix, i);
  return buf;
}

void normalize_into(const std::vector<double>& v, float* out) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double inv = 1.0 / std::sqrt(sq);
  for (std::size_t d = 0; d < v.size(); ++d) out[d] = static_cast<float>(v[d] * inv);
}

void append_unit_rows(Rng& rng, std::size_t dim, std::size_t n,
                      std::vector<float>& rows) {
  for (std::size_t i = 0; i < n; ++i) {
    auto v = random_unit_vector(rng, dim);
    rows.insert(rows.end(), v.begin(), v.end());
  }
}

// Unit row at cosine `signal` to `target` (before jitter).
std::vector<float> planted_row(Rng& rng, std::span<const float> target,
                               double signal, double noise_scale) {
  const std::size_t dim = target.size();
  std::vector<double> u(dim);
  double proj = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    u[d] = rng.normal();
    proj += u[d] * target[d];
  }
  double sq = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    u[d] -= proj * target[d];
    sq += u[d] * u[d];
  }
  const double inv = 1.0 / std::sqrt(sq);
  const double ortho = std::sqrt(std::max(0.0, 1.0 - signal * signal));
  std::vector<double> row(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    row[d] = signal * target[d] + ortho * u[d] * inv;
  }
  if (noise_scale > 0.0) {
    for (auto& x : row) x += noise_scale * rng.normal();
  }
  std::vector<float> out(dim);
  normalize_into(row, out.data());
  return out;
}

}  // namespace

std::string_view extension_mode_name(ExtensionMode mode) {
  return mode == ExtensionMode::CausalPrefix ? "causal_prefix" : "bidirectional_resample";
}

ExtensionMode parse_extension_mode(std::string_view text) {
  if (text == "causal_prefix") return ExtensionMode::CausalPrefix;
  if (text == "bidirectional_resample") return ExtensionMode::BidirectionalResample;
  throw Error(ErrorCode::InvalidConfig,
              "extension mode must be causal_prefix or bidirectional_resample, got '" +
                  std::string(text) + "'");
}

std::string_view pooling_name(Pooling pooling) {
  return pooling == Pooling::MultiVector ? "multi_vector" : "single_vector";
}

void SynthConfig::validate() const {
  if (dim < 2) invalid("dim must be >= 2");
  if (n_chunks < 1) invalid("n_chunks must be >= 1");
  if (n_queries < 1) invalid("n_queries must be >= 1");
  if (query_tokens < 1) invalid("query_tokens must be >= 1");
  if (length_min < 1 || length_min > length_max) {
    invalid("length range must satisfy 1 <= min <= max");
  }
  if (!(relevance_signal >= 0.0 && relevance_signal <= 1.0)) {
    invalid("relevance_signal must lie in [0, 1]");
  }
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) {
    invalid("noise_scale must be finite and >= 0");
  }
}

std::vector<float> random_unit_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      sq += x * x;
    }
  } while (sq == 0.0);
  std::vector<float> out(dim);
  normalize_into(v, out.data());
  return out;
}

EmbeddingSet extend_chunk(const EmbeddingSet& chunk, std::size_t n_extra,
                          ExtensionMode mode, std::uint64_t seed,
                          double noise_scale) {
  if (n_extra == 0) invalid("n_extra must be >= 1");
  Rng rng(seed);
  EmbeddingSet out = chunk;
  const std::size_t dim = chunk.dim;
  if (mode == ExtensionMode::BidirectionalResample) {
    std::vector<double> row(dim);
    for (std::size_t r = 0; r < chunk.n_vectors(); ++r) {
      const auto src = chunk.row(r);
      for (std::size_t d = 0; d < dim; ++d) row[d] = src[d] + noise_scale * rng.normal();
      normalize_into(row, out.vectors.data() + r * dim);
    }
  }
  out.vectors.reserve(out.vectors.size() + n_extra * dim);
  append_unit_rows(rng, dim, n_extra, out.vectors);
  out.token_length = chunk.token_length + static_cast<std::int64_t>(n_extra);
  return out;
}

SynthCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  const std::size_t dim = config.dim;

  Rng query_rng(derive_seed(config.seed, "queries"));
  std::vector<EmbeddingSet> queries(config.n_queries);
  for (std::size_t q = 0; q < config.n_queries; ++q) {
    auto& set = queries[q];
    set.id = padded_id('q', q);
    set.dim = dim;
    set.dataset = "synth";
    set.token_length = static_cast<std::int64_t>(config.query_tokens);
    append_unit_rows(query_rng, dim, config.query_tokens, set.vectors);
  }

  Rng length_rng(derive_seed(config.seed, "lengths"));
  std::vector<std::int64_t> lengths(config.n_chunks);
  for (auto& len : lengths) len = length_rng.between(config.length_min, config.length_max);

  Rng positive_rng(derive_seed(config.seed, "positives"));
  std::vector<std::size_t> perm(config.n_chunks);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  positive_rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> planted_queries(config.n_chunks);
  Qrels qrels;
  for (std::size_t q = 0; q < config.n_queries; ++q) {
    const std::size_t c = perm[q % config.n_chunks];
    planted_queries[c].push_back(q);
    qrels.set(queries[q].id, padded_id('c', c), 1);
  }

  const std::uint64_t chunk_seed = derive_seed(config.seed, "chunks");
  std::vector<EmbeddingSet> chunks(config.n_chunks);
  for (std::size_t c = 0; c < config.n_chunks; ++c) {
    const std::uint64_t seed_c = derive_seed(chunk_seed, static_cast<std::uint64_t>(c));
    Rng rng(seed_c);

    std::vector<std::vector<float>> planted;
    for (std::size_t q : planted_queries[c]) {
      for (std::size_t i = 0; i < config.query_tokens; ++i) {
        planted.push_back(planted_row(rng, queries[q].row(i), config.relevance_signal,
                                      config.noise_scale));
      }
    }
    const auto n_planted = static_cast<std::int64_t>(planted.size());
    const std::int64_t total = std::max(lengths[c], n_planted);
    const std::int64_t base = std::min(total, std::max(config.length_min, n_planted));

    // Random slots for planted rows inside the base segment.
    std::vector<std::size_t> slots(static_cast<std::size_t>(base));
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(slots));
    std::vector<int> planted_at(static_cast<std::size_t>(base), -1);
    for (std::size_t p = 0; p < planted.size(); ++p) planted_at[slots[p]] = static_cast<int>(p);

    EmbeddingSet& set = chunks[c];
    set.id = padded_id('c', c);
    set.dim = dim;
    set.dataset = "synth";
    set.token_length = base;
    set.vectors.reserve(static_cast<std::size_t>(total) * dim);
    for (std::size_t r = 0; r < static_cast<std::size_t>(base); ++r) {
      if (planted_at[r] >= 0) {
        const auto& row = planted[static_cast<std::size_t>(planted_at[r])];
        set.vectors.insert(set.vectors.end(), row.begin(), row.end());
      } else {
        append_unit_rows(rng, dim, 1, set.vectors);
      }
    }
    if (total > base) {
      set = extend_chunk(set, static_cast<std::size_t>(total - base), config.extension_mode,
                         derive_seed(seed_c, "extend"), config.noise_scale);
    }
  }

  StoreOptions options{true, "synthlab geometric surrogate"};
  return {EmbeddingStore::from_sets(chunks, options),
          EmbeddingStore::from_sets(queries, options), std::move(qrels)};
}

EmbeddingSet mean_pool(const EmbeddingView& item) {
  std::vector<double> acc(item.dim, 0.0);
  for (std::size_t r = 0; r < item.n_vectors; ++r) {
    const auto row = item.row(r);
    for (std::size_t d = 0; d < item.dim; ++d) acc[d] += row[d];
  }
  EmbeddingSet out;
  out.id = std::string(item.id);
  out.dim = item.dim;
  out.token_length = item.token_length;
  out.dataset = std::string(item.dataset);
  out.vectors.resize(item.dim);
  double sq = 0.0;
  for (double x : acc) sq += x * x;
  if (sq == 0.0) {
    // Rows cancel exactly; fall back to the first row's direction.
    std::copy(item.row(0).begin(), item.row(0).end(), out.vectors.begin());
  } else {
    normalize_into(acc, out.vectors.data());
  }
  return out;
}

EmbeddingStore mean_pool(const EmbeddingStore& store) {
  std::vector<EmbeddingSet> pooled;
  pooled.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) pooled.push_back(mean_pool(store.at(i)));
  return EmbeddingStore::from_sets(pooled, {true, store.manifest().provenance});
}

MonotonicityResult monotonicity_check(const MonotonicityConfig& config) {
  if (config.max_dim < 2 || config.max_query_rows < 1 || config.max_chunk_rows < 1 ||
      config.max_extra < 1) {
    invalid("monotonicity bounds must be >= 1 (dim >= 2)");
  }
  MonotonicityResult result;
  result.trials = config.trials;
  result.min_causal_delta = std::numeric_limits<double>::infinity();
  result.min_bidirectional_delta = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < config.trials; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    const auto dim = static_cast<std::size_t>(rng.between(2, static_cast<std::int64_t>(config.max_dim)));
    const auto nq = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(config.max_query_rows)));
    const auto nc = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(config.max_chunk_rows)));
    const auto extra = static_cast<std::size_t>(rng.between(1, static_cast<std::int64_t>(config.max_extra)));

    EmbeddingSet query{"q", dim, {}, static_cast<std::int64_t>(nq), "synth"};
    EmbeddingSet chunk{"c", dim, {}, static_cast<std::int64_t>(nc), "synth"};
    append_unit_rows(rng, dim, nq, query.vectors);
    append_unit_rows(rng, dim, nc, chunk.vectors);
    const std::uint64_t ext_seed = rng.next();

    const double before = maxsim(query.view(), chunk.view());
    const auto causal = extend_chunk(chunk, extra, ExtensionMode::CausalPrefix, ext_seed);
    const auto bidir = extend_chunk(chunk, extra, ExtensionMode::BidirectionalResample,
                                    ext_seed, config.noise_scale);
    const double d_causal = maxsim(query.view(), causal.view()) - before;
    const double d_bidir = maxsim(query.view(), bidir.view()) - before;
    if (d_causal < -kMonotonicityTolerance) ++result.causal_decreases;
    if (d_bidir < -kMonotonicityTolerance) ++result.bidirectional_decreases;
    result.min_causal_delta = std::min(result.min_causal_delta, d_causal);
    result.min_bidirectional_delta = std::min(result.min_bidirectional_delta, d_bidir);
  }
  return result;
}

std::vector<SweepRow> bias_sweep(std::span<const SynthConfig> grid,
                                 const SweepOptions& options) {
  if (grid.empty()) throw Error(ErrorCode::EmptyInput, "empty sweep grid");
  std::vector<SweepRow> rows;
  for (const auto& config : grid) {
    const auto synth = generate_corpus(config);
    std::vector<Pooling> poolings = {Pooling::MultiVector};
    if (options.single_vector_control) poolings.push_back(Pooling::SingleVector);

    for (Pooling pooling : poolings) {
      const bool single = pooling == Pooling::SingleVector;
      const EmbeddingStore corpus = single ? mean_pool(synth.corpus) : synth.corpus;
      const EmbeddingStore queries = single ? mean_pool(synth.queries) : synth.queries;
      const auto run = retrieve(queries, corpus, 0, {options.threads});
      const auto harm = chunk_harm(run, synth.qrels, options.k, options.threads);
      const auto binning = corpus_length_bins(corpus, options.n_bins);
      const std::uint64_t perm_seed = derive_seed(config.seed, "sweep-permutation");

      SweepRow row;
      row.config = config;
      row.pooling = pooling;
      row.mean_ndcg = evaluate_run(run, synth.qrels, options.k).mean;
      row.report = harm_report(harm, binning, options.n_permutations, options.ci_level,
                               perm_seed, options.threads);
      for (const auto& b : row.report.bins) row.profile.push_back(b.observed - b.baseline_mean);
      row.slope = least_squares_slope(row.profile);

      // Null distribution of the slope from the same permutations.
      std::vector<double> values;
      std::vector<std::size_t> bin_of;
      for (const auto& [id, h] : harm) {
        values.push_back(h);
        bin_of.push_back(*binning.bin_of(id));
      }
      const auto samples = permuted_bin_means(values, bin_of, options.n_bins,
                                              options.n_permutations, perm_seed,
                                              options.threads);
      std::vector<double> slopes;
      slopes.reserve(samples.size());
      std::vector<double> centered(options.n_bins);
      for (const auto& trial : samples) {
        for (std::size_t b = 0; b < options.n_bins; ++b) {
          centered[b] = trial[b] - row.report.bins[b].baseline_mean;
        }
        slopes.push_back(least_squares_slope(centered));
      }
      std::sort(slopes.begin(), slopes.end());
      const double tail = (1.0 - options.ci_level) / 2.0;
      row.slope_ci_low = quantile_sorted(slopes, tail);
      row.slope_ci_high = quantile_sorted(slopes, 1.0 - tail);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace mvlens
