#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvlens/embedstore.hpp"
#include "mvlens/lengthbias.hpp"
#include "mvlens/metrics.hpp"
#include "mvlens/random.hpp"

namespace mvlens {

/// How appended tokens interact with the tokens already in a chunk.
///  - CausalPrefix: existing rows are untouched, so the row set only grows.
///  - BidirectionalResample: every existing row is perturbed and renormalized
///    before the new rows are appended, standing in for re-contextualization.
enum class ExtensionMode { CausalPrefix, BidirectionalResample };

std::string_view extension_mode_name(ExtensionMode mode);
ExtensionMode parse_extension_mode(std::string_view text);

struct SynthConfig {
  std::size_t dim = 32;
  std::size_t n_chunks = 400;
  std::size_t n_queries = 40;
  std::size_t query_tokens = 8;
  std::int64_t length_min = 8;
  std::int64_t length_max = 128;
  double relevance_signal = 0.6;  // cosine of planted rows to their query row
  double noise_scale = 0.1;
  std::uint64_t seed = 0;
  ExtensionMode extension_mode = ExtensionMode::CausalPrefix;

  /// Throws InvalidConfig.
  void validate() const;
};

struct SynthCorpus {
  EmbeddingStore corpus;
  EmbeddingStore queries;
  Qrels qrels;
};

/// Random unit vector, uniform on the sphere.
std::vector<float> random_unit_vector(Rng& rng, std::size_t dim);

/// Geometric surrogate corpus. Every query has `query_tokens` random unit
/// rows and one planted relevant chunk holding, per query row, a row at
/// cosine `relevance_signal` to it (then jittered by `noise_scale` and
/// renormalized). All other rows are uniform unit noise. Chunk lengths are
/// uniform in [length_min, length_max]; a chunk longer than its base segment
/// (max(length_min, planted rows)) is grown from that base with
/// extend_chunk(extension_mode), so planted rows stay exact under
/// CausalPrefix and get perturbed under BidirectionalResample. Bit-identical
/// output for identical configs.
SynthCorpus generate_corpus(const SynthConfig& config);

/// Default perturbation for BidirectionalResample when no config supplies one.
inline constexpr double kDefaultResampleNoise = 0.3;

/// Appends n_extra random unit rows; token_length grows by n_extra.
/// Throws InvalidConfig when n_extra == 0.
EmbeddingSet extend_chunk(const EmbeddingSet& chunk, std::size_t n_extra,
                          ExtensionMode mode, std::uint64_t seed,
                          double noise_scale = kDefaultResampleNoise);

/// Single-vector control: arithmetic mean of the rows, renormalized.
/// token_length is kept.
EmbeddingSet mean_pool(const EmbeddingView& item);
EmbeddingStore mean_pool(const EmbeddingStore& store);

struct MonotonicityConfig {
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t max_query_rows = 8;
  std::size_t max_chunk_rows = 16;
  std::size_t max_dim = 8;
  std::size_t max_extra = 16;
  double noise_scale = kDefaultResampleNoise;
};

struct MonotonicityResult {
  std::size_t trials = 0;
  std::size_t causal_decreases = 0;         // maxsim drop below -tolerance
  std::size_t bidirectional_decreases = 0;
  double min_causal_delta = 0.0;
  double min_bidirectional_delta = 0.0;
};

inline constexpr double kMonotonicityTolerance = 1e-6;

/// Extends random chunks both ways and counts MaxSim decreases.
MonotonicityResult monotonicity_check(const MonotonicityConfig& config);

enum class Pooling { MultiVector, SingleVector };
std::string_view pooling_name(Pooling pooling);

struct SweepOptions {
  std::size_t k = 10;
  std::size_t n_bins = 10;
  std::size_t n_permutations = 1000;
  double ci_level = 0.9;
  bool single_vector_control = true;
  std::size_t threads = 1;
};

struct SweepRow {
  SynthConfig config;
  Pooling pooling = Pooling::MultiVector;
  double mean_ndcg = 0.0;
  std::vector<double> profile;  // observed - baseline_mean per length bin
  double slope = 0.0;           // least-squares slope of profile over bin index
  double slope_ci_low = 0.0;    // same slope under the permutation null
  double slope_ci_high = 0.0;
  BinReport report;
};

/// For each config (and its mean-pooled control): generate, retrieve fully,
/// compute chunk harm, and compare per-length-bin harm with the permutation
/// baseline. Throws EmptyInput for an empty grid.
std::vector<SweepRow> bias_sweep(std::span<const SynthConfig> grid,
                                 const SweepOptions& options = {});

}  // namespace mvlens
