#include <benchmark/benchmark.h>

#include <random>

#include "mvlens/lengthbias.hpp"
#include "mvlens/scoring.hpp"
#include "mvlens/synthlab.hpp"

namespace {

struct Fixture {
  mvlens::SynthCorpus synth;
  mvlens::RetrievalRun run;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    mvlens::SynthConfig cfg;
    cfg.dim = 32;
    cfg.n_chunks = 2000;
    cfg.n_queries = 50;
    cfg.length_min = 8;
    cfg.length_max = 128;
    cfg.relevance_signal = 0.6;
    auto synth = mvlens::generate_corpus(cfg);
    auto run = mvlens::retrieve(synth.queries, synth.corpus, 0);
    return Fixture{std::move(synth), std::move(run)};
  }();
  return f;
}

void BM_ChunkHarm(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(mvlens::chunk_harm(f.run, f.synth.qrels, 10));
}
BENCHMARK(BM_ChunkHarm)->Unit(benchmark::kMillisecond);

void BM_PermutedBinMeans(benchmark::State& state) {
  const auto n_items = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal;
  std::vector<double> values(n_items);
  std::vector<std::size_t> bin_of(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    values[i] = normal(gen);
    bin_of[i] = i * 10 / n_items;
  }
  const auto threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(mvlens::permuted_bin_means(values, bin_of, 10, 1000, 7, threads));
  }
}
BENCHMARK(BM_PermutedBinMeans)->Args({5000, 1})->Args({56718, 1})->Args({56718, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_ErrorCountReport(benchmark::State& state) {
  const auto& f = fixture();
  const auto bins = mvlens::corpus_length_bins(f.synth.corpus, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mvlens::error_count_report(f.run, f.synth.qrels, bins, 1000, 0.9, 3));
  }
}
BENCHMARK(BM_ErrorCountReport)->Unit(benchmark::kMillisecond);

}  // namespace
