#include <benchmark/benchmark.h>

#include "mvlens/scoring.hpp"
#include "mvlens/synthlab.hpp"

namespace {

mvlens::SynthCorpus make_corpus(std::size_t n_chunks, std::size_t n_queries, std::size_t length) {
  mvlens::SynthConfig cfg;
  cfg.dim = 128;
  cfg.n_chunks = n_chunks;
  cfg.n_queries = n_queries;
  cfg.query_tokens = 32;
  cfg.length_min = length;
  cfg.length_max = length;
  cfg.relevance_signal = 0.6;
  return mvlens::generate_corpus(cfg);
}

void BM_MaxSim(benchmark::State& state) {
  const auto length = static_cast<std::size_t>(state.range(0));
  const auto synth = make_corpus(1, 1, length);
  const auto q = synth.queries.at(0);
  const auto c = synth.corpus.at(0);
  for (auto _ : state) benchmark::DoNotOptimize(mvlens::maxsim(q, c));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.n_vectors * c.n_vectors));
}
BENCHMARK(BM_MaxSim)->Arg(32)->Arg(256)->Arg(1024);

void BM_Retrieve(benchmark::State& state) {
  const auto synth = make_corpus(static_cast<std::size_t>(state.range(0)), 8, 128);
  mvlens::RetrieveOptions opts;
  opts.threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(mvlens::retrieve(synth.queries, synth.corpus, 10, opts));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 8);
}
BENCHMARK(BM_Retrieve)->Args({500, 1})->Args({2000, 1})->Args({2000, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

}  // namespace
