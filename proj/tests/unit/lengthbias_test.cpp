#include <gtest/gtest.h>

#include <cmath>

#include "mvlens/error.hpp"
#include "mvlens/lengthbias.hpp"
#include "oracles.hpp"

namespace mvlens {
namespace {

using Lengths = std::vector<std::pair<std::string, std::int64_t>>;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mvlens::Error thrown";
  return ErrorCode::Io;
}

TEST(QuantileBins, SplitsSortedLengths) {
  const Lengths lengths = {{"d", 4}, {"b", 2}, {"a", 1}, {"c", 3}};
  const auto bins = quantile_bins(lengths, 2);
  EXPECT_EQ(bins.bin_of("a"), 0u);
  EXPECT_EQ(bins.bin_of("b"), 0u);
  EXPECT_EQ(bins.bin_of("c"), 1u);
  EXPECT_EQ(bins.bin_of("d"), 1u);
  EXPECT_EQ(bins.edges(), (std::vector<double>{1, 3, 4}));
  EXPECT_FALSE(bins.bin_of("zz").has_value());
}

TEST(QuantileBins, EqualLengthsSplitById) {
  const Lengths lengths = {{"z", 5}, {"x", 5}, {"y", 5}, {"w", 5}};
  const auto bins = quantile_bins(lengths, 2);
  EXPECT_EQ(bins.bin_of("w"), 0u);
  EXPECT_EQ(bins.bin_of("x"), 0u);
  EXPECT_EQ(bins.bin_of("y"), 1u);
  EXPECT_EQ(bins.bin_of("z"), 1u);
}

TEST(QuantileBins, TenThousandRandomLengths) {
  std::mt19937_64 gen(1);
  std::uniform_int_distribution<std::int64_t> len(1, 3000);
  Lengths lengths;
  for (int i = 0; i < 10000; ++i) lengths.emplace_back("i" + std::to_string(i), len(gen));
  const auto bins = quantile_bins(lengths, 10);
  std::vector<std::size_t> counts(10, 0);
  std::vector<std::int64_t> lo(10, INT64_MAX), hi(10, INT64_MIN);
  for (const auto& [id, l] : lengths) {
    const auto b = *bins.bin_of(id);
    ++counts[b];
    lo[b] = std::min(lo[b], l);
    hi[b] = std::max(hi[b], l);
  }
  for (std::size_t b = 0; b < 10; ++b) {
    EXPECT_EQ(counts[b], 1000u);
    EXPECT_EQ(bins.bins[b].count, 1000u);
    if (b > 0) EXPECT_LE(hi[b - 1], lo[b]);
  }
  const auto edges = bins.edges();
  EXPECT_TRUE(std::is_sorted(edges.begin(), edges.end()));
}

TEST(QuantileBins, UnevenSizesDifferByOne) {
  Lengths lengths;
  for (int i = 0; i < 23; ++i) lengths.emplace_back("i" + std::to_string(i), i);
  const auto bins = quantile_bins(lengths, 5);
  for (const auto& b : bins.bins) {
    EXPECT_TRUE(b.count == 4 || b.count == 5);
  }
}

TEST(QuantileBins, Preconditions) {
  const Lengths three = {{"a", 1}, {"b", 2}, {"c", 3}};
  EXPECT_EQ(code_of([&] { quantile_bins(three, 4); }), ErrorCode::TooFewItems);
  EXPECT_EQ(code_of([&] { quantile_bins(three, 1); }), ErrorCode::InvalidConfig);
  const Lengths dup = {{"a", 1}, {"a", 2}};
  EXPECT_EQ(code_of([&] { quantile_bins(dup, 2); }), ErrorCode::DuplicateId);
}

TEST(FalsePositives, AboveBestPositive) {
  const auto run = testing::make_run({"p", "n1", "n2", "n3"},
                                     {{"q1", {"p", "n1", "n2", "n3"}}, {"q2", {"n1", "n2", "p", "n3"}}});
  const GradeMap g = {{"p", 1}};
  EXPECT_TRUE(false_positives(run, run.list("q1"), g).empty());
  EXPECT_EQ(false_positives(run, run.list("q2"), g), (std::vector<std::string>{"n1", "n2"}));
  EXPECT_EQ(code_of([&] { false_positives(run, run.list("q1"), GradeMap{{"x", 1}}); }),
            ErrorCode::NoPositiveInRanking);
}

TEST(FalsePositives, TopKMode) {
  const auto run = testing::make_run({"p", "n1", "n2", "n3"}, {{"q", {"n1", "p", "n2", "n3"}}});
  const GradeMap g = {{"p", 1}};
  const auto fps = false_positive_indices(run, run.list("q"), g, FpMode::parse("topk:3"));
  ASSERT_EQ(fps.size(), 2u);
  EXPECT_EQ(run.chunk_id(fps[0]), "n1");
  EXPECT_EQ(run.chunk_id(fps[1]), "n2");
  EXPECT_EQ(FpMode::parse("topk:3").to_string(), "topk:3");
  EXPECT_EQ(FpMode::parse("above-positive").to_string(), "above-positive");
  EXPECT_EQ(code_of([] { FpMode::parse("topk:0"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { FpMode::parse("bottom"); }), ErrorCode::InvalidConfig);
}

TEST(FalsePositives, MatchesLinearScan) {
  std::mt19937_64 gen(2);
  std::vector<std::string> chunks;
  for (int c = 0; c < 30; ++c) chunks.push_back("c" + std::to_string(c));
  std::uniform_int_distribution<int> grade(0, 2), npos(1, 3);
  for (int t = 0; t < 200; ++t) {
    auto order = chunks;
    std::shuffle(order.begin(), order.end(), gen);
    GradeMap g;
    for (int j = 0; j < 5; ++j) g[chunks[static_cast<std::size_t>(grade(gen) * 7 + j)]] = grade(gen);
    g[order[static_cast<std::size_t>(t % 30)]] = npos(gen);
    const auto run = testing::make_run(chunks, {{"q", order}});
    std::vector<std::string> expected;
    for (const auto& c : order) {
      if (grade_of(g, c) > 0) break;
      expected.push_back(c);
    }
    ASSERT_EQ(false_positives(run, run.list("q"), g), expected);
  }
}

EmbeddingStore length_corpus(const std::vector<std::string>& ids, const std::vector<std::int64_t>& lengths) {
  std::vector<EmbeddingSet> sets;
  for (std::size_t i = 0; i < ids.size(); ++i) sets.push_back({ids[i], 1, {1.0f}, lengths[i], "d"});
  return EmbeddingStore::from_sets(sets);
}

TEST(FpLengthReport, UniformLengthsGiveEqualMeans) {
  const auto p = testing::planted_fp_ranking(3, 60, 40, 0.05, 0.0);
  const std::vector<std::int64_t> uniform(60, 137);
  const auto corpus = length_corpus(p.chunk_ids, uniform);
  const auto report = fp_length_report(p.run, p.qrels, corpus, 4);
  EXPECT_EQ(report.corpus_mean_length, 137.0);
  EXPECT_EQ(report.n_queries, 40u);
  for (const auto& q : report.quantiles) {
    EXPECT_EQ(q.mean_relevant_length, 137.0);
    if (q.mean_fp_length) EXPECT_EQ(*q.mean_fp_length, 137.0);
  }
}

TEST(FpLengthReport, QuantilesFollowRelevantLength) {
  const auto p = testing::planted_fp_ranking(4, 200, 100, 0.02, 0.1);
  const auto corpus = length_corpus(p.chunk_ids, p.lengths);
  const auto report = fp_length_report(p.run, p.qrels, corpus, 10);
  ASSERT_EQ(report.quantiles.size(), 10u);
  double corpus_sum = 0.0;
  for (auto l : p.lengths) corpus_sum += static_cast<double>(l);
  EXPECT_NEAR(report.corpus_mean_length, corpus_sum / 200.0, 1e-9);
  std::size_t fps = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    fps += report.quantiles[b].n_fps;
    if (b > 0) {
      EXPECT_LE(report.quantiles[b - 1].mean_relevant_length, report.quantiles[b].mean_relevant_length);
    }
  }
  std::size_t expected_fps = 0;
  for (const auto& list : p.run.lists()) {
    expected_fps += false_positives(p.run, list, *p.qrels.find(list.query_id)).size();
  }
  EXPECT_EQ(fps, expected_fps);
}

TEST(FpLengthReport, RequiresFullRun) {
  std::mt19937_64 gen(5);
  const auto queries = EmbeddingStore::from_sets(testing::random_sets(gen, 3, 2, 4, true, "q"));
  const auto corpus = EmbeddingStore::from_sets(testing::random_sets(gen, 10, 2, 4, true, "c"));
  Qrels qrels;
  qrels.set("q0", "c1", 1);
  EXPECT_EQ(code_of([&] { fp_length_report(retrieve(queries, corpus, 3), qrels, corpus, 2); }),
            ErrorCode::TruncatedRun);
}

TEST(ChunkHarm, NegativeAbovePositive) {
  const auto run = testing::make_run({"neg", "pos"}, {{"q", {"neg", "pos"}}});
  Qrels qrels;
  qrels.set("q", "pos", 1);
  const auto harm = chunk_harm(run, qrels, 10);
  EXPECT_NEAR(harm.at("neg"), 1.0 - 1.0 / std::log2(3.0), 1e-12);
  EXPECT_NEAR(harm.at("neg"), 0.36907, 1e-5);
  EXPECT_NEAR(harm.at("pos"), -1.0 / std::log2(3.0), 1e-12);
}

TEST(ChunkHarm, DeepIrrelevantChunksGetExactlyZero) {
  std::vector<std::string> chunks;
  for (int c = 0; c < 30; ++c) chunks.push_back("c" + std::to_string(c));
  auto reversed = chunks;
  std::reverse(reversed.begin(), reversed.end());
  const auto run = testing::make_run(chunks, {{"q1", chunks}, {"q2", reversed}});
  Qrels qrels;
  qrels.set("q1", "c3", 1);
  qrels.set("q2", "c25", 1);
  const auto harm = chunk_harm(run, qrels, 5);
  for (int c = 11; c < 19; ++c) EXPECT_EQ(harm.at("c" + std::to_string(c)), 0.0);
  for (const auto& [id, h] : harm) {
    if (id != "c3" && id != "c25") EXPECT_GE(h, 0.0) << id;
  }
}

TEST(ChunkHarm, MatchesLeaveOneOutOracle) {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 3; ++trial) {
    const auto queries = EmbeddingStore::from_sets(testing::random_sets(gen, 8, 4, 6, true, "q"));
    const auto corpus = EmbeddingStore::from_sets(testing::random_sets(gen, 40, 8, 6, true, "c"));
    Qrels qrels;
    std::uniform_int_distribution<int> pick(0, 39), grade(1, 3);
    for (std::size_t q = 0; q < queries.size(); ++q) {
      for (int j = 0; j < 1 + trial; ++j) {
        qrels.set(std::string(queries.at(q).id), "c" + std::to_string(pick(gen)), grade(gen));
      }
    }
    const auto run = retrieve(queries, corpus, 0);
    const auto fast = chunk_harm(run, qrels, 10);
    const auto oracle = testing::harm_oracle(queries, corpus, qrels, 10);
    ASSERT_EQ(fast.size(), oracle.size());
    for (const auto& [id, h] : oracle) EXPECT_NEAR(fast.at(id), h, 1e-12) << id;
    EXPECT_EQ(chunk_harm(run, qrels, 10, 3), fast);
  }
}

TEST(ChunkHarm, RejectsTruncatedRuns) {
  std::mt19937_64 gen(7);
  const auto queries = EmbeddingStore::from_sets(testing::random_sets(gen, 2, 2, 3, true, "q"));
  const auto corpus = EmbeddingStore::from_sets(testing::random_sets(gen, 12, 2, 3, true, "c"));
  EXPECT_EQ(code_of([&] { chunk_harm(retrieve(queries, corpus, 5), Qrels{}, 10); }), ErrorCode::TruncatedRun);
}

QuantileBinning ten_bins(std::size_t n, std::vector<std::string>& ids) {
  Lengths lengths;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("c" + std::to_string(i));
    lengths.emplace_back(ids.back(), static_cast<std::int64_t>(i));
  }
  return quantile_bins(lengths, 10);
}

TEST(HarmReport, ConstantHarmCollapsesBand) {
  std::vector<std::string> ids;
  const auto bins = ten_bins(100, ids);
  HarmMap harm;
  for (const auto& id : ids) harm[id] = 0.1;
  const auto report = harm_report(harm, bins, 200, 0.9, 1);
  ASSERT_EQ(report.bins.size(), 10u);
  for (const auto& b : report.bins) {
    EXPECT_EQ(b.observed, 0.1);
    EXPECT_EQ(b.baseline_mean, 0.1);
    EXPECT_EQ(b.ci_low, 0.1);
    EXPECT_EQ(b.ci_high, 0.1);
    EXPECT_EQ(b.n_items, 10u);
  }
}

TEST(HarmReport, DeterministicAndThreadIndependent) {
  std::vector<std::string> ids;
  const auto bins = ten_bins(250, ids);
  std::mt19937_64 gen(8);
  std::exponential_distribution<double> e(3.0);
  HarmMap harm;
  for (const auto& id : ids) harm[id] = e(gen);
  const auto a = harm_report(harm, bins, 300, 0.9, 77, 1);
  const auto b = harm_report(harm, bins, 300, 0.9, 77, 4);
  const auto c = harm_report(harm, bins, 300, 0.9, 78, 1);
  bool any_diff = false;
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(a.bins[i].observed, b.bins[i].observed);
    EXPECT_EQ(a.bins[i].baseline_mean, b.bins[i].baseline_mean);
    EXPECT_EQ(a.bins[i].ci_low, b.bins[i].ci_low);
    EXPECT_EQ(a.bins[i].ci_high, b.bins[i].ci_high);
    EXPECT_LE(a.bins[i].ci_low, a.bins[i].baseline_mean);
    EXPECT_LE(a.bins[i].baseline_mean, a.bins[i].ci_high);
    any_diff |= a.bins[i].ci_low != c.bins[i].ci_low;
  }
  EXPECT_TRUE(any_diff);
  EXPECT_EQ(a.statistic, "mean_harm");
  EXPECT_EQ(a.total, 250u);
}

TEST(HarmReport, RejectsBadInput) {
  std::vector<std::string> ids;
  const auto bins = ten_bins(20, ids);
  HarmMap harm = {{"c0", 1.0}};
  EXPECT_EQ(code_of([&] { harm_report(harm, bins, 99, 0.9, 0); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { harm_report(harm, bins, 100, 1.0, 0); }), ErrorCode::InvalidConfig);
  harm["stray"] = 0.0;
  EXPECT_EQ(code_of([&] { harm_report(harm, bins, 100, 0.9, 0); }), ErrorCode::UnbinnedChunk);
}

TEST(HarmReport, IncreasingHarmExceedsBandInTopBin) {
  std::vector<std::string> ids;
  const auto bins = ten_bins(200, ids);
  HarmMap harm;
  for (std::size_t i = 0; i < ids.size(); ++i) harm[ids[i]] = static_cast<double>(i);
  const auto report = harm_report(harm, bins, 1000, 0.9, 3);
  EXPECT_GT(report.bins.back().observed, report.bins.back().ci_high);
  EXPECT_LT(report.bins.front().observed, report.bins.front().ci_low);
}

TEST(PermutedBinMeans, IndependentOfThreads) {
  std::vector<double> values;
  std::vector<std::size_t> bin_of;
  for (std::size_t i = 0; i < 57; ++i) {
    values.push_back(std::sin(static_cast<double>(i)));
    bin_of.push_back(i % 3);
  }
  EXPECT_EQ(permuted_bin_means(values, bin_of, 3, 150, 9, 1), permuted_bin_means(values, bin_of, 3, 150, 9, 5));
}

TEST(ErrorCountReport, NoErrorsMeansZeroCounts) {
  std::vector<std::string> chunks;
  for (int c = 0; c < 20; ++c) chunks.push_back("c" + std::to_string(c));
  Qrels qrels;
  std::vector<std::pair<std::string, std::vector<std::string>>> rankings;
  for (int q = 0; q < 5; ++q) {
    auto order = chunks;
    std::rotate(order.begin(), order.begin() + q, order.end());
    qrels.set("q" + std::to_string(q), order.front(), 1);
    rankings.emplace_back("q" + std::to_string(q), order);
  }
  std::vector<std::string> ids;
  Lengths lengths;
  for (int c = 0; c < 20; ++c) lengths.emplace_back(chunks[static_cast<std::size_t>(c)], c);
  const auto report = error_count_report(testing::make_run(chunks, rankings), qrels,
                                         quantile_bins(lengths, 2), 100, 0.9, 0);
  for (const auto& b : report.bins) {
    EXPECT_EQ(b.observed, 0.0);
    EXPECT_EQ(b.baseline_mean, 0.0);
  }
  EXPECT_EQ(report.total, 0u);
}

TEST(ErrorCountReport, UniformBaseline) {
  std::vector<std::string> chunks;
  for (int c = 0; c < 100; ++c) chunks.push_back("c" + std::to_string(c));
  Qrels qrels;
  std::vector<std::pair<std::string, std::vector<std::string>>> rankings;
  for (int q = 0; q < 10; ++q) {
    auto order = chunks;
    std::rotate(order.begin(), order.begin() + q * 10, order.end());
    qrels.set("q" + std::to_string(q), order[10], 1);
    rankings.emplace_back("q" + std::to_string(q), order);
  }
  std::vector<std::string> ids;
  const auto bins = ten_bins(100, ids);
  const auto report = error_count_report(testing::make_run(chunks, rankings), qrels, bins, 1000, 0.9, 5);
  EXPECT_EQ(report.total, 100u);
  EXPECT_EQ(report.statistic, "fp_count");
  double observed = 0.0;
  for (const auto& b : report.bins) {
    EXPECT_NEAR(b.baseline_mean, 10.0, 0.5);
    observed += b.observed;
  }
  EXPECT_EQ(observed, 100.0);
}

TEST(ErrorCountReport, FalsePositivesFromLongestBinStandOut) {
  const auto p = testing::planted_fp_ranking(10, 200, 50, 0.0, 0.0);
  std::vector<std::string> chunks = p.chunk_ids;
  const auto bins = quantile_bins(testing::id_lengths(p.chunk_ids, p.lengths), 10);
  // Promote three chunks of the longest bin above each positive.
  const auto top_start = bins.starts.back();
  std::vector<std::pair<std::string, std::vector<std::string>>> rankings;
  Qrels qrels;
  for (std::size_t q = 0; q < 50; ++q) {
    const std::string qid = "q" + std::to_string(q);
    const std::string pos = bins.order[q];
    qrels.set(qid, pos, 1);
    std::vector<std::string> ranked;
    for (std::size_t j = 0; j < 3; ++j) ranked.push_back(bins.order[top_start + (q + j) % 20]);
    ranked.push_back(pos);
    for (const auto& c : chunks) {
      if (std::find(ranked.begin(), ranked.end(), c) == ranked.end()) ranked.push_back(c);
    }
    rankings.emplace_back(qid, ranked);
  }
  const auto report = error_count_report(testing::make_run(chunks, rankings), qrels, bins, 1000, 0.9, 11);
  EXPECT_GT(report.bins.back().observed, report.bins.back().ci_high);
  EXPECT_EQ(report.bins.back().observed, 150.0);
}

}  // namespace
}  // namespace mvlens
