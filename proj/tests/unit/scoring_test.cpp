#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "mvlens/error.hpp"
#include "mvlens/scoring.hpp"
#include "oracles.hpp"

namespace mvlens {
namespace {

EmbeddingSet rows(std::string id, std::size_t dim, std::vector<float> v) {
  return EmbeddingSet{std::move(id), dim, std::move(v), 1, "d"};
}

TEST(MaxSim, PicksBestChunkRow) {
  const auto q = rows("q", 2, {1, 0});
  const auto c = rows("c", 2, {1, 0, 0, 1});
  EXPECT_DOUBLE_EQ(maxsim(q.view(), c.view()), 1.0);
}

TEST(MaxSim, OrthonormalBasisScoresItsSize) {
  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<float> basis(n * n, 0.0f);
    for (std::size_t i = 0; i < n; ++i) basis[i * n + i] = 1.0f;
    const auto e = rows("e", n, basis);
    EXPECT_DOUBLE_EQ(maxsim(e.view(), e.view()), static_cast<double>(n));
  }
}

TEST(MaxSim, SingleVectorsReduceToInnerProduct) {
  const auto u = rows("u", 3, {0.5f, -1.0f, 2.0f});
  const auto v = rows("v", 3, {1.5f, 0.25f, -0.5f});
  EXPECT_DOUBLE_EQ(maxsim(u.view(), v.view()), 0.5 * 1.5 - 0.25 - 1.0);
}

TEST(MaxSim, MatchesTripleLoopOracle) {
  std::mt19937_64 gen(101);
  std::uniform_int_distribution<std::size_t> nq(1, 8), nc(1, 16), dim(1, 8);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = dim(gen);
    const auto q = testing::random_set(gen, "q", nq(gen), d, i % 2 == 0);
    const auto c = testing::random_set(gen, "c", nc(gen), d, i % 2 == 0);
    ASSERT_NEAR(maxsim(q.view(), c.view()), testing::maxsim_oracle(q.view(), c.view()), 1e-5);
  }
}

TEST(MaxSim, DimensionsMustAgree) {
  const auto q = rows("q", 2, {1, 0});
  const auto c = rows("c", 3, {1, 0, 0});
  try {
    maxsim(q.view(), c.view());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
  EXPECT_THROW(score_matrix(q.view(), c.view()), Error);
}

TEST(MaxSim, PrefixSupersetNeverLowersScore) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 300; ++i) {
    const auto q = testing::random_set(gen, "q", 1 + i % 8, 6, true);
    const auto c = testing::random_set(gen, "c", 1 + i % 16, 6, true);
    auto longer = c;
    const auto extra = testing::random_set(gen, "x", 1 + i % 5, 6, true);
    longer.vectors.insert(longer.vectors.end(), extra.vectors.begin(), extra.vectors.end());
    EXPECT_GE(maxsim(q.view(), longer.view()), maxsim(q.view(), c.view()));
  }
}

TEST(MaxSim, PermutationInvarianceAndScaleCovariance) {
  std::mt19937_64 gen(6);
  for (int i = 0; i < 100; ++i) {
    const auto q = testing::random_set(gen, "q", 5, 4, false);
    const auto c = testing::random_set(gen, "c", 7, 4, false);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    auto permuted = c;
    for (std::size_t r = 0; r < 7; ++r) {
      std::copy_n(c.vectors.begin() + perm[r] * 4, 4, permuted.vectors.begin() + r * 4);
    }
    auto q_rev = q;
    for (std::size_t r = 0; r < 5; ++r) {
      std::copy_n(q.vectors.begin() + (4 - r) * 4, 4, q_rev.vectors.begin() + r * 4);
    }
    const double base = maxsim(q.view(), c.view());
    EXPECT_NEAR(maxsim(q.view(), permuted.view()), base, 1e-12);
    EXPECT_NEAR(maxsim(q_rev.view(), c.view()), base, 1e-9);
    auto scaled = c;
    for (auto& x : scaled.vectors) x *= 2.0f;
    EXPECT_NEAR(maxsim(q.view(), scaled.view()), 2.0 * base, 1e-9);
  }
}

TEST(ScoreMatrix, IdentityAndSingleRow) {
  const auto e = rows("e", 2, {1, 0, 0, 1});
  const auto m = score_matrix(e.view(), e.view());
  ASSERT_EQ(m.rows, 2u);
  ASSERT_EQ(m.cols, 2u);
  EXPECT_EQ(m(0, 0), 1.0);
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_EQ(m(1, 0), 0.0);
  EXPECT_EQ(m(1, 1), 1.0);
  const auto u = rows("u", 2, {3, 4});
  const auto v = rows("v", 2, {0.5f, -1});
  const auto s = score_matrix(u.view(), v.view());
  ASSERT_EQ(s.values.size(), 1u);
  EXPECT_DOUBLE_EQ(s(0, 0), 1.5 - 4.0);
}

TEST(ScoreMatrix, RowMaximaSumToMaxSim) {
  std::mt19937_64 gen(202);
  for (int i = 0; i < 500; ++i) {
    const auto q = testing::random_set(gen, "q", 1 + i % 8, 1 + i % 8, true);
    const auto c = testing::random_set(gen, "c", 1 + i % 16, 1 + i % 8, true);
    const auto m = score_matrix(q.view(), c.view());
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      const auto row = m.row(r);
      sum += *std::max_element(row.begin(), row.end());
    }
    ASSERT_EQ(sum, maxsim(q.view(), c.view()));
  }
}

class RetrieveTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 gen(303);
    queries_ = EmbeddingStore::from_sets(testing::random_sets(gen, 50, 6, 8, true, "q"), {true, ""});
    corpus_ = EmbeddingStore::from_sets(testing::random_sets(gen, 500, 12, 8, true, "c"), {true, ""});
  }
  std::optional<EmbeddingStore> queries_, corpus_;
};

TEST_F(RetrieveTest, TopKMatchesFullSort) {
  const auto run = retrieve(*queries_, *corpus_, 10);
  ASSERT_EQ(run.lists().size(), 50u);
  EXPECT_EQ(run.k(), 10u);
  for (std::size_t q = 0; q < queries_->size(); ++q) {
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t c = 0; c < corpus_->size(); ++c) {
      all.emplace_back(testing::maxsim_oracle(queries_->at(q), corpus_->at(c)), std::string(corpus_->at(c).id));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const auto& list = run.lists()[q];
    EXPECT_EQ(list.query_id, queries_->at(q).id);
    ASSERT_EQ(list.entries.size(), 10u);
    for (std::size_t r = 0; r < 10; ++r) {
      EXPECT_EQ(run.chunk_id(list.entries[r].chunk), all[r].second);
      EXPECT_NEAR(list.entries[r].score, all[r].first, 1e-9);
    }
  }
}

TEST_F(RetrieveTest, FullRankingAndThreadIndependence) {
  const auto serial = retrieve(*queries_, *corpus_, 0);
  const auto parallel = retrieve(*queries_, *corpus_, 0, {4});
  EXPECT_TRUE(serial.is_full());
  for (std::size_t q = 0; q < serial.lists().size(); ++q) {
    const auto& a = serial.lists()[q].entries;
    const auto& b = parallel.lists()[q].entries;
    ASSERT_EQ(a.size(), corpus_->size());
    ASSERT_EQ(b.size(), a.size());
    for (std::size_t r = 0; r < a.size(); ++r) {
      ASSERT_EQ(a[r].chunk, b[r].chunk);
      ASSERT_EQ(a[r].score, b[r].score);
    }
  }
}

TEST_F(RetrieveTest, RankOfMatchesLinearScan) {
  const auto run = retrieve(*queries_, *corpus_, 0);
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<std::size_t> qd(0, 49), cd(0, 499);
  for (int i = 0; i < 100; ++i) {
    const auto& list = run.lists()[qd(gen)];
    const auto cid = corpus_->at(cd(gen)).id;
    std::size_t expected = 0;
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      if (run.chunk_id(list.entries[r].chunk) == cid) expected = r + 1;
    }
    EXPECT_EQ(rank_of(run, list.query_id, cid), expected);
  }
}

TEST(Retrieve, SingleChunkCorpusRanksFirst) {
  std::mt19937_64 gen(1);
  const auto queries = EmbeddingStore::from_sets(testing::random_sets(gen, 4, 3, 5, true, "q"));
  const auto corpus = EmbeddingStore::from_sets(testing::random_sets(gen, 1, 3, 5, true, "c"));
  const auto run = retrieve(queries, corpus, 10);
  for (const auto& list : run.lists()) {
    ASSERT_EQ(list.entries.size(), 1u);
    EXPECT_EQ(rank_of(run, list.query_id, "c0"), 1u);
  }
}

TEST(Retrieve, TiesBreakByChunkId) {
  const std::vector<EmbeddingSet> corpus = {rows("b", 2, {1, 0}), rows("c", 2, {1, 0}),
                                            rows("a", 2, {1, 0})};
  const std::vector<EmbeddingSet> queries = {rows("q", 2, {1, 0})};
  const auto run = retrieve(EmbeddingStore::from_sets(queries), EmbeddingStore::from_sets(corpus), 0);
  const auto& list = run.list("q");
  EXPECT_EQ(run.chunk_id(list.entries[0].chunk), "a");
  EXPECT_EQ(run.chunk_id(list.entries[1].chunk), "b");
  EXPECT_EQ(run.chunk_id(list.entries[2].chunk), "c");
}

TEST(Retrieve, TruncatedRunOmitsTail) {
  const std::vector<EmbeddingSet> corpus = {rows("a", 1, {3}), rows("b", 1, {2}), rows("c", 1, {1})};
  const std::vector<EmbeddingSet> queries = {rows("q", 1, {1})};
  const auto run = retrieve(EmbeddingStore::from_sets(queries), EmbeddingStore::from_sets(corpus), 2);
  EXPECT_EQ(rank_of(run, "q", "a"), 1u);
  EXPECT_FALSE(rank_of(run, "q", "c").has_value());
  EXPECT_FALSE(run.is_full());
  try {
    rank_of(run, "nope", "a");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownQuery);
  }
}

TEST(Retrieve, EmptyCorpusIsRejected) {
  const std::vector<EmbeddingSet> queries = {rows("q", 1, {1})};
  const std::vector<EmbeddingView> views = {queries[0].view()};
  try {
    retrieve(views, std::span<const EmbeddingView>{}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCorpus);
  }
}

TEST(Retrieve, RunConstructorValidates) {
  EXPECT_THROW(RetrievalRun({"a", "a"}, {}, 0), Error);
  EXPECT_THROW(RetrievalRun({"a"}, {ScoredList{"q", {{1, 0.0}}}}, 0), Error);
  EXPECT_THROW(RetrievalRun({"a"}, {ScoredList{"q", {}}, ScoredList{"q", {}}}, 0), Error);
}

}  // namespace
}  // namespace mvlens
